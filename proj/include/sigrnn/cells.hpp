/* Copyright 2026 The sigrnn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Gate equations of the LSTM and GRU cells and their signature-gated
// variants, one sample at a time. These are the readable reference forms;
// `layers.hpp` evaluates the same equations batched over samples.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigrnn/errors.hpp"
#include "sigrnn/numerics.hpp"
#include "sigrnn/signature.hpp"

namespace sigrnn {

enum class CellKind { lstm, gru, sig_lstm, sig_gru };

inline const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
    case CellKind::sig_lstm: return "sig_lstm";
    case CellKind::sig_gru: return "sig_gru";
  }
  return "?";
}

inline CellKind cell_kind_from_string(const std::string& s) {
  if (s == "lstm") return CellKind::lstm;
  if (s == "gru") return CellKind::gru;
  if (s == "sig_lstm") return CellKind::sig_lstm;
  if (s == "sig_gru") return CellKind::sig_gru;
  throw ConfigError("unknown cell kind '" + s + "' (valid: lstm, gru, sig_lstm, sig_gru)");
}

inline bool is_signature_kind(CellKind k) { return k == CellKind::sig_lstm || k == CellKind::sig_gru; }
inline bool is_lstm_kind(CellKind k) { return k == CellKind::lstm || k == CellKind::sig_lstm; }

struct LayerConfig {
  CellKind kind = CellKind::lstm;
  std::size_t hidden = 100;
  std::size_t sig_depth = 0;  // sig kinds only
  std::size_t proj_dim = 0;   // sig kinds only, 5 or 10
  bool return_sequences = false;

  void validate() const {
    if (hidden == 0) throw ConfigError("layer hidden width must be >= 1");
    if (is_signature_kind(kind)) {
      SigSpec(proj_dim == 0 ? 1 : proj_dim, sig_depth);
      if (proj_dim == 0) throw ConfigError("signature layer needs a projection dimension");
    } else if (sig_depth != 0 || proj_dim != 0) {
      throw ConfigError(std::string("layer kind ") + to_string(kind) +
                        " takes no signature depth or projection");
    }
  }

  SigSpec sig_spec() const { return SigSpec(proj_dim, sig_depth); }

  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate order i, f, c, o.
struct LstmParams {
  std::array<Matrix, 4> w;  // H x D
  std::array<Matrix, 4> u;  // H x H
  std::array<Vec, 4> b;     // H
};

// Gate order z, r, h.
struct GruParams {
  std::array<Matrix, 3> w;
  std::array<Matrix, 3> u;
  std::array<Vec, 3> b;
};

struct SigGateParams {
  ProjectionParams projection;
  Matrix w_gate;  // H x sig_dim(p, M)
  Vec b_gate;     // H
  SigSpec spec;
};

enum LstmGate : std::size_t { kInput = 0, kForget = 1, kCell = 2, kOutput = 3 };
enum GruGate : std::size_t { kUpdate = 0, kReset = 1, kCandidate = 2 };

struct LstmState {
  Vec h;
  Vec c;
};

namespace detail {

inline Vec gate_preactivation(const Matrix& w, const Matrix& u, const Vec& b,
                              std::span<const double> x, std::span<const double> h) {
  Vec a = matvec_affine(w, x, b);
  const Vec rec = matvec_affine(u, h, Vec(u.rows(), 0.0));
  for (std::size_t j = 0; j < a.size(); ++j) a[j] += rec[j];
  return a;
}

inline void check_state(std::size_t hidden, std::span<const double> h, const char* who) {
  if (h.size() != hidden) {
    throw ShapeError(std::string(who) + ": state has " + std::to_string(h.size()) +
                     " entries, cell width is " + std::to_string(hidden));
  }
}

}  // namespace detail

// One LSTM step. When `forget` is given it replaces the forget gate (the
// signature-gated variant supplies it from the signature stream).
inline LstmState lstm_step(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, const LstmParams& p,
                           std::optional<std::span<const double>> forget = std::nullopt) {
  const std::size_t hidden = p.b[kInput].size();
  detail::check_state(hidden, h_prev, "lstm_step");
  detail::check_state(hidden, c_prev, "lstm_step");
  auto gate = [&](std::size_t g) { return detail::gate_preactivation(p.w[g], p.u[g], p.b[g], x, h_prev); };
  Vec i = gate(kInput), c_tilde = gate(kCell), o = gate(kOutput);
  Vec f;
  if (forget) {
    detail::check_state(hidden, *forget, "lstm_step forget override");
    f.assign(forget->begin(), forget->end());
  } else {
    f = gate(kForget);
    for (double& v : f) v = sigmoid(v);
  }
  LstmState next{Vec(hidden), Vec(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double ig = sigmoid(i[j]);
    const double og = sigmoid(o[j]);
    const double cg = std::tanh(c_tilde[j]);
    next.c[j] = f[j] * c_prev[j] + ig * cg;
    next.h[j] = og * std::tanh(next.c[j]);
  }
  return next;
}

inline Vec gru_step(std::span<const double> x, std::span<const double> h_prev, const GruParams& p,
                    std::optional<std::span<const double>> reset = std::nullopt) {
  const std::size_t hidden = p.b[kUpdate].size();
  detail::check_state(hidden, h_prev, "gru_step");
  Vec z = detail::gate_preactivation(p.w[kUpdate], p.u[kUpdate], p.b[kUpdate], x, h_prev);
  for (double& v : z) v = sigmoid(v);
  Vec r;
  if (reset) {
    detail::check_state(hidden, *reset, "gru_step reset override");
    r.assign(reset->begin(), reset->end());
  } else {
    r = detail::gate_preactivation(p.w[kReset], p.u[kReset], p.b[kReset], x, h_prev);
    for (double& v : r) v = sigmoid(v);
  }
  Vec rh(hidden);
  for (std::size_t j = 0; j < hidden; ++j) rh[j] = r[j] * h_prev[j];
  Vec n = detail::gate_preactivation(p.w[kCandidate], p.u[kCandidate], p.b[kCandidate], x, rh);
  Vec h(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    h[j] = (1.0 - z[j]) * h_prev[j] + z[j] * std::tanh(n[j]);
  }
  return h;
}

// Time-normalized prefix signatures of the projected input, one stream per
// sample.
inline std::vector<SignatureStream> signature_gate_inputs(const Tensor3& x, const SigGateParams& g) {
  const Tensor3 projected = project_input(x, g.projection);
  auto streams = stream_signature(projected, g.spec);
  for (auto& s : streams) s = time_normalize(s);
  return streams;
}

// sigma(W_gate S_t + b_gate) for every step of one stream (T x H).
inline Matrix signature_gate(const SignatureStream& normalized, const SigGateParams& g) {
  if (g.w_gate.cols() != g.spec.dim()) {
    throw ShapeError("signature gate: " + shape_str(g.w_gate) + " does not match signature dimension " +
                     std::to_string(g.spec.dim()));
  }
  const std::size_t steps = normalized.length();
  Matrix out(steps, g.w_gate.rows());
  for (std::size_t t = 0; t < steps; ++t) {
    const auto s = normalized.steps.values().subspan(t * normalized.steps.cols(), normalized.steps.cols());
    const Vec a = matvec_affine(g.w_gate, s, g.b_gate);
    for (std::size_t j = 0; j < a.size(); ++j) out(t, j) = sigmoid(a[j]);
  }
  return out;
}

// LSTM whose forget gate is driven only by the signature of the projected
// input history. p.w[kForget] / p.u[kForget] are ignored.
inline Tensor3 siglstm_forward(const Tensor3& x, const LstmParams& p, const SigGateParams& g) {
  const std::size_t hidden = p.b[kInput].size();
  const auto streams = signature_gate_inputs(x, g);
  Tensor3 out(x.batch(), x.time(), hidden);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const Matrix forget = signature_gate(streams[b], g);
    LstmState s{Vec(hidden, 0.0), Vec(hidden, 0.0)};
    for (std::size_t t = 0; t < x.time(); ++t) {
      s = lstm_step(x.row(b, t), s.h, s.c, p, forget.values().subspan(t * hidden, hidden));
      std::copy(s.h.begin(), s.h.end(), out.row(b, t).begin());
    }
  }
  return out;
}

inline Tensor3 siggru_forward(const Tensor3& x, const GruParams& p, const SigGateParams& g) {
  const std::size_t hidden = p.b[kUpdate].size();
  const auto streams = signature_gate_inputs(x, g);
  Tensor3 out(x.batch(), x.time(), hidden);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const Matrix reset = signature_gate(streams[b], g);
    Vec h(hidden, 0.0);
    for (std::size_t t = 0; t < x.time(); ++t) {
      h = gru_step(x.row(b, t), h, p, reset.values().subspan(t * hidden, hidden));
      std::copy(h.begin(), h.end(), out.row(b, t).begin());
    }
  }
  return out;
}

inline Tensor3 lstm_forward(const Tensor3& x, const LstmParams& p) {
  const std::size_t hidden = p.b[kInput].size();
  Tensor3 out(x.batch(), x.time(), hidden);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    LstmState s{Vec(hidden, 0.0), Vec(hidden, 0.0)};
    for (std::size_t t = 0; t < x.time(); ++t) {
      s = lstm_step(x.row(b, t), s.h, s.c, p);
      std::copy(s.h.begin(), s.h.end(), out.row(b, t).begin());
    }
  }
  return out;
}

inline Tensor3 gru_forward(const Tensor3& x, const GruParams& p) {
  const std::size_t hidden = p.b[kUpdate].size();
  Tensor3 out(x.batch(), x.time(), hidden);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    Vec h(hidden, 0.0);
    for (std::size_t t = 0; t < x.time(); ++t) {
      h = gru_step(x.row(b, t), h, p);
      std::copy(h.begin(), h.end(), out.row(b, t).begin());
    }
  }
  return out;
}

}  // namespace sigrnn
