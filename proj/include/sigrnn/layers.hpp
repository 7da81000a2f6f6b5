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

// Batched recurrent layers: the cell equations of `cells.hpp` evaluated for
// a whole batch per time step, with cached activations and an explicit
// reverse pass (backpropagation through time, through the signature stream
// and the input projection of signature-gated layers).

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sigrnn/cells.hpp"
#include "sigrnn/numerics.hpp"
#include "sigrnn/params.hpp"
#include "sigrnn/signature.hpp"

namespace sigrnn {

namespace detail {

using StepMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStepMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Rows (b, t) for all b of a (batch*time) x width row-major buffer.
inline StepMap step_rows(double* data, std::size_t batch, std::size_t time, std::size_t width,
                         std::size_t t) {
  return StepMap(data + t * width, static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(width),
                 Eigen::OuterStride<>(static_cast<Eigen::Index>(time * width)));
}
inline ConstStepMap step_rows(const double* data, std::size_t batch, std::size_t time,
                              std::size_t width, std::size_t t) {
  return ConstStepMap(data + t * width, static_cast<Eigen::Index>(batch),
                      static_cast<Eigen::Index>(width),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(time * width)));
}

template <typename M>
void apply_sigmoid(M&& m) {
  m = m.unaryExpr([](double v) { return sigmoid(v); });
}
template <typename M>
void apply_tanh(M&& m) {
  m = m.unaryExpr([](double v) { return std::tanh(v); });
}

inline Eigen::Map<const Eigen::RowVectorXd> bias_row(const Matrix& b) {
  return Eigen::Map<const Eigen::RowVectorXd>(b.values().data(), static_cast<Eigen::Index>(b.size()));
}

}  // namespace detail

class RecurrentLayer {
 public:
  struct Cache {
    Tensor3 input;
    Tensor3 output;
    // Per-step batch activations. LSTM: i, f, c~, o, c, tanh(c).
    // GRU: z, r, n, r*h_prev.
    std::vector<std::array<RowMat, 6>> steps;
    Tensor3 projected;      // sig layers: B x T x p
    Tensor3 signature;      // raw prefix signatures, B x T x S
    Tensor3 signature_hat;  // time-normalized
  };

  RecurrentLayer(LayerConfig cfg, std::size_t input_dim, const std::string& prefix,
                 ParamSet& params, RngStream* rng)
      : cfg_(cfg), input_dim_(input_dim) {
    cfg_.validate();
    if (input_dim_ == 0) throw ConfigError("layer input dimension must be >= 1");
    const std::size_t h = cfg_.hidden;
    const bool lstm = is_lstm_kind(cfg_.kind);
    static constexpr std::array<const char*, 4> kLstmNames{"i", "f", "c", "o"};
    static constexpr std::array<const char*, 3> kGruNames{"z", "r", "h"};
    gate_count_ = lstm ? 4 : 3;
    replaced_gate_ = lstm ? std::size_t{kForget} : std::size_t{kReset};
    for (std::size_t g = 0; g < gate_count_; ++g) {
      if (signature_gated() && g == replaced_gate_) continue;
      const std::string suffix = lstm ? kLstmNames[g] : kGruNames[g];
      Matrix bias(1, h, lstm && g == kForget ? 1.0 : 0.0);
      Matrix u = rng ? orthogonal(*rng, h) : Matrix(h, h);
      Matrix w = rng ? glorot_uniform(*rng, h, input_dim_) : Matrix(h, input_dim_);
      b_[g] = params.add(prefix + "b_" + suffix, std::move(bias));
      u_[g] = params.add(prefix + "U_" + suffix, std::move(u));
      w_[g] = params.add(prefix + "W_" + suffix, std::move(w));
    }
    if (signature_gated()) {
      const SigSpec spec = cfg_.sig_spec();
      b_gate_ = params.add(prefix + "b_gate", Matrix(1, h, lstm ? 1.0 : 0.0));
      w_gate_ = params.add(prefix + "W_gate", rng ? glorot_uniform(*rng, h, spec.dim())
                                                  : Matrix(h, spec.dim()));
      w_sig_ = params.add(prefix + "W_sig", rng ? glorot_uniform(*rng, cfg_.proj_dim, input_dim_)
                                                : Matrix(cfg_.proj_dim, input_dim_));
    }
  }

  const LayerConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return input_dim_; }
  bool signature_gated() const { return is_signature_kind(cfg_.kind); }

  Tensor3 forward(const ParamSet& params, const Tensor3& x, Cache* cache = nullptr) const {
    if (x.features() != input_dim_) {
      throw ShapeError("layer forward: " + shape_str(x) + " does not match input width " +
                       std::to_string(input_dim_));
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.input = x;
    if (is_lstm_kind(cfg_.kind)) {
      forward_lstm(params, c);
    } else {
      forward_gru(params, c);
    }
    return c.output;
  }

  // Accumulates parameter gradients into `grads` and returns dL/dx.
  Tensor3 backward(const ParamSet& params, const Cache& c, const Tensor3& dy, ParamSet& grads) const {
    return is_lstm_kind(cfg_.kind) ? backward_lstm(params, c, dy, grads)
                                   : backward_gru(params, c, dy, grads);
  }

 private:
  // Input-side pre-activations x W_g^T + b_g for every (b, t).
  RowMat input_preactivation(const ParamSet& params, const Tensor3& x, std::size_t g) const {
    RowMat a = x.flat() * params.value(*w_[g]).map().transpose();
    a.rowwise() += detail::bias_row(params.value(*b_[g]));
    return a;
  }

  // Signature branch: fills the cached projection and streams and returns
  // the gate pre-activations W_gate S^_t + b_gate for every (b, t).
  RowMat signature_preactivation(const ParamSet& params, Cache& c) const {
    const SigSpec spec = cfg_.sig_spec();
    const Tensor3& x = c.input;
    const std::size_t batch = x.batch(), time = x.time(), dim = spec.dim();
    c.projected = batched_linear_transposed(x, params.value(*w_sig_));
    c.signature = Tensor3(batch, time, dim);
    const std::size_t in_block = time * spec.path_dim, out_block = time * dim;
    for (std::size_t b = 0; b < batch; ++b) {
      stream_signature_into(c.projected.values().subspan(b * in_block, in_block), time, spec,
                            c.signature.values().subspan(b * out_block, out_block));
    }
    c.signature_hat = c.signature;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < time; ++t) {
        const double inv = 1.0 / static_cast<double>(t + 1);
        for (double& v : c.signature_hat.row(b, t)) v *= inv;
      }
    }
    RowMat a = c.signature_hat.flat() * params.value(*w_gate_).map().transpose();
    a.rowwise() += detail::bias_row(params.value(*b_gate_));
    return a;
  }

  // Reverse of signature_preactivation given dL/d(pre-activation).
  void signature_backward(const ParamSet& params, const Cache& c, const RowMat& d_pre,
                          ParamSet& grads, Tensor3& dx) const {
    const SigSpec spec = cfg_.sig_spec();
    const std::size_t batch = c.input.batch(), time = c.input.time(), dim = spec.dim();
    grads.value(*b_gate_).map() += d_pre.colwise().sum();
    grads.value(*w_gate_).map().noalias() += d_pre.transpose() * c.signature_hat.flat();
    RowMat d_sig = d_pre * params.value(*w_gate_).map();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < time; ++t) {
        d_sig.row(static_cast<Eigen::Index>(b * time + t)) /= static_cast<double>(t + 1);
      }
    }
    Tensor3 d_proj(batch, time, spec.path_dim);
    const std::size_t in_block = time * spec.path_dim, out_block = time * dim;
    for (std::size_t b = 0; b < batch; ++b) {
      stream_signature_backward(
          c.projected.values().subspan(b * in_block, in_block),
          c.signature.values().subspan(b * out_block, out_block), time, spec,
          std::span<double>(d_sig.data() + b * out_block, out_block),
          d_proj.values().subspan(b * in_block, in_block));
    }
    grads.value(*w_sig_).map().noalias() += d_proj.flat().transpose() * c.input.flat();
    dx.flat().noalias() += d_proj.flat() * params.value(*w_sig_).map();
  }

  void forward_lstm(const ParamSet& params, Cache& c) const {
    const Tensor3& x = c.input;
    const std::size_t batch = x.batch(), time = x.time(), h = cfg_.hidden;
    std::array<RowMat, 4> pre;
    for (std::size_t g = 0; g < 4; ++g) {
      pre[g] = (signature_gated() && g == kForget) ? signature_preactivation(params, c)
                                                  : input_preactivation(params, x, g);
    }
    c.output = Tensor3(batch, time, h);
    c.steps.assign(time, {});
    RowMat c_prev = RowMat::Zero(batch, h);
    for (std::size_t t = 0; t < time; ++t) {
      auto& s = c.steps[t];
      for (std::size_t g = 0; g < 4; ++g) {
        s[g] = detail::step_rows(pre[g].data(), batch, time, h, t);
        const bool recurrent = !(signature_gated() && g == kForget);
        if (t > 0 && recurrent) {
          s[g].noalias() += detail::step_rows(c.output.values().data(), batch, time, h, t - 1) *
                            params.value(*u_[g]).map().transpose();
        }
        if (g == kCell) {
          detail::apply_tanh(s[g]);
        } else {
          detail::apply_sigmoid(s[g]);
        }
      }
      s[4] = s[kForget].cwiseProduct(c_prev) + s[kInput].cwiseProduct(s[kCell]);
      s[5] = s[4];
      detail::apply_tanh(s[5]);
      detail::step_rows(c.output.values().data(), batch, time, h, t) = s[kOutput].cwiseProduct(s[5]);
      c_prev = s[4];
    }
  }

  Tensor3 backward_lstm(const ParamSet& params, const Cache& c, const Tensor3& dy,
                        ParamSet& grads) const {
    const Tensor3& x = c.input;
    const std::size_t batch = x.batch(), time = x.time(), h = cfg_.hidden;
    std::array<RowMat, 4> d_pre;
    for (auto& d : d_pre) d = RowMat::Zero(static_cast<Eigen::Index>(batch * time), h);
    RowMat dh_next = RowMat::Zero(batch, h), dc_next = RowMat::Zero(batch, h);
    const RowMat zeros = RowMat::Zero(batch, h);
    for (std::size_t t = time; t-- > 0;) {
      const auto& s = c.steps[t];
      const RowMat& c_prev = t > 0 ? c.steps[t - 1][4] : zeros;
      const RowMat dh = detail::step_rows(dy.values().data(), batch, time, h, t) + dh_next;
      const RowMat d_o = dh.cwiseProduct(s[5]);
      const RowMat dc = dc_next + dh.cwiseProduct(s[kOutput]).cwiseProduct(
                                      (1.0 - s[5].array().square()).matrix());
      auto da_i = detail::step_rows(d_pre[kInput].data(), batch, time, h, t);
      auto da_f = detail::step_rows(d_pre[kForget].data(), batch, time, h, t);
      auto da_c = detail::step_rows(d_pre[kCell].data(), batch, time, h, t);
      auto da_o = detail::step_rows(d_pre[kOutput].data(), batch, time, h, t);
      da_i = (dc.array() * s[kCell].array() * s[kInput].array() * (1.0 - s[kInput].array())).matrix();
      da_f = (dc.array() * c_prev.array() * s[kForget].array() * (1.0 - s[kForget].array())).matrix();
      da_c = (dc.array() * s[kInput].array() * (1.0 - s[kCell].array().square())).matrix();
      da_o = (d_o.array() * s[kOutput].array() * (1.0 - s[kOutput].array())).matrix();
      dc_next = dc.cwiseProduct(s[kForget]);
      dh_next.setZero();
      if (t > 0) {
        const auto h_prev = detail::step_rows(c.output.values().data(), batch, time, h, t - 1);
        for (std::size_t g = 0; g < 4; ++g) {
          if (signature_gated() && g == kForget) continue;
          const auto da = detail::step_rows(d_pre[g].data(), batch, time, h, t);
          grads.value(*u_[g]).map().noalias() += da.transpose() * h_prev;
          dh_next.noalias() += da * params.value(*u_[g]).map();
        }
      }
    }
    Tensor3 dx(batch, time, input_dim_);
    for (std::size_t g = 0; g < 4; ++g) {
      if (signature_gated() && g == kForget) {
        signature_backward(params, c, d_pre[g], grads, dx);
        continue;
      }
      accumulate_input_grads(params, x, d_pre[g], g, grads, dx);
    }
    return dx;
  }

  void forward_gru(const ParamSet& params, Cache& c) const {
    const Tensor3& x = c.input;
    const std::size_t batch = x.batch(), time = x.time(), h = cfg_.hidden;
    std::array<RowMat, 3> pre;
    for (std::size_t g = 0; g < 3; ++g) {
      pre[g] = (signature_gated() && g == kReset) ? signature_preactivation(params, c)
                                                 : input_preactivation(params, x, g);
    }
    c.output = Tensor3(batch, time, h);
    c.steps.assign(time, {});
    const RowMat zeros = RowMat::Zero(batch, h);
    for (std::size_t t = 0; t < time; ++t) {
      auto& s = c.steps[t];
      const RowMat h_prev = t > 0 ? RowMat(detail::step_rows(c.output.values().data(), batch, time, h, t - 1))
                                  : zeros;
      s[kUpdate] = detail::step_rows(pre[kUpdate].data(), batch, time, h, t);
      s[kReset] = detail::step_rows(pre[kReset].data(), batch, time, h, t);
      s[kCandidate] = detail::step_rows(pre[kCandidate].data(), batch, time, h, t);
      if (t > 0) {
        s[kUpdate].noalias() += h_prev * params.value(*u_[kUpdate]).map().transpose();
        if (!signature_gated()) {
          s[kReset].noalias() += h_prev * params.value(*u_[kReset]).map().transpose();
        }
      }
      detail::apply_sigmoid(s[kUpdate]);
      detail::apply_sigmoid(s[kReset]);
      s[3] = s[kReset].cwiseProduct(h_prev);
      if (t > 0) s[kCandidate].noalias() += s[3] * params.value(*u_[kCandidate]).map().transpose();
      detail::apply_tanh(s[kCandidate]);
      detail::step_rows(c.output.values().data(), batch, time, h, t) =
          (1.0 - s[kUpdate].array()) * h_prev.array() + s[kUpdate].array() * s[kCandidate].array();
    }
  }

  Tensor3 backward_gru(const ParamSet& params, const Cache& c, const Tensor3& dy,
                       ParamSet& grads) const {
    const Tensor3& x = c.input;
    const std::size_t batch = x.batch(), time = x.time(), h = cfg_.hidden;
    std::array<RowMat, 3> d_pre;
    for (auto& d : d_pre) d = RowMat::Zero(static_cast<Eigen::Index>(batch * time), h);
    RowMat dh_next = RowMat::Zero(batch, h);
    const RowMat zeros = RowMat::Zero(batch, h);
    for (std::size_t t = time; t-- > 0;) {
      const auto& s = c.steps[t];
      const RowMat h_prev = t > 0 ? RowMat(detail::step_rows(c.output.values().data(), batch, time, h, t - 1))
                                  : zeros;
      const RowMat dh = detail::step_rows(dy.values().data(), batch, time, h, t) + dh_next;
      auto da_z = detail::step_rows(d_pre[kUpdate].data(), batch, time, h, t);
      auto da_r = detail::step_rows(d_pre[kReset].data(), batch, time, h, t);
      auto da_n = detail::step_rows(d_pre[kCandidate].data(), batch, time, h, t);
      da_n = (dh.array() * s[kUpdate].array() * (1.0 - s[kCandidate].array().square())).matrix();
      da_z = (dh.array() * (s[kCandidate].array() - h_prev.array()) * s[kUpdate].array() *
              (1.0 - s[kUpdate].array()))
                 .matrix();
      RowMat dh_prev = (dh.array() * (1.0 - s[kUpdate].array())).matrix();
      const RowMat d_rh = da_n * params.value(*u_[kCandidate]).map();
      da_r = (d_rh.array() * h_prev.array() * s[kReset].array() * (1.0 - s[kReset].array())).matrix();
      dh_prev.array() += d_rh.array() * s[kReset].array();
      if (t > 0) {
        grads.value(*u_[kCandidate]).map().noalias() += da_n.transpose() * s[3];
        grads.value(*u_[kUpdate]).map().noalias() += da_z.transpose() * h_prev;
        dh_prev.noalias() += da_z * params.value(*u_[kUpdate]).map();
        if (!signature_gated()) {
          grads.value(*u_[kReset]).map().noalias() += da_r.transpose() * h_prev;
          dh_prev.noalias() += da_r * params.value(*u_[kReset]).map();
        }
      }
      dh_next = dh_prev;
    }
    Tensor3 dx(batch, time, input_dim_);
    for (std::size_t g = 0; g < 3; ++g) {
      if (signature_gated() && g == kReset) {
        signature_backward(params, c, d_pre[g], grads, dx);
        continue;
      }
      accumulate_input_grads(params, x, d_pre[g], g, grads, dx);
    }
    return dx;
  }

  void accumulate_input_grads(const ParamSet& params, const Tensor3& x, const RowMat& d_pre,
                              std::size_t g, ParamSet& grads, Tensor3& dx) const {
    grads.value(*b_[g]).map() += d_pre.colwise().sum();
    grads.value(*w_[g]).map().noalias() += d_pre.transpose() * x.flat();
    dx.flat().noalias() += d_pre * params.value(*w_[g]).map();
  }

  LayerConfig cfg_;
  std::size_t input_dim_;
  std::size_t gate_count_ = 0;
  std::size_t replaced_gate_ = 0;
  std::array<std::optional<std::size_t>, 4> w_, u_, b_;
  std::optional<std::size_t> w_gate_, b_gate_, w_sig_;
};

}  // namespace sigrnn
