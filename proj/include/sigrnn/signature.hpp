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

// Truncated path signatures of piecewise-linear paths.
//
// A signature of depth M over an N-dimensional path is stored flat and
// level-major without the constant level-0 term: level k occupies N^k
// entries starting at sum_{j<k} N^j, and inside a level the multi-index
// (i_1, ..., i_k) sits at offset sum_j i_j * N^(k-j) (0-based).
//
// Prefix signatures are streamed with Chen's identity: each new sample
// multiplies the running signature by the tensor exponential of the latest
// increment. `oracle_signature` recomputes signatures by direct iterated
// integration and shares no code with the streaming path.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sigrnn/errors.hpp"
#include "sigrnn/numerics.hpp"

namespace sigrnn {

inline constexpr std::size_t kMaxSignatureDepth = 4;

inline std::size_t int_pow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

inline std::size_t sig_dim(std::size_t n, std::size_t m) {
  std::size_t total = 0;
  for (std::size_t k = 1; k <= m; ++k) total += int_pow(n, k);
  return total;
}

struct SigSpec {
  std::size_t path_dim = 5;
  std::size_t depth = 2;

  SigSpec() = default;
  SigSpec(std::size_t n, std::size_t m) : path_dim(n), depth(m) { validate(); }

  void validate() const {
    if (path_dim < 1) throw ConfigError("SigSpec: path dimension must be >= 1");
    if (depth < 1 || depth > kMaxSignatureDepth) {
      throw ConfigError("SigSpec: depth " + std::to_string(depth) + " outside supported range 1.." +
                        std::to_string(kMaxSignatureDepth));
    }
  }

  std::size_t dim() const { return sig_dim(path_dim, depth); }
  std::size_t level_size(std::size_t k) const { return int_pow(path_dim, k); }
  // Offset of level k (1-based) in the flat layout.
  std::size_t level_offset(std::size_t k) const { return sig_dim(path_dim, k - 1); }

  friend bool operator==(const SigSpec&, const SigSpec&) = default;
};

class SignatureVector {
 public:
  SignatureVector() = default;
  explicit SignatureVector(SigSpec spec) : spec_(spec), values_(spec.dim(), 0.0) {}
  SignatureVector(SigSpec spec, Vec values) : spec_(spec), values_(std::move(values)) {
    if (values_.size() != spec_.dim()) {
      throw ShapeError("SignatureVector: expected " + std::to_string(spec_.dim()) +
                       " values, got " + std::to_string(values_.size()));
    }
  }

  const SigSpec& spec() const { return spec_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> level(std::size_t k) {
    return {values_.data() + spec_.level_offset(k), spec_.level_size(k)};
  }
  std::span<const double> level(std::size_t k) const {
    return {values_.data() + spec_.level_offset(k), spec_.level_size(k)};
  }

 private:
  SigSpec spec_;
  Vec values_;
};

// Per-sample prefix signatures: row t holds the signature of samples 0..t.
struct SignatureStream {
  SigSpec spec;
  Matrix steps;  // T x sig_dim

  std::size_t length() const { return steps.rows(); }
  SignatureVector at(std::size_t t) const {
    const auto row = steps.values().subspan(t * steps.cols(), steps.cols());
    return SignatureVector(spec, Vec(row.begin(), row.end()));
  }
};

// Linear map from input features to the signature path; no bias.
struct ProjectionParams {
  Matrix w_sig;  // p x d
};

inline Tensor3 project_input(const Tensor3& x, const ProjectionParams& p) {
  return batched_linear_transposed(x, p.w_sig);
}

// Level k of the tensor exponential of a single linear segment:
// delta^{(x)k} / k!.
inline SignatureVector segment_signature(std::span<const double> delta, const SigSpec& spec) {
  if (delta.size() != spec.path_dim) {
    throw ShapeError("segment_signature: increment has " + std::to_string(delta.size()) +
                     " entries, spec path dimension is " + std::to_string(spec.path_dim));
  }
  SignatureVector out(spec);
  auto first = out.level(1);
  std::copy(delta.begin(), delta.end(), first.begin());
  for (std::size_t k = 2; k <= spec.depth; ++k) {
    const auto prev = out.level(k - 1);
    auto cur = out.level(k);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (std::size_t n = 0; n < spec.path_dim; ++n) {
        cur[i * spec.path_dim + n] = prev[i] * delta[n] * inv_k;
      }
    }
  }
  return out;
}

// Truncated tensor-algebra product with implicit unit level 0.
inline SignatureVector chen_concat(const SignatureVector& a, const SignatureVector& b) {
  if (!(a.spec() == b.spec())) throw ShapeError("chen_concat: signature specs differ");
  const SigSpec& spec = a.spec();
  SignatureVector out(spec);
  for (std::size_t k = 1; k <= spec.depth; ++k) {
    auto res = out.level(k);
    const auto ak = a.level(k);
    const auto bk = b.level(k);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] = ak[i] + bk[i];
    for (std::size_t left = 1; left < k; ++left) {
      const auto al = a.level(left);
      const auto br = b.level(k - left);
      const std::size_t right_size = br.size();
      for (std::size_t i = 0; i < al.size(); ++i) {
        const double ai = al[i];
        double* dst = res.data() + i * right_size;
        for (std::size_t j = 0; j < right_size; ++j) dst[j] += ai * br[j];
      }
    }
  }
  return out;
}

namespace detail {

// sig <- sig (x) exp(delta), in place, via Horner's scheme per level.
// `scratch` must hold at least 2 N^M doubles.
inline void chen_append_segment(std::span<double> sig, std::span<const double> delta,
                                const SigSpec& spec, std::span<double> scratch) {
  const std::size_t n = spec.path_dim;
  double* v = scratch.data();
  double* w = scratch.data() + spec.level_size(spec.depth);
  for (std::size_t k = spec.depth; k >= 1; --k) {
    // v holds a level-`a` tensor; start from level 1 = delta / k.
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < n; ++i) v[i] = delta[i] * inv_k;
    std::size_t v_size = n;
    for (std::size_t a = 1; a < k; ++a) {
      const double* sa = sig.data() + spec.level_offset(a);
      const double scale = 1.0 / static_cast<double>(k - a);
      for (std::size_t i = 0; i < v_size; ++i) {
        const double base = (sa[i] + v[i]) * scale;
        double* dst = w + i * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] = base * delta[j];
      }
      v_size *= n;
      std::swap(v, w);
    }
    double* sk = sig.data() + spec.level_offset(k);
    for (std::size_t i = 0; i < v_size; ++i) sk[i] += v[i];
  }
}

inline std::size_t append_scratch_size(const SigSpec& spec) {
  return 2 * spec.level_size(spec.depth);
}

}  // namespace detail

// Prefix signatures of one path stored as a T x N row-major block, written
// into `out` (T x sig_dim). Row 0 is zero.
inline void stream_signature_into(std::span<const double> path, std::size_t steps,
                                  const SigSpec& spec, std::span<double> out) {
  const std::size_t n = spec.path_dim;
  const std::size_t dim = spec.dim();
  Vec scratch(detail::append_scratch_size(spec));
  Vec delta(n);
  std::fill(out.begin(), out.begin() + dim, 0.0);
  for (std::size_t t = 1; t < steps; ++t) {
    auto cur = out.subspan(t * dim, dim);
    std::copy_n(out.begin() + (t - 1) * dim, dim, cur.begin());
    for (std::size_t i = 0; i < n; ++i) delta[i] = path[t * n + i] - path[(t - 1) * n + i];
    detail::chen_append_segment(cur, delta, spec, scratch);
  }
}

inline std::vector<SignatureStream> stream_signature(const Tensor3& path, const SigSpec& spec) {
  spec.validate();
  if (path.time() == 0) throw ShapeError("stream_signature: path has no samples");
  if (path.features() != spec.path_dim) {
    throw ShapeError("stream_signature: " + shape_str(path) + " does not match path dimension " +
                     std::to_string(spec.path_dim));
  }
  std::vector<SignatureStream> streams;
  streams.reserve(path.batch());
  const std::size_t block = path.time() * path.features();
  for (std::size_t b = 0; b < path.batch(); ++b) {
    SignatureStream s{spec, Matrix(path.time(), spec.dim())};
    stream_signature_into(path.values().subspan(b * block, block), path.time(), spec,
                          s.steps.values());
    streams.push_back(std::move(s));
  }
  return streams;
}

// Divides step t (1-based) by t.
inline SignatureStream time_normalize(const SignatureStream& stream) {
  SignatureStream out = stream;
  const std::size_t dim = stream.steps.cols();
  auto v = out.steps.values();
  for (std::size_t t = 0; t < stream.length(); ++t) {
    const double inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t i = 0; i < dim; ++i) v[t * dim + i] *= inv;
  }
  return out;
}

// Reverse mode through stream_signature_into. `grad_steps` holds dL/dS_t for
// every step t (T x sig_dim, consumed as scratch); the gradient with respect
// to the path samples is accumulated into `grad_path` (T x N).
inline void stream_signature_backward(std::span<const double> path,
                                      std::span<const double> steps_values, std::size_t steps,
                                      const SigSpec& spec, std::span<double> grad_steps,
                                      std::span<double> grad_path) {
  const std::size_t n = spec.path_dim;
  const std::size_t depth = spec.depth;
  const std::size_t dim = spec.dim();
  // Tensor powers of the increment (unscaled) and their gradients, level-major.
  Vec powers(dim), grad_powers(dim), delta(n), grad_delta(n);
  for (std::size_t t = steps - 1; t >= 1; --t) {
    for (std::size_t i = 0; i < n; ++i) delta[i] = path[t * n + i] - path[(t - 1) * n + i];
    std::copy(delta.begin(), delta.end(), powers.begin());
    for (std::size_t k = 2; k <= depth; ++k) {
      const double* prev = powers.data() + spec.level_offset(k - 1);
      double* cur = powers.data() + spec.level_offset(k);
      const std::size_t prev_size = spec.level_size(k - 1);
      for (std::size_t i = 0; i < prev_size; ++i) {
        for (std::size_t j = 0; j < n; ++j) cur[i * n + j] = prev[i] * delta[j];
      }
    }
    std::fill(grad_powers.begin(), grad_powers.end(), 0.0);

    double* g = grad_steps.data() + t * dim;
    const double* prev_sig = steps_values.data() + (t - 1) * dim;
    double* g_prev = grad_steps.data() + (t - 1) * dim;

    // S_t^(k) = sum_{a+j=k} S_{t-1}^(a) (x) delta^(x)j / j!, with S^(0) = 1.
    double inv_fact = 1.0;
    for (std::size_t j = 1; j <= depth; ++j) {
      inv_fact /= static_cast<double>(j);
      const std::size_t j_size = spec.level_size(j);
      const double* pj = powers.data() + spec.level_offset(j);
      double* gpj = grad_powers.data() + spec.level_offset(j);
      // a = 0 term.
      const double* gj = g + spec.level_offset(j);
      for (std::size_t q = 0; q < j_size; ++q) gpj[q] += gj[q] * inv_fact;
      for (std::size_t a = 1; a + j <= depth; ++a) {
        const std::size_t a_size = spec.level_size(a);
        ConstRowMap gk(g + spec.level_offset(a + j), a_size, j_size);
        Eigen::Map<const Eigen::VectorXd> pvec(pj, j_size);
        Eigen::Map<const Eigen::VectorXd> svec(prev_sig + spec.level_offset(a), a_size);
        Eigen::Map<Eigen::VectorXd> gprev(g_prev + spec.level_offset(a), a_size);
        Eigen::Map<Eigen::VectorXd> gpow(gpj, j_size);
        gprev.noalias() += inv_fact * (gk * pvec);
        gpow.noalias() += inv_fact * (gk.transpose() * svec);
      }
    }
    // j = 0 term passes the gradient straight through.
    for (std::size_t i = 0; i < dim; ++i) g_prev[i] += g[i];

    // Back through powers: P_k = P_{k-1} (x) delta.
    std::fill(grad_delta.begin(), grad_delta.end(), 0.0);
    for (std::size_t k = depth; k >= 2; --k) {
      const std::size_t prev_size = spec.level_size(k - 1);
      const double* prev = powers.data() + spec.level_offset(k - 1);
      double* gprev = grad_powers.data() + spec.level_offset(k - 1);
      const double* gcur = grad_powers.data() + spec.level_offset(k);
      for (std::size_t i = 0; i < prev_size; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          acc += gcur[i * n + j] * delta[j];
          grad_delta[j] += gcur[i * n + j] * prev[i];
        }
        gprev[i] += acc;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double gd = grad_delta[i] + grad_powers[i];
      grad_path[t * n + i] += gd;
      grad_path[(t - 1) * n + i] -= gd;
    }
  }
}

enum class OracleRule {
  // Iterated left-endpoint Riemann sums; converges as subdivisions grow.
  left_riemann,
  // Each prefix integral is carried as a polynomial in the local segment
  // parameter and integrated exactly; exact for piecewise-linear paths.
  polynomial,
};

// Signature of the piecewise-linear interpolant of `samples` (T x N) by
// direct evaluation of the iterated-integral recursion
//   S^{i_1..i_k}(t) = int_0^t S^{i_1..i_{k-1}}(s) dX^{i_k}(s).
inline SignatureVector oracle_signature(const Matrix& samples, const SigSpec& spec,
                                        std::size_t subdivisions,
                                        OracleRule rule = OracleRule::left_riemann) {
  spec.validate();
  if (subdivisions < 1) throw ConfigError("oracle_signature: subdivisions must be >= 1");
  if (samples.cols() != spec.path_dim) {
    throw ShapeError("oracle_signature: " + shape_str(samples) + " does not match path dimension " +
                     std::to_string(spec.path_dim));
  }
  const std::size_t n = spec.path_dim;
  const std::size_t depth = spec.depth;
  SignatureVector sig(spec);
  auto values = sig.values();
  Vec d(n);
  // Polynomial coefficients of each entry along the current piece, by level:
  // entry of level k is a degree-k polynomial (k+1 coefficients).
  std::vector<Vec> poly(depth + 1);
  for (std::size_t seg = 1; seg < samples.rows(); ++seg) {
    for (std::size_t piece = 0; piece < subdivisions; ++piece) {
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = (samples(seg, i) - samples(seg - 1, i)) / static_cast<double>(subdivisions);
      }
      if (rule == OracleRule::left_riemann) {
        for (std::size_t k = depth; k >= 1; --k) {
          double* sk = values.data() + spec.level_offset(k);
          if (k == 1) {
            for (std::size_t i = 0; i < n; ++i) sk[i] += d[i];
            continue;
          }
          const double* lower = values.data() + spec.level_offset(k - 1);
          const std::size_t lower_size = spec.level_size(k - 1);
          for (std::size_t i = 0; i < lower_size; ++i) {
            for (std::size_t m = 0; m < n; ++m) sk[i * n + m] += lower[i] * d[m];
          }
        }
        continue;
      }
      // Exact integration: level 0 is the constant polynomial 1.
      poly[0] = {1.0};
      for (std::size_t k = 1; k <= depth; ++k) {
        const std::size_t size = spec.level_size(k);
        const std::size_t deg = k;
        poly[k].assign(size * (deg + 1), 0.0);
        const double* start = values.data() + spec.level_offset(k);
        const std::size_t lower_size = k == 1 ? 1 : spec.level_size(k - 1);
        for (std::size_t i = 0; i < lower_size; ++i) {
          const double* lower = poly[k - 1].data() + i * deg;  // deg coefficients
          for (std::size_t m = 0; m < n; ++m) {
            const std::size_t idx = i * n + m;
            double* coeff = poly[k].data() + idx * (deg + 1);
            coeff[0] = start[idx];
            for (std::size_t c = 0; c < deg; ++c) {
              coeff[c + 1] = d[m] * lower[c] / static_cast<double>(c + 1);
            }
          }
        }
      }
      for (std::size_t k = 1; k <= depth; ++k) {
        double* sk = values.data() + spec.level_offset(k);
        const std::size_t size = spec.level_size(k);
        for (std::size_t idx = 0; idx < size; ++idx) {
          double acc = 0.0;
          for (std::size_t c = 0; c <= k; ++c) acc += poly[k][idx * (k + 1) + c];
          sk[idx] = acc;
        }
      }
    }
  }
  return sig;
}

// Flat signature of a whole path via the streaming route.
inline SignatureVector path_signature(const Matrix& samples, const SigSpec& spec) {
  Tensor3 path(1, samples.rows(), samples.cols());
  std::copy(samples.values().begin(), samples.values().end(), path.values().begin());
  const auto streams = stream_signature(path, spec);
  return streams.front().at(samples.rows() - 1);
}

}  // namespace sigrnn
