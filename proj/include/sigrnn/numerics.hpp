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

// Dense 64-bit containers, the batched contraction kernel and the seeded
// random stream used for initialization and shuffling.
//
// Layouts are fixed: Matrix is row-major, Tensor3 is (batch, time, feature)
// with the feature index fastest. Heavy products go through Eigen maps over
// these buffers; Eigen is used single-threaded so results are reproducible.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sigrnn/errors.hpp"

namespace sigrnn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;
using Vec = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vec values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw ShapeError("Matrix: " + std::to_string(values_.size()) +
                       " values do not fill " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  RowMap map() { return RowMap(values_.data(), rows_, cols_); }
  ConstRowMap map() const { return ConstRowMap(values_.data(), rows_, cols_); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec values_;
};

class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t time, std::size_t features, double fill = 0.0)
      : batch_(batch), time_(time), features_(features),
        values_(batch * time * features, fill) {}

  std::size_t batch() const { return batch_; }
  std::size_t time() const { return time_; }
  std::size_t features() const { return features_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t b, std::size_t t, std::size_t f) {
    return values_[(b * time_ + t) * features_ + f];
  }
  double operator()(std::size_t b, std::size_t t, std::size_t f) const {
    return values_[(b * time_ + t) * features_ + f];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Row (b, t) as a contiguous span of `features` values.
  std::span<double> row(std::size_t b, std::size_t t) {
    return {values_.data() + (b * time_ + t) * features_, features_};
  }
  std::span<const double> row(std::size_t b, std::size_t t) const {
    return {values_.data() + (b * time_ + t) * features_, features_};
  }

  // View as a (batch*time) x features row-major matrix.
  RowMap flat() { return RowMap(values_.data(), batch_ * time_, features_); }
  ConstRowMap flat() const { return ConstRowMap(values_.data(), batch_ * time_, features_); }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t batch_ = 0;
  std::size_t time_ = 0;
  std::size_t features_ = 0;
  Vec values_;
};

inline std::string shape_str(const Matrix& m) {
  return "Matrix[" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "]";
}

inline std::string shape_str(const Tensor3& x) {
  return "Tensor3[" + std::to_string(x.batch()) + "," + std::to_string(x.time()) + "," +
         std::to_string(x.features()) + "]";
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Seeded stream over std::mt19937_64, whose output sequence is fixed by the
// C++ standard. Distributions are derived here from raw 64-bit words rather
// than through <random> distributions, which are implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform integer in [0, n) by rejection, unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::swap(p[i - 1], p[static_cast<std::size_t>(below(i))]);
    }
    return p;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Y[b,t,j] = sum_i X[b,t,i] * K[i,j]
inline Tensor3 batched_linear(const Tensor3& x, const Matrix& kernel) {
  if (kernel.rows() != x.features()) {
    throw ShapeError("batched_linear: " + shape_str(x) + " feature axis does not match " +
                     shape_str(kernel) + " rows");
  }
  Tensor3 y(x.batch(), x.time(), kernel.cols());
  if (y.size() > 0 && x.features() > 0) y.flat().noalias() = x.flat() * kernel.map();
  return y;
}

// Same contraction with the kernel stored transposed (J x I), the layout of
// gate weight matrices.
inline Tensor3 batched_linear_transposed(const Tensor3& x, const Matrix& kernel_t) {
  if (kernel_t.cols() != x.features()) {
    throw ShapeError("batched_linear_transposed: " + shape_str(x) +
                     " feature axis does not match " + shape_str(kernel_t) + " cols");
  }
  Tensor3 y(x.batch(), x.time(), kernel_t.rows());
  if (y.size() > 0 && x.features() > 0) {
    y.flat().noalias() = x.flat() * kernel_t.map().transpose();
  }
  return y;
}

inline Vec matvec_affine(const Matrix& w, std::span<const double> x, std::span<const double> b) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw ShapeError("matvec_affine: " + shape_str(w) + " with x[" + std::to_string(x.size()) +
                     "], b[" + std::to_string(b.size()) + "]");
  }
  Vec out(b.begin(), b.end());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
    out[r] += acc;
  }
  return out;
}

inline Matrix glorot_uniform(RngStream& rng, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("glorot_uniform: zero dimension " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

// Square matrix with orthonormal rows: Q from the QR factorization of a
// Gaussian draw, with column signs fixed by diag(R).
inline Matrix orthogonal(RngStream& rng, std::size_t n) {
  if (n == 0) throw ShapeError("orthogonal: zero dimension");
  Eigen::MatrixXd a(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) a(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t c = 0; c < n; ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  Matrix m(n, n);
  m.map() = q;
  return m;
}

}  // namespace sigrnn
