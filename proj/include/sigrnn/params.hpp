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

// Flat, ordered namespace of named parameter blocks. The same container
// shape holds parameters, gradients and optimizer moments.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sigrnn/errors.hpp"
#include "sigrnn/numerics.hpp"

namespace sigrnn {

struct ParamBlock {
  std::string name;
  Matrix value;
};

class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value) {
    blocks_.push_back({std::move(name), std::move(value)});
    return blocks_.size() - 1;
  }

  std::size_t size() const { return blocks_.size(); }
  ParamBlock& operator[](std::size_t i) { return blocks_[i]; }
  const ParamBlock& operator[](std::size_t i) const { return blocks_[i]; }
  Matrix& value(std::size_t i) { return blocks_[i].value; }
  const Matrix& value(std::size_t i) const { return blocks_[i].value; }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i].name == name) return i;
    }
    throw ConfigError("no parameter block named '" + name + "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.value.size();
    return n;
  }

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& b : blocks_) z.add(b.name, Matrix(b.value.rows(), b.value.cols()));
    return z;
  }

  void fill(double v) {
    for (auto& b : blocks_) {
      for (double& x : b.value.values()) x = v;
    }
  }

  bool same_shape(const ParamSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (blocks_[i].name != other[i].name || blocks_[i].value.rows() != other[i].value.rows() ||
          blocks_[i].value.cols() != other[i].value.cols()) {
        return false;
      }
    }
    return true;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(a[i].value == b[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<ParamBlock> blocks_;
};

using Gradients = ParamSet;

}  // namespace sigrnn
