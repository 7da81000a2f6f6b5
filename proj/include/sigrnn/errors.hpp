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

// Exception types shared across the library. The CLI maps them onto exit
// codes: ConfigError -> 1, DataError/IntegrityError -> 2.

#pragma once

#include <stdexcept>
#include <string>

namespace sigrnn {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint is truncated, corrupt, or incompatible with the data it is
// applied to.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A non-finite value appeared during forward/backward evaluation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sigrnn
