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

#pragma once

#include "sigrnn/cells.hpp"
#include "sigrnn/data.hpp"
#include "sigrnn/errors.hpp"
#include "sigrnn/layers.hpp"
#include "sigrnn/model.hpp"
#include "sigrnn/numerics.hpp"
#include "sigrnn/params.hpp"
#include "sigrnn/signature.hpp"
#include "sigrnn/training.hpp"
