// Copyright 2026 The kpo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "kpo/dynamics.hpp"
#include "kpo/errors.hpp"
#include "kpo/filter.hpp"
#include "kpo/fock_core.hpp"
#include "kpo/gaussian_po.hpp"
#include "kpo/harness/io.hpp"
#include "kpo/harness/optimize.hpp"
#include "kpo/harness/pipelines.hpp"
#include "kpo/harness/reproduce.hpp"
#include "kpo/harness/sweep.hpp"
#include "kpo/nonclassicality.hpp"
#include "kpo/pulse_io.hpp"
