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

#pragma once

#include <stdexcept>
#include <string>

namespace kpo {

// Root of every error the library throws. Two branches matter to callers:
// ConfigError (bad input, CLI exit code 2) and NumericalError (the
// computation itself failed, CLI exit code 3).
class KpoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public KpoError {
 public:
  using KpoError::KpoError;
};

class NumericalError : public KpoError {
 public:
  using KpoError::KpoError;
};

class DimensionMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IndexError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class GridError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ThresholdError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BelowThreshold : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NonzeroMeanError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidState : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StiffnessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateSteadyState : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SteadyStateNotReached : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OptimizerStall : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace kpo
