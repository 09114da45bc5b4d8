// Copyright 2026 The mvsde Authors.
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
#include <vector>

namespace mvsde {

/// Base class for failures of the numerical pipeline (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (sigma sigma^T) is singular or badly conditioned at some state.
class SingularDiffusion : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A simulated state became NaN or infinite.
class NonFinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Normal equations of an affine-in-theta drift are singular.
class DegenerateNormalEquations : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The information matrix at theta0 fails its condition bound.
class SingularInformation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Aggregated configuration problems; one entry per violated constraint.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) {
      out += "\n  - ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace mvsde
