// Copyright 2026 The bevpf Authors
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

#ifndef BEVPF_ERRORS_HPP
#define BEVPF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bevpf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Logarithm requested at |theta| = pi, where the SE(2) log is not unique.
class IllConditionedLog : public Error {
 public:
  using Error::Error;
};

/// All particle weights vanished (every log-weight is -inf or NaN).
class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

/// Estimated and ground-truth trajectories cannot be paired step by step.
class AssociationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Feature-map container failures. `kind()` distinguishes the cause.
class ContainerError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kNonFinite, kBadHeader };

  ContainerError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace bevpf

#endif  // BEVPF_ERRORS_HPP
