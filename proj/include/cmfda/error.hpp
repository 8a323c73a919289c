// Copyright 2026 The cmfda Authors.
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

#ifndef CMFDA_ERROR_HPP_
#define CMFDA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cmfda {

/// Error categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  kUsage,    // API misuse, bad shapes, bad arguments
  kConfig,   // invalid configuration / network specification
  kData,     // unreadable or malformed inputs
  kNumeric,  // NaN/Inf, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

/// Raised by synthesis when an item cannot be produced; callers log and skip it.
class GenerationSkip : public std::runtime_error {
 public:
  explicit GenerationSkip(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a sampled transform is unusable and a new sample should be drawn.
class RetrySignal : public GenerationSkip {
 public:
  explicit RetrySignal(const std::string& what) : GenerationSkip(what) {}
};

/// 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return 1;
    case ErrorKind::kData:
      return 2;
    case ErrorKind::kNumeric:
      return 3;
  }
  return 1;
}

}  // namespace cmfda

#endif  // CMFDA_ERROR_HPP_
