// ctcbias/errors.h
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

#ifndef CTCBIAS_ERRORS_H_
#define CTCBIAS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace ctcbias {

enum class ErrorKind {
  kConfig,        // invalid configuration or mismatched inputs
  kTokenization,  // a word cannot be covered by the wordpiece inventory
  kUnsupported,   // input outside the supported class (e.g. cyclic FST)
  kPrecondition,  // caller violated a documented precondition
  kDivergence,    // negative-weight cycle
  kIo,            // file or format problems
  kCoverage,      // no joint unit covers part of an input
  kUndefined,     // metric undefined (e.g. empty reference)
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string field = "")
      : Error(ErrorKind::kConfig, message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class TokenizationError : public Error {
 public:
  TokenizationError(const std::string& message, std::string character)
      : Error(ErrorKind::kTokenization, message),
        character_(std::move(character)) {}
  const std::string& character() const { return character_; }

 private:
  std::string character_;
};

}  // namespace ctcbias

#endif  // CTCBIAS_ERRORS_H_
