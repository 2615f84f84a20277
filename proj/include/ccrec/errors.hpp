// Copyright 2026 The ccrec Authors.
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

#ifndef CCREC_ERRORS_HPP_
#define CCREC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ccrec {

// Root of every error thrown by the library. The CLI maps subclasses to exit
// codes (usage / missing input -> 2, everything else -> 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// A hyperparameter or argument outside its allowed domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Misuse of a stateful object (e.g. backward on a consumed tape).
class StateError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Data left empty or inconsistent after preprocessing.
class DataError : public Error {
 public:
  using Error::Error;
};

// Corrupt or incompatible binary/JSON artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad or unknown configuration keys, missing artifacts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input file that does not exist or cannot be opened.
class MissingInputError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Measured artifact sizes disagree with their closed-form sizes.
class AccountingError : public Error {
 public:
  using Error::Error;
};

// Violated operation precondition that is not a plain shape/index issue.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss term.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccrec

#endif  // CCREC_ERRORS_HPP_
