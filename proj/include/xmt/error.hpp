// Copyright 2026 The xmt Authors
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

namespace xmt {

// Error categories map 1:1 onto CLI exit codes (see tools/xmt.cpp --help).
enum class ErrorKind {
  Config = 2,        // unparseable config file or flag
  MissingInput = 3,  // referenced file/artifact does not exist
  Validation = 4,    // contract violation on otherwise well-formed input
  Shape = 5,         // tensor/checkpoint shape mismatch
  Divergence = 6,    // non-finite loss during training
  Other = 1,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  static Error config(const std::string& m) { return {ErrorKind::Config, m}; }
  static Error missing_input(const std::string& m) {
    return {ErrorKind::MissingInput, m};
  }
  static Error validation(const std::string& m) {
    return {ErrorKind::Validation, m};
  }
  static Error shape(const std::string& m) { return {ErrorKind::Shape, m}; }
  static Error divergence(const std::string& m) {
    return {ErrorKind::Divergence, m};
  }
  static Error other(const std::string& m) { return {ErrorKind::Other, m}; }

 private:
  ErrorKind kind_;
};

}  // namespace xmt
