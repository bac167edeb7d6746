// Copyright 2026 The xfer-tune Authors.
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

namespace xfer {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates a documented invariant. `field()` names the
/// offending field when one can be identified.
class DataError : public Error {
 public:
  DataError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  explicit DataError(const std::string& what) : Error(what) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A precondition of an operation was not met by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace xfer
