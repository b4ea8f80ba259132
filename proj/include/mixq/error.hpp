// Copyright 2026 The mixq Authors
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

#ifndef MIXQ_ERROR_HPP_
#define MIXQ_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mixq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that parses but violates a documented contract (bad bitwidth,
// length mismatch, out-of-range ratio, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (JSON syntax, binary container layout).
class FormatError : public Error {
 public:
  using Error::Error;
};

// 32-bit accumulator overflow in an integer kernel.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// No scheme can satisfy the cost constraint.
class InfeasibleConstraint : public Error {
 public:
  using Error::Error;
};

// File system failure (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixq

#endif  // MIXQ_ERROR_HPP_
