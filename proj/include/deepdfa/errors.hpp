// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace deepdfa {

// Caller passed something outside an operation's domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A serialized document could not be decoded into a valid value.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A dataset generator could not satisfy its constraints.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or gradient.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepdfa
