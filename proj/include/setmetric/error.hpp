#pragma once

#include <stdexcept>
#include <string>

namespace setmetric {

// Base class for all library errors. Subclasses map onto CLI exit codes:
// InputError -> 1 (usage, config, malformed files), NumericalError -> 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace setmetric
