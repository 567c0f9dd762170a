#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isclp {

// Invalid parameters or parameter combinations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed, empty, non-finite or inconsistently sized data.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A factorization or solve that cannot be carried out on the given data.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::ptrdiff_t index = -1)
      : std::runtime_error(what), index_(index) {}

  // Leading-minor / column index where the failure was detected, -1 if n/a.
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

}  // namespace isclp
