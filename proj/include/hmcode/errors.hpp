#pragma once

#include <stdexcept>
#include <string>

namespace hmcode {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument or configuration value.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Request that the probabilistic model cannot satisfy (non-ergodic chain,
// impossible transition, ...).
class ModelError : public Error {
public:
  using Error::Error;
};

// Infeasible code parameters or a codebook collision.
class CodeDesignError : public Error {
public:
  using Error::Error;
};

// Numerical breakdown (degenerate posterior, failed residual bound).
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace hmcode
