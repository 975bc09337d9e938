// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cornersim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contrast outside the regime an operation requires.
class RegimeError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Matching system or gauge denominator is singular (delta in the resonant family).
class ResonanceError : public Error {
 public:
  using Error::Error;
};

class ParamError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, double pivot_floor)
      : Error(what), pivot_floor_(pivot_floor) {}
  double pivot_floor() const noexcept { return pivot_floor_; }

 private:
  double pivot_floor_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class NotResonantError : public Error {
 public:
  using Error::Error;
};

class MeshKindError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line, std::string key)
      : Error(what), line_(line), key_(std::move(key)) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

}  // namespace cornersim
