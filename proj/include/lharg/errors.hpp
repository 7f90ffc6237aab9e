#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lharg {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid inputs: parameters, states, series, files. CLI exit code 2.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Schema or value violation while reading a file.
class ParseError : public DomainError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DomainError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A computation left its admissible region. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// MGF coefficient recursion hit a pole or the principal-branch guard.
class RecursionDomainError : public NumericalError {
 public:
  RecursionDomainError(const std::string& what, int step)
      : NumericalError(what + " at recursion step " + std::to_string(step)), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Non-positive noncentrality inside the likelihood.
class LikelihoodDomainError : public NumericalError {
 public:
  LikelihoodDomainError(const std::string& what, std::size_t index)
      : NumericalError(what + " at observation " + std::to_string(index)), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Root bracketing for the variance risk premium failed. CLI exit code 4.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double iv_low, double iv_high)
      : Error(what), iv_low_(iv_low), iv_high_(iv_high) {}
  double iv_low() const noexcept { return iv_low_; }
  double iv_high() const noexcept { return iv_high_; }

 private:
  double iv_low_;
  double iv_high_;
};

}  // namespace lharg
