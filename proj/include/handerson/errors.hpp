#pragma once

#include <stdexcept>
#include <string>

namespace handerson {

// Input violates a documented precondition on values (bad digit, rho <= 1, ...).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Index, rank or window outside the materialized part of the structure.
class RangeError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

// A mathematical function is undefined at the requested argument.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Vector/matrix sizes do not agree.
class DimensionError : public std::length_error {
public:
  using std::length_error::length_error;
};

// Request would exceed a configured resource cap (dense dimension, ...).
class ResourceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Temple's inequality called without <psi, A psi> > E_1.
class PreconditionError : public std::logic_error {
public:
  PreconditionError(const std::string& what, double deficit)
      : std::logic_error(what), deficit_(deficit) {}

  // E_1 - <psi, A psi> (>= 0).
  double deficit() const noexcept { return deficit_; }

private:
  double deficit_;
};

}  // namespace handerson
