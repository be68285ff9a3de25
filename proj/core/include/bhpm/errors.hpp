#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace bhpm {

/// Base class for every error raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid problem data. `key()` names the offending field ("R", "N[1]", ...).
class ProblemError : public Error {
 public:
  ProblemError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}

  [[nodiscard]] const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Shape or grid mismatch between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Matrix exponential (or another kernel) left the representable range.
class NumericRangeError : public Error {
 public:
  using Error::Error;
};

/// The linear boundary system of a TPBVP is singular or too ill-conditioned.
class DegenerateBoundaryError : public Error {
 public:
  DegenerateBoundaryError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}

  [[nodiscard]] double condition_number() const noexcept {
    return condition_number_;
  }

 private:
  double condition_number_;
};

/// Forward integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t first_bad_node)
      : Error(what), first_bad_node_(first_bad_node) {}

  [[nodiscard]] std::size_t first_bad_node() const noexcept {
    return first_bad_node_;
  }

 private:
  std::size_t first_bad_node_;
};

}  // namespace bhpm
