#pragma once

#include <stdexcept>
#include <string>

namespace virel {

/// Raised when an argmax is not unique within the tie tolerance.
class TieError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by iterative solvers that exhaust their iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double last_change)
      : std::runtime_error(what), iterations_(iterations), last_change_(last_change) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double last_change() const noexcept { return last_change_; }

 private:
  std::size_t iterations_;
  double last_change_;
};

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, double condition_number)
      : std::runtime_error(what), condition_number_(condition_number) {}

  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

class NonUnimodalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss became non-finite during training. The message carries a snapshot.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace virel
