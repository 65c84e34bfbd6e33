#ifndef HETLOGIT_ERRORS_HPP
#define HETLOGIT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hetlogit {

// Invalid configuration (network spec, split sizes, estimator settings).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent in-memory inputs (shape mismatch, non-finite values).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problems reading or validating an external data file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rank-deficient or otherwise unusable parametric design.
class DesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure of an estimator (non-convergence, failed fold, failed bootstrap).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during network training.
class TrainingDivergedError : public EstimationError {
 public:
  TrainingDivergedError(std::size_t epoch, const std::string& what)
      : EstimationError("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace hetlogit

#endif  // HETLOGIT_ERRORS_HPP
