#pragma once

#include <stdexcept>
#include <string>

namespace tabgnn {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unusable input data (bad CSV cell, degenerate class set, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments or configuration supplied by a caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised when optimization produces a non-finite loss.
class TrainingFailure : public Error {
 public:
  TrainingFailure(int epoch, const std::string& what)
      : Error("training failed at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace tabgnn
