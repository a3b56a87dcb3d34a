#pragma once

#include <stdexcept>
#include <string>

namespace probout {

/// Shapes of operands do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A probability vector is negative somewhere or does not sum to one.
class ProbabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was asked to run in a mode it does not support.
class ModeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents (checkpoints, configs, images).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace probout
