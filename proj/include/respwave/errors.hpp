#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace respwave {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not compose (channel mismatch, non-positive output length, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A model configuration whose stage lengths do not chain.
class BuildError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during optimisation.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::ptrdiff_t layer = -1) : Error(what), layer_(layer) {}
  /// Offending layer index, or -1 when not attributable to a layer.
  std::ptrdiff_t layer() const noexcept { return layer_; }

 private:
  std::ptrdiff_t layer_;
};

/// Weight-file decoding failures.
class LoadError : public Error {
 public:
  enum class Kind { Io, BadMagic, Truncated, ShapeMismatch };
  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Recording CSV parsing failures. `line()` is 1-based, 0 when not line specific.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A signal or window that cannot be normalised (constant values).
class DegenerateSignalError : public Error {
 public:
  using Error::Error;
};

/// Dataset-level inconsistencies (duplicate subjects, too few subjects, ...).
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Evaluation-time failures: fusion gaps, empty reports, missing spectral peak.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace respwave
