#pragma once

#include <stdexcept>
#include <string>

namespace sfpca {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File-level structural problems (missing header column, malformed layout).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Row-level parse failures; message carries the 1-based row number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Data violates a dataset invariant (duplicate times, non-finite values).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Data carries no usable signal (constant outcome, single distinct time).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// Knot placement failed (collisions beyond perturbation, out of range).
class KnotError : public Error {
 public:
  using Error::Error;
};

/// Spline basis construction failed (rank deficiency on the quadrature grid).
class BasisError : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested outside the basis domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite parameter handed to a density evaluation.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Model specification inconsistent with the data or parameter vector.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Tail sample unusable for the generalized Pareto fit.
class TailError : public Error {
 public:
  using Error::Error;
};

/// Loading matrix rank-deficient; draw cannot be rotated.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (sampler settings, CLI arguments).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A named entity (subject, file, fit artifact) does not exist.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Sampler could not find a finite starting point.
class InitError : public Error {
 public:
  using Error::Error;
};

/// Model comparison over incompatible reports.
class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// Recovery scoring against a mismatched ground truth.
class ScoringError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfpca
