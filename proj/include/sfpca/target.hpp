#pragma once

#include <Eigen/Dense>

namespace sfpca {

/// Differentiable log density over an unconstrained parameter vector.
/// Implementations must be pure: safe to evaluate concurrently.
class LogDensityTarget {
 public:
  virtual ~LogDensityTarget() = default;

  virtual int dim() const = 0;

  /// Log density at x; `grad`, when non-null, receives d logp / dx.
  virtual double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const = 0;
};

}  // namespace sfpca
