#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sfpca {

/**
 * Cubic B-spline basis on [0, 1], orthonormalized in the continuous L2 inner
 * product approximated by composite trapezoid quadrature on a fixed uniform
 * grid. The basis therefore depends only on the knots, never on the observed
 * time pattern.
 *
 * `transform` maps raw Cox-de Boor evaluations to the orthonormal basis:
 * a row of orthonormal evaluations is raw_row * transform.
 */
class OrthonormalBasis {
 public:
  static constexpr int kOrder = 4;  // cubic
  static constexpr int kDefaultQuadPoints = 1001;

  OrthonormalBasis(std::vector<double> internal_knots, int quad_points = kDefaultQuadPoints);

  int dim() const { return q_; }
  const std::vector<double>& internal_knots() const { return internal_knots_; }
  const Eigen::VectorXd& quad_nodes() const { return nodes_; }
  const Eigen::VectorXd& quad_weights() const { return weights_; }
  const Eigen::MatrixXd& transform() const { return transform_; }

  /// Raw (non-orthonormal) cubic B-spline row at t; partition of unity holds.
  Eigen::VectorXd evaluate_raw(double t) const;

  /// Orthonormal basis row b(t)^T; throws DomainError outside [0, 1].
  Eigen::VectorXd evaluate(double t) const;

  /// Stacked orthonormal rows, one per time (len(times) x q).
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& times) const;
  Eigen::MatrixXd evaluate(const std::vector<double>& times) const;

  /// Gram matrix sum_m w_m b(x_m) b(x_m)^T on this basis's quadrature grid.
  Eigen::MatrixXd gram() const;

  /// Quadrature-weighted inner products of an arbitrary function table
  /// against the basis; used e.g. to express constants in basis coordinates.
  Eigen::VectorXd project(const Eigen::VectorXd& values_on_grid) const;

 private:
  int q_;
  std::vector<double> internal_knots_;
  Eigen::VectorXd full_knots_;  // with 4-fold boundary knots at 0 and 1
  Eigen::VectorXd nodes_, weights_;
  Eigen::MatrixXd transform_;      // q x q, upper triangular
  Eigen::MatrixXd ortho_on_grid_;  // quad_points x q
};

/**
 * Places internal knots at the empirical quantiles j/(n_internal+1) of the
 * pooled observation times (assumed rescaled to [0, 1]). Tied quantiles are
 * nudged apart by 1e-6; if that cannot keep them strictly inside (0, 1),
 * throws KnotError. With `range_uniform` set, knots are spaced uniformly over
 * (0, 1) instead of following the data.
 */
std::vector<double> place_knots(const std::vector<double>& times, int n_internal,
                                bool range_uniform = false);

}  // namespace sfpca
