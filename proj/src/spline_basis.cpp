#include "sfpca/spline_basis.hpp"

#include <algorithm>
#include <cmath>

#include "sfpca/errors.hpp"
#include "sfpca/stats.hpp"

namespace sfpca {

namespace {
constexpr double kKnotSpacing = 1e-6;
}

std::vector<double> place_knots(const std::vector<double>& times, int n_internal,
                                bool range_uniform) {
  if (n_internal < 0) throw KnotError("n_internal must be >= 0");
  if (times.empty()) throw KnotError("no observation times for knot placement");
  if (n_internal == 0) return {};

  std::vector<double> knots(n_internal);
  if (range_uniform) {
    for (int j = 1; j <= n_internal; ++j) {
      knots[j - 1] = static_cast<double>(j) / (n_internal + 1);
    }
  } else {
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    for (int j = 1; j <= n_internal; ++j) {
      knots[j - 1] = stats::quantile_sorted(sorted, static_cast<double>(j) / (n_internal + 1));
    }
  }

  // Nudge collisions (and boundary-touching knots) apart; give up if the
  // perturbed sequence cannot stay strictly inside (0, 1).
  double prev = 0.0;
  for (auto& k : knots) {
    if (k <= prev + kKnotSpacing / 2) k = prev + kKnotSpacing;
    prev = k;
  }
  if (knots.back() >= 1.0 - kKnotSpacing / 2) {
    throw KnotError("cannot place " + std::to_string(n_internal) +
                    " internal knots strictly inside (0,1); too many knots for these times");
  }
  return knots;
}

OrthonormalBasis::OrthonormalBasis(std::vector<double> internal_knots, int quad_points)
    : q_(static_cast<int>(internal_knots.size()) + kOrder),
      internal_knots_(std::move(internal_knots)) {
  for (std::size_t i = 0; i < internal_knots_.size(); ++i) {
    if (internal_knots_[i] <= 0.0 || internal_knots_[i] >= 1.0) {
      throw KnotError("internal knot outside (0,1)");
    }
    if (i > 0 && internal_knots_[i] <= internal_knots_[i - 1]) {
      throw KnotError("internal knots must be strictly increasing");
    }
  }
  if (quad_points < 10 * q_) {
    throw BasisError("quad_points must be at least 10*q = " + std::to_string(10 * q_));
  }

  full_knots_.resize(q_ + kOrder);
  for (int i = 0; i < kOrder; ++i) full_knots_[i] = 0.0;
  for (int i = 0; i < static_cast<int>(internal_knots_.size()); ++i) {
    full_knots_[kOrder + i] = internal_knots_[i];
  }
  for (int i = 0; i < kOrder; ++i) full_knots_[q_ + i] = 1.0;

  // Composite trapezoid rule on a uniform grid.
  nodes_.resize(quad_points);
  weights_.resize(quad_points);
  const double h = 1.0 / (quad_points - 1);
  for (int m = 0; m < quad_points; ++m) {
    nodes_[m] = m * h;
    weights_[m] = (m == 0 || m == quad_points - 1) ? h / 2.0 : h;
  }

  Eigen::MatrixXd raw(quad_points, q_);
  for (int m = 0; m < quad_points; ++m) {
    raw.row(m) = evaluate_raw(nodes_[m]).transpose();
  }

  // Modified Gram-Schmidt, two passes, in the weighted inner product.
  // transform_ column j tracks the coefficients expressing orthonormal
  // function j in the raw basis.
  transform_ = Eigen::MatrixXd::Identity(q_, q_);
  ortho_on_grid_ = raw;
  const Eigen::VectorXd& w = weights_;
  for (int j = 0; j < q_; ++j) {
    const double raw_norm =
        std::sqrt((raw.col(j).array().square() * w.array()).sum());
    for (int pass = 0; pass < 2; ++pass) {
      for (int l = 0; l < j; ++l) {
        const double c =
            (ortho_on_grid_.col(l).array() * ortho_on_grid_.col(j).array() * w.array()).sum();
        ortho_on_grid_.col(j) -= c * ortho_on_grid_.col(l);
        transform_.col(j) -= c * transform_.col(l);
      }
    }
    const double norm =
        std::sqrt((ortho_on_grid_.col(j).array().square() * w.array()).sum());
    if (!(norm > 1e-10 * std::max(raw_norm, 1.0))) {
      throw BasisError("raw spline basis is rank deficient on the quadrature grid");
    }
    ortho_on_grid_.col(j) /= norm;
    transform_.col(j) /= norm;
  }
}

Eigen::VectorXd OrthonormalBasis::evaluate_raw(double t) const {
  // Cox-de Boor recursion over the non-zero span; the right boundary is
  // treated as part of the last interval.
  Eigen::VectorXd out = Eigen::VectorXd::Zero(q_);
  const int n_k = static_cast<int>(full_knots_.size());
  int span = kOrder - 1;  // index i with knots[i] <= t < knots[i+1]
  while (span < n_k - kOrder - 1 && t >= full_knots_[span + 1]) ++span;

  double left[kOrder], right[kOrder];
  double vals[kOrder];
  vals[0] = 1.0;
  for (int j = 1; j < kOrder; ++j) {
    left[j] = t - full_knots_[span + 1 - j];
    right[j] = full_knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double den = right[r + 1] + left[j - r];
      const double temp = den != 0.0 ? vals[r] / den : 0.0;
      vals[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    vals[j] = saved;
  }
  for (int j = 0; j < kOrder; ++j) {
    const int idx = span - kOrder + 1 + j;
    if (idx >= 0 && idx < q_) out[idx] = vals[j];
  }
  return out;
}

Eigen::VectorXd OrthonormalBasis::evaluate(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("basis evaluation at t=" + std::to_string(t) + " outside [0,1]");
  }
  return transform_.transpose() * evaluate_raw(t);
}

Eigen::MatrixXd OrthonormalBasis::evaluate(const Eigen::VectorXd& times) const {
  Eigen::MatrixXd out(times.size(), q_);
  for (int m = 0; m < times.size(); ++m) out.row(m) = evaluate(times[m]).transpose();
  return out;
}

Eigen::MatrixXd OrthonormalBasis::evaluate(const std::vector<double>& times) const {
  Eigen::Map<const Eigen::VectorXd> v(times.data(), static_cast<int>(times.size()));
  return evaluate(Eigen::VectorXd(v));
}

Eigen::MatrixXd OrthonormalBasis::gram() const {
  return ortho_on_grid_.transpose() * weights_.asDiagonal() * ortho_on_grid_;
}

Eigen::VectorXd OrthonormalBasis::project(const Eigen::VectorXd& values_on_grid) const {
  if (values_on_grid.size() != nodes_.size()) {
    throw SpecError("projection table does not match quadrature grid");
  }
  return ortho_on_grid_.transpose() * (weights_.array() * values_on_grid.array()).matrix();
}

}  // namespace sfpca
