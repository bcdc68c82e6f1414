#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sfpca/dataset.hpp"
#include "sfpca/spline_basis.hpp"
#include "sfpca/target.hpp"

namespace sfpca {

/**
 * Unpacked view of the unconstrained parameter vector. Packed layout:
 *   [ theta_mu (q) | Theta column-major (q*k) | alpha subject-major (N*k)
 *     | log_sigma ]
 */
struct ParameterVector {
  Eigen::VectorXd theta_mu;  // q
  Eigen::MatrixXd Theta;     // q x k
  Eigen::MatrixXd alpha;     // N x k
  double log_sigma = 0.0;

  double sigma() const { return std::exp(log_sigma); }
};

/**
 * The reduced-rank trajectory model: each subject's outcome vector is
 * B_i theta_mu + B_i Theta alpha_i plus iid Gaussian noise, with standard
 * normal priors on theta_mu, the columns of Theta and the per-subject
 * scores, and a half-Cauchy(0,1) prior on the noise scale. The noise scale
 * is sampled on the log scale; the log Jacobian is included in the density.
 *
 * The loadings carry no orthogonality constraint here; identifiability is
 * restored afterwards by the rotation step.
 */
class SfpcaModel : public LogDensityTarget {
 public:
  /// Expects time-rescaled data; `data` should be standardized for the
  /// priors to be on the intended scale.
  SfpcaModel(const OrthonormalBasis& basis, const LongitudinalDataset& data, int k);

  int q() const { return basis_.dim(); }
  int k() const { return k_; }
  int n_subjects() const { return static_cast<int>(design_.size()); }
  int n_total() const { return n_total_; }
  const OrthonormalBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& design(int i) const { return design_[i]; }
  const Eigen::VectorXd& outcomes(int i) const { return outcomes_[i]; }

  int dim() const override { return q() + q() * k_ + n_subjects() * k_ + 1; }

  ParameterVector unpack(const Eigen::VectorXd& packed) const;
  Eigen::VectorXd pack(const ParameterVector& p) const;

  /// Names for each packed coordinate (theta_mu.1, Theta.1.1, ...).
  std::vector<std::string> parameter_names() const;

  /// Log joint density (likelihood + priors + log-sigma Jacobian).
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override;

  double log_posterior(const Eigen::VectorXd& x) const { return log_density(x, nullptr); }
  Eigen::VectorXd grad_log_posterior(const Eigen::VectorXd& x) const;

  /// Per-subject log likelihood log p(y_i | theta_mu, Theta, alpha_i, sigma).
  Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& x) const;

  /// Likelihood portion only (sum of pointwise contributions).
  double log_likelihood(const Eigen::VectorXd& x) const;

 private:
  void check_packed(const Eigen::VectorXd& x) const;

  OrthonormalBasis basis_;
  int k_;
  int n_total_ = 0;
  std::vector<Eigen::MatrixXd> design_;    // B_i, n_i x q
  std::vector<Eigen::VectorXd> outcomes_;  // y_i
};

}  // namespace sfpca
