#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sfpca {

/// Generalized Pareto fit to tail exceedances.
struct GpdFit {
  double khat = 0.0;
  double sigma_hat = 0.0;
  double threshold = 0.0;
  int M = 0;
};

/**
 * Empirical-Bayes GPD fit (profile likelihood over an inverse-scale grid,
 * posterior-mean grid point, then shape as the mean of log1p-scaled
 * exceedances). `tail` holds exceedances over the threshold, all >= 0.
 * Throws TailError when fewer than 5 points or all exceedances are zero.
 */
GpdFit fit_gpd_tail(const std::vector<double>& tail);

/// GPD quantile function with location 0: scale sigma, shape k.
double gpd_quantile(double p, double khat, double sigma);

struct SmoothedWeights {
  Eigen::VectorXd log_weights;  // length S, same shift as the input ratios
  double khat = 0.0;
  int M = 0;
};

/**
 * Pareto-smoothed importance weights from log-ratios. The M = ceil(0.2 S)
 * (floor 5) largest weights are replaced in rank order by GPD quantiles at
 * probabilities (z - 1/2)/M offset by the threshold, then all weights are
 * truncated at S^{3/4} times the mean smoothed weight. A flat tail leaves
 * the weights unchanged and reports khat at a finite floor of -10.
 */
SmoothedWeights smooth_weights(const Eigen::VectorXd& log_ratios);

struct LooReport {
  double elppd = 0.0;
  double se = 0.0;                 // sqrt(N * var(pointwise))
  Eigen::VectorXd pointwise;       // N per-subject contributions
  Eigen::VectorXd khat;            // N tail shapes
  int n_bad = 0;                   // khat > 0.7 count
  std::vector<int> bad_units;      // indices with khat > 0.7
  int S = 0;                       // draws used
  int M = 0;                       // tail size per unit

  // Model identity, filled by the caller for comparisons.
  std::string label;
  int n_pcs = 0;
  int n_knots = 0;
};

/// Importance log-ratios are the negated log-likelihood entries.
Eigen::MatrixXd importance_log_ratios(const Eigen::MatrixXd& loglik);

/**
 * PSIS-LOO expected log pointwise predictive density from an S x N
 * log-likelihood matrix. Per unit: smooth the ratios, then
 * pointwise_i = LSE(log w + loglik col) - LSE(log w).
 */
LooReport compute_loo(const Eigen::MatrixXd& loglik);

struct ModelComparison {
  int index = 0;  // position in the input list
  std::string label;
  double elppd = 0.0;
  double delta = 0.0;     // elppd - best elppd (0 for the best row)
  double se_delta = 0.0;  // sqrt(N * var(pointwise differences))
  bool tied = false;      // within 1 SE of the best
};

struct ComparisonTable {
  std::vector<ModelComparison> rows;  // sorted by elppd descending
  int best_index = 0;
  int recommended_index = 0;  // parsimony among statistically tied models
};

/**
 * Rank models by elppd and flag ones within 1 SE(difference) of the best as
 * statistically tied. Among tied models the recommendation prefers fewer
 * components, then fewer knots. Throws ComparisonError when reports do not
 * share the same unit count.
 */
ComparisonTable compare_models(const std::vector<LooReport>& reports);

}  // namespace sfpca
