#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "sfpca/sampler.hpp"

namespace sfpca {

/**
 * Split R-hat over per-chain series of a single scalar parameter. Each chain
 * is split in half (middle draw dropped when odd) and the potential scale
 * reduction factor is computed across the resulting sequences. Returns NaN
 * for a constant (degenerate) parameter.
 */
double split_rhat(const std::vector<Eigen::VectorXd>& chains);

/**
 * Bulk effective sample size: draws are rank-normalized across all split
 * chains, then ESS is computed from chain-averaged autocorrelations using
 * Geyer's initial monotone positive sequence. Returns NaN for a constant
 * parameter.
 */
double bulk_ess(const std::vector<Eigen::VectorXd>& chains);

/// Monte Carlo standard error of the posterior mean, sd / sqrt(bulk ESS).
double mcse_mean(const std::vector<Eigen::VectorXd>& chains);

struct ParameterDiagnostic {
  std::string name;
  double rhat = std::numeric_limits<double>::quiet_NaN();
  double ess_bulk = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;  // constant across all retained draws
};

struct ConvergenceReport {
  std::vector<ParameterDiagnostic> parameters;
  bool rhat_available = false;  // needs >= 2 chains and >= 50 draws per chain
  double max_rhat = std::numeric_limits<double>::quiet_NaN();
  double min_ess = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> flagged;  // parameters with R-hat > 1.01
  int divergences = 0;
  bool divergence_warning = false;

  bool ok() const { return flagged.empty() && !divergence_warning; }
};

/// Per-chain series of parameter `index` from chain-major stacked draws.
std::vector<Eigen::VectorXd> parameter_chains(const PosteriorDraws& draws, int index);

/**
 * Full convergence report for every scalar parameter. `names` must match the
 * draw matrix columns. With a single chain the R-hat fields stay NaN and the
 * report says R-hat is unavailable; bulk ESS is still computed from the split
 * halves.
 */
ConvergenceReport diagnose(const PosteriorDraws& draws, const std::vector<std::string>& names);

}  // namespace sfpca
