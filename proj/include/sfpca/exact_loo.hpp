#pragma once

#include <vector>

#include "sfpca/dataset.hpp"
#include "sfpca/sampler.hpp"
#include "sfpca/spline_basis.hpp"

namespace sfpca {

struct ExactLooUnit {
  int subject = 0;
  double log_pred = 0.0;  // log p(y_i | y_{-i})
  double mcse = 0.0;
  double max_rhat = 0.0;  // split R-hat of the refit log posterior
  bool converged = false;
};

struct ExactLooResult {
  double elppd = 0.0;
  double mcse = 0.0;  // per-unit MCSEs combined in quadrature
  std::vector<ExactLooUnit> units;
};

/**
 * Brute-force leave-one-out oracle: for each subject the model is refit on
 * the remaining subjects and the held-out log predictive density is
 * estimated by averaging the closed-form Gaussian marginal
 *   p(y_i | theta_mu, Theta, sigma) = N(B_i theta_mu,
 *                                       B_i Theta Theta^T B_i^T + sigma^2 I)
 * over the refit draws. The marginal integrates the held-out subject's
 * scores against their standard normal prior, so no score sampling is
 * needed. Intended for small N with short chains; each refit derives its
 * own seed from config.seed and the unit index.
 */
ExactLooResult exact_loo(const OrthonormalBasis& basis, const LongitudinalDataset& data, int k,
                         const SamplerConfig& config);

}  // namespace sfpca
