#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sfpca/target.hpp"

namespace sfpca {

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int iters = 1000;
  double target_accept = 0.8;
  int max_treedepth = 10;
  std::uint64_t seed = 0;
  bool adapt = true;
  double init_radius = 2.0;
  bool parallel = true;

  void validate() const;
};

struct ChainStats {
  double mean_accept = 0.0;
  int divergences = 0;      // post-warmup
  int treedepth_hits = 0;   // post-warmup
  double step_size = 0.0;
  Eigen::VectorXd inv_mass;
};

/**
 * Retained posterior draws from all chains, stacked chain-major: rows
 * [0, iters) come from chain 0, then chain 1, and so on. Rerunning with the
 * same seed, config and target reproduces these bit for bit regardless of
 * how chains were scheduled.
 */
struct PosteriorDraws {
  int chains = 0;
  int iters = 0;  // retained per chain
  Eigen::MatrixXd draws;  // (chains*iters) x dim
  Eigen::VectorXd lp;
  std::vector<ChainStats> chain_stats;
  bool divergence_warning = false;

  int total_draws() const { return chains * iters; }
  int total_divergences() const;
};

/// One leapfrog step in place with a diagonal inverse metric: updates x, p,
/// grad and lp. Exposed for the integrator tests.
void leapfrog(const LogDensityTarget& target, const Eigen::VectorXd& inv_mass,
              Eigen::VectorXd& x, Eigen::VectorXd& p, Eigen::VectorXd& grad, double& lp,
              double eps);

/// Hamiltonian for a diagonal metric: -lp + 0.5 * sum(inv_mass * p^2).
double hamiltonian(const Eigen::VectorXd& inv_mass, const Eigen::VectorXd& p, double lp);

/**
 * Multi-chain No-U-Turn sampling with multinomial state selection,
 * dual-averaging step-size adaptation and windowed diagonal metric
 * adaptation. Each chain owns an RNG stream derived from (seed, chain).
 */
PosteriorDraws nuts_sample(const LogDensityTarget& target, const SamplerConfig& config);

}  // namespace sfpca
