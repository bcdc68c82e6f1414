#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sfpca/dataset.hpp"
#include "sfpca/sampler.hpp"
#include "sfpca/spline_basis.hpp"

namespace sfpca {

/**
 * Ground truth for a synthetic sparse longitudinal scenario. Outcomes are
 * generated on the orthonormal basis defined by `internal_knots`:
 *   y_ij = b(t_ij)^T (theta_mu + Theta alpha_i) + eps_ij,
 * alpha_i ~ N(0, diag(D)), eps ~ N(0, sigma2). N_T candidate times are
 * equally spaced on [0,1]; each subject gets n_i ~ Poisson(mu_T) visits
 * (re-drawn at 0, clamped at N_T) in uniformly chosen distinct slots, so the
 * expected missing share is roughly 1 - mu_T/N_T.
 */
struct SimulationTruth {
  Eigen::VectorXd theta_mu;            // q
  Eigen::MatrixXd Theta;               // q x k, orthonormal columns
  Eigen::VectorXd D;                   // k score variances
  double sigma2 = 0.0;
  int N = 0;
  int N_T = 0;
  double mu_T = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> internal_knots;  // truth basis layout, q = knots + 4

  int q() const { return static_cast<int>(theta_mu.size()); }
  int k() const { return static_cast<int>(Theta.cols()); }
  double nominal_missingness() const { return 1.0 - mu_T / N_T; }

  /// Structural checks; throws ValidationError on breach. Zero noise or
  /// score variances are tolerated for degenerate test scenarios.
  void validate() const;
};

/// The checked-in default scenario: q=5 (one internal knot), k=2,
/// score variances (4, 1), noise variance 0.25, N=100, dense visits.
SimulationTruth default_truth();

/// Parses a truth scenario from its JSON form (Theta stored as q rows of k).
/// Throws FormatError on malformed input; the result is validated.
SimulationTruth truth_from_json_text(const std::string& text);

/// Serializes a truth scenario to JSON; inverse of truth_from_json_text.
std::string truth_to_json_text(const SimulationTruth& truth);

/// The truth's own basis (also the fit basis used by the harness).
OrthonormalBasis truth_basis(const SimulationTruth& truth);

/// Draw one dataset; deterministic in truth.seed.
LongitudinalDataset generate(const SimulationTruth& truth);

/// Recovery scores for one fitted replicate.
struct RecoveryRecord {
  double mse_theta_mu = 0.0;   // mean squared coefficient error, original scale
  double mse_theta = 0.0;      // loading coefficients after matching/sign
  double curve_mse_mean = 0.0; // pointwise grid MSE of the mean curve
  double curve_mse_fpc = 0.0;  // averaged over matched component curves
  double band_coverage_mean = 0.0;  // share of grid where 95% band covers truth
  double realized_missingness = 0.0;
};

/**
 * Compare posterior-mean estimates against the truth on the truth's basis:
 * theta_mu on the original outcome scale, loadings after greedy column
 * matching by absolute inner product and sign flips, and basis-independent
 * pointwise curve MSEs on a 101-point grid. Throws ScoringError when the
 * estimate dimensions do not match the truth.
 */
RecoveryRecord score_recovery(const Eigen::VectorXd& theta_mu_hat,
                              const Eigen::MatrixXd& theta_star_hat,
                              const OrthonormalBasis& basis, const SimulationTruth& truth);

/// One simulate-fit-rotate-score replicate.
struct RepResult {
  int scenario = 0;
  int rep = 0;
  bool ok = false;
  std::string error;
  RecoveryRecord record;
};

/// Runs a single replicate end to end; sampler seeds derive from truth.seed.
RepResult run_rep(const SimulationTruth& truth, const SamplerConfig& config);

struct GridResult {
  std::vector<RepResult> rows;  // scenario-major, rep order within scenario
  int failures = 0;

  double failure_rate() const {
    return rows.empty() ? 0.0 : static_cast<double>(failures) / rows.size();
  }
  /// Mean of a RecoveryRecord field over the successful reps of a scenario.
  double scenario_mean(int scenario, double RecoveryRecord::*field) const;
};

/**
 * Full scenario x replicate grid. Seeds chain deterministically:
 * rep seed = derive(derive(master, scenario+1), rep+1). A failed rep is
 * recorded with its error message and skipped in summaries.
 */
GridResult run_grid(const std::vector<SimulationTruth>& scenarios, int reps,
                    const SamplerConfig& config, std::uint64_t master_seed);

}  // namespace sfpca
