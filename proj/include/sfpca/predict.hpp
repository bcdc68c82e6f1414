#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sfpca/dataset.hpp"
#include "sfpca/model.hpp"
#include "sfpca/rotation.hpp"
#include "sfpca/sampler.hpp"

namespace sfpca {

/// Silverman's rule of thumb: 0.9 min(sd, IQR/1.34) n^{-1/5}.
double silverman_bandwidth(const std::vector<double>& values);

/// Gaussian kernel density of `values` evaluated on `grid`.
Eigen::VectorXd kde_density(const std::vector<double>& values, const Eigen::VectorXd& grid,
                            double bandwidth);

/// Posterior predictive check data: observed and replicate densities on one
/// shared grid (standardized outcome scale).
struct PpcBundle {
  Eigen::VectorXd grid;        // 512 evaluation points
  Eigen::VectorXd observed;    // density of the pooled observed outcomes
  Eigen::MatrixXd replicates;  // R x grid-size replicate densities
  int R = 0;

  /// Share of grid points where the observed density lies inside the
  /// pointwise min-max envelope of the replicate densities.
  double envelope_coverage() const;
};

/**
 * Posterior predictive replication at the observed design points. R draws
 * are taken at even strides through the retained draws; replicate
 * observations are sampled as N(b(t_ij)^T (theta_mu + Theta alpha_i),
 * sigma^2) with an RNG stream per replicate derived from `seed`. Densities
 * use a Gaussian kernel with Silverman bandwidths on a common 512-point
 * grid covering the pooled observed and replicate values plus three
 * bandwidths on each side. Throws ConfigError when R exceeds the draw
 * count.
 */
PpcBundle replicate(const SfpcaModel& model, const PosteriorDraws& draws, int R,
                    std::uint64_t seed);

/// Pointwise posterior summaries of one curve on a grid.
struct CurveBand {
  Eigen::VectorXd mean, lower, median, upper;  // lower/upper = 2.5/97.5%
};

/// Population mean curve, component curves and score-SD overlays, all on the
/// original outcome and time scales.
struct CurveSet {
  Eigen::VectorXd grid;  // rescaled model time in [0,1]
  Eigen::VectorXd time;  // original time units
  CurveBand mean_curve;
  std::vector<CurveBand> components;       // k curves b(t)^T theta_star_j
  std::vector<Eigen::VectorXd> overlay_plus;   // mean + sd(score_j) * component_j
  std::vector<Eigen::VectorXd> overlay_minus;  // mean - sd(score_j) * component_j
  Eigen::VectorXd score_sd;  // SD across subjects of posterior-mean scores
};

/**
 * Fitted population and component curves with pointwise credible bands.
 * The mean curve uses every retained draw; component curves use the valid
 * rotated draws. Back-transformation: the mean curve maps through the full
 * standardization, component curves scale by the outcome SD only.
 */
CurveSet fitted_curves(const SfpcaModel& model, const PosteriorDraws& draws,
                       const RotatedDraws& rotated, const Standardization& standardization,
                       const LongitudinalDataset& data, int grid_size);

/// One subject's predicted trajectory with a pointwise credible band.
struct TrajectoryBand {
  std::string subject_id;
  Eigen::VectorXd grid;   // rescaled model time
  Eigen::VectorXd time;   // original time units
  CurveBand band;
  Eigen::VectorXd obs_times;   // original units
  Eigen::VectorXd obs_values;  // original outcome scale
};

/**
 * Predicted trajectory for one subject: pointwise 2.5/50/97.5% quantiles of
 * b(t)^T (theta_mu + Theta alpha_i) over draws, back-transformed. The
 * rotation does not change this product, so raw draws are used. With
 * `with_noise`, measurement noise is added per draw and grid point from a
 * stream derived from `seed`, widening the band toward a predictive
 * interval. Throws LookupError for an unknown subject.
 */
TrajectoryBand subject_trajectory(const SfpcaModel& model, const PosteriorDraws& draws,
                                  const LongitudinalDataset& data,
                                  const Standardization& standardization, int subject,
                                  int grid_size, bool with_noise, std::uint64_t seed);

}  // namespace sfpca
