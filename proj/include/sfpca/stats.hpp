#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

namespace sfpca::stats {

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);

/// Quantile with linear interpolation between order statistics (the common
/// spreadsheet/R default). `p` in [0, 1]; `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

/// Convenience: copies, sorts, then interpolates.
double quantile(std::vector<double> x, double p);

double median(std::vector<double> x);

/// log(sum(exp(x))) guarded against overflow; -inf for empty input.
double log_sum_exp(std::span<const double> x);
double log_sum_exp(const Eigen::VectorXd& x);

/// Standard normal CDF.
double norm_cdf(double x);

/// Inverse standard normal CDF (Acklam's rational approximation, refined by
/// one Newton step; |error| < 1e-12 over (0, 1)).
double norm_quantile(double p);

/// Standard normal log density.
inline double norm_logpdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.9189385332046727417803297;  // log(sqrt(2*pi))
}

}  // namespace sfpca::stats
