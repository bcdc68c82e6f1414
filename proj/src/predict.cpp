#include "sfpca/predict.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfpca/errors.hpp"
#include "sfpca/rng.hpp"
#include "sfpca/stats.hpp"

namespace sfpca {

namespace {

Eigen::VectorXd uniform_grid(int grid_size) {
  if (grid_size < 2) throw ConfigError("curve grid needs at least 2 points");
  Eigen::VectorXd g(grid_size);
  for (int i = 0; i < grid_size; ++i) g[i] = static_cast<double>(i) / (grid_size - 1);
  return g;
}

Eigen::VectorXd to_original_time(const Eigen::VectorXd& grid, const LongitudinalDataset& data) {
  if (!data.time_rescaled) return grid;
  const double t0 = data.time_range.first;
  const double t1 = data.time_range.second;
  return (t0 + grid.array() * (t1 - t0)).matrix();
}

Eigen::MatrixXd basis_on_grid(const OrthonormalBasis& basis, const Eigen::VectorXd& grid) {
  Eigen::MatrixXd E(grid.size(), basis.dim());
  for (int i = 0; i < grid.size(); ++i) E.row(i) = basis.evaluate(grid[i]).transpose();
  return E;
}

/// Pointwise mean and 2.5/50/97.5% quantiles over rows of draws x grid.
CurveBand summarize_curves(const Eigen::MatrixXd& curves) {
  const int G = static_cast<int>(curves.cols());
  CurveBand band;
  band.mean = curves.colwise().mean();
  band.lower.resize(G);
  band.median.resize(G);
  band.upper.resize(G);
  std::vector<double> col(curves.rows());
  for (int g = 0; g < G; ++g) {
    for (int s = 0; s < curves.rows(); ++s) col[s] = curves(s, g);
    std::sort(col.begin(), col.end());
    band.lower[g] = stats::quantile_sorted(col, 0.025);
    band.median[g] = stats::quantile_sorted(col, 0.5);
    band.upper[g] = stats::quantile_sorted(col, 0.975);
  }
  return band;
}

void back_transform(CurveBand& band, const Standardization& st, bool with_offset) {
  const double m = with_offset ? st.mean : 0.0;
  band.mean = (m + st.sd * band.mean.array()).matrix();
  band.lower = (m + st.sd * band.lower.array()).matrix();
  band.median = (m + st.sd * band.median.array()).matrix();
  band.upper = (m + st.sd * band.upper.array()).matrix();
}

}  // namespace

double silverman_bandwidth(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw SpecError("bandwidth needs at least 2 values");
  const double sd = stats::sample_sd(values);
  const double iqr = stats::quantile(values, 0.75) - stats::quantile(values, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) spread = 1e-3;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

Eigen::VectorXd kde_density(const std::vector<double>& values, const Eigen::VectorXd& grid,
                            double bandwidth) {
  if (!(bandwidth > 0.0)) throw SpecError("bandwidth must be positive");
  const double norm = 1.0 / (values.size() * bandwidth * std::sqrt(2.0 * M_PI));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.size());
  for (double v : values) {
    out += (-0.5 * ((grid.array() - v) / bandwidth).square()).exp().matrix();
  }
  return norm * out;
}

double PpcBundle::envelope_coverage() const {
  if (replicates.rows() == 0 || grid.size() == 0) return 0.0;
  int inside = 0;
  for (int g = 0; g < grid.size(); ++g) {
    const double lo = replicates.col(g).minCoeff();
    const double hi = replicates.col(g).maxCoeff();
    if (observed[g] >= lo && observed[g] <= hi) ++inside;
  }
  return static_cast<double>(inside) / grid.size();
}

PpcBundle replicate(const SfpcaModel& model, const PosteriorDraws& draws, int R,
                    std::uint64_t seed) {
  const int S = draws.total_draws();
  if (R < 1) throw ConfigError("replicate count must be >= 1");
  if (R > S) throw ConfigError("replicate count exceeds retained draw count");

  std::vector<double> observed;
  for (int i = 0; i < model.n_subjects(); ++i) {
    const auto& y = model.outcomes(i);
    observed.insert(observed.end(), y.data(), y.data() + y.size());
  }
  if (observed.size() < 2) throw SpecError("too few observations for a density");

  std::vector<std::vector<double>> reps(R);
  for (int r = 0; r < R; ++r) {
    const int idx = static_cast<int>((static_cast<long long>(r) * S) / R);
    const ParameterVector p = model.unpack(draws.draws.row(idx).transpose());
    const double sigma = p.sigma();
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(r));
    auto& rep = reps[r];
    rep.reserve(observed.size());
    for (int i = 0; i < model.n_subjects(); ++i) {
      const Eigen::VectorXd mean =
          model.design(i) * (p.theta_mu + p.Theta * p.alpha.row(i).transpose());
      for (int j = 0; j < mean.size(); ++j) rep.push_back(rng.normal(mean[j], sigma));
    }
  }

  const double h_obs = silverman_bandwidth(observed);
  std::vector<double> h_rep(R);
  double h_max = h_obs;
  double lo = *std::min_element(observed.begin(), observed.end());
  double hi = *std::max_element(observed.begin(), observed.end());
  for (int r = 0; r < R; ++r) {
    h_rep[r] = silverman_bandwidth(reps[r]);
    h_max = std::max(h_max, h_rep[r]);
    lo = std::min(lo, *std::min_element(reps[r].begin(), reps[r].end()));
    hi = std::max(hi, *std::max_element(reps[r].begin(), reps[r].end()));
  }

  PpcBundle bundle;
  bundle.R = R;
  const int G = 512;
  bundle.grid.resize(G);
  const double a = lo - 3.0 * h_max, b = hi + 3.0 * h_max;
  for (int g = 0; g < G; ++g) bundle.grid[g] = a + (b - a) * g / (G - 1);
  bundle.observed = kde_density(observed, bundle.grid, h_obs);
  bundle.replicates.resize(R, G);
  for (int r = 0; r < R; ++r) {
    bundle.replicates.row(r) = kde_density(reps[r], bundle.grid, h_rep[r]).transpose();
  }
  return bundle;
}

CurveSet fitted_curves(const SfpcaModel& model, const PosteriorDraws& draws,
                       const RotatedDraws& rotated, const Standardization& standardization,
                       const LongitudinalDataset& data, int grid_size) {
  CurveSet set;
  set.grid = uniform_grid(grid_size);
  set.time = to_original_time(set.grid, data);
  const Eigen::MatrixXd E = basis_on_grid(model.basis(), set.grid);

  const int S = draws.total_draws();
  Eigen::MatrixXd mean_curves(S, grid_size);
  for (int s = 0; s < S; ++s) {
    const ParameterVector p = model.unpack(draws.draws.row(s).transpose());
    mean_curves.row(s) = (E * p.theta_mu).transpose();
  }
  set.mean_curve = summarize_curves(mean_curves);
  back_transform(set.mean_curve, standardization, true);

  const int k = model.k();
  const int Sv = static_cast<int>(rotated.draws.size());
  set.components.resize(k);
  for (int j = 0; j < k; ++j) {
    Eigen::MatrixXd comp(Sv, grid_size);
    for (int s = 0; s < Sv; ++s) {
      comp.row(s) = (E * rotated.draws[s].theta_star.col(j)).transpose();
    }
    set.components[j] = summarize_curves(comp);
    back_transform(set.components[j], standardization, false);
  }

  // Score spread: SD across subjects of the posterior-mean rotated scores.
  const int N = static_cast<int>(rotated.mean_alpha_star.rows());
  set.score_sd.resize(k);
  for (int j = 0; j < k; ++j) {
    if (N >= 2) {
      const double m = rotated.mean_alpha_star.col(j).mean();
      set.score_sd[j] =
          std::sqrt((rotated.mean_alpha_star.col(j).array() - m).square().sum() / (N - 1));
    } else {
      set.score_sd[j] = 0.0;
    }
  }
  set.overlay_plus.resize(k);
  set.overlay_minus.resize(k);
  for (int j = 0; j < k; ++j) {
    const Eigen::VectorXd shift = set.score_sd[j] * set.components[j].mean;
    set.overlay_plus[j] = set.mean_curve.mean + shift;
    set.overlay_minus[j] = set.mean_curve.mean - shift;
  }
  return set;
}

TrajectoryBand subject_trajectory(const SfpcaModel& model, const PosteriorDraws& draws,
                                  const LongitudinalDataset& data,
                                  const Standardization& standardization, int subject,
                                  int grid_size, bool with_noise, std::uint64_t seed) {
  if (subject < 0 || subject >= data.n_subjects()) throw LookupError("unknown subject index");

  TrajectoryBand out;
  out.subject_id = data.subjects[subject].id;
  out.grid = uniform_grid(grid_size);
  out.time = to_original_time(out.grid, data);
  const Eigen::MatrixXd E = basis_on_grid(model.basis(), out.grid);

  const int S = draws.total_draws();
  Eigen::MatrixXd curves(S, grid_size);
  Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(subject));
  for (int s = 0; s < S; ++s) {
    const ParameterVector p = model.unpack(draws.draws.row(s).transpose());
    Eigen::VectorXd curve = E * (p.theta_mu + p.Theta * p.alpha.row(subject).transpose());
    if (with_noise) {
      const double sigma = p.sigma();
      for (int g = 0; g < grid_size; ++g) curve[g] += rng.normal(0.0, sigma);
    }
    curves.row(s) = curve.transpose();
  }
  out.band = summarize_curves(curves);
  back_transform(out.band, standardization, true);

  const auto& rec = data.subjects[subject];
  out.obs_times = to_original_time(rec.times, data);
  out.obs_values.resize(rec.values.size());
  for (int i = 0; i < rec.values.size(); ++i) {
    out.obs_values[i] =
        standardization.applied ? standardization.to_original(rec.values[i]) : rec.values[i];
  }
  return out;
}

}  // namespace sfpca
