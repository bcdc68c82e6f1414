#include "sfpca/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/model.hpp"
#include "sfpca/predict.hpp"
#include "sfpca/rng.hpp"
#include "sfpca/rotation.hpp"

namespace sfpca {

namespace {

constexpr int kCurveGrid = 101;

std::string subject_label(int index, int total) {
  int width = 1;
  for (int v = total; v >= 10; v /= 10) ++width;
  std::string digits = std::to_string(index + 1);
  return "s" + std::string(width - static_cast<int>(digits.size()), '0') + digits;
}

/// Greedy column matching of estimate to truth by |inner product| + sign.
Eigen::MatrixXd match_columns(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  const int k = static_cast<int>(truth.cols());
  std::vector<bool> used(k, false);
  Eigen::MatrixXd matched(estimate.rows(), k);
  for (int j = 0; j < k; ++j) {
    int best = -1;
    double best_abs = -1.0, sign = 1.0;
    for (int c = 0; c < k; ++c) {
      if (used[c]) continue;
      const double ip = truth.col(j).dot(estimate.col(c));
      if (std::abs(ip) > best_abs) {
        best_abs = std::abs(ip);
        best = c;
        sign = ip < 0.0 ? -1.0 : 1.0;
      }
    }
    used[best] = true;
    matched.col(j) = sign * estimate.col(best);
  }
  return matched;
}

}  // namespace

void SimulationTruth::validate() const {
  const int qq = q(), kk = k();
  if (qq < 4) throw ValidationError("truth needs at least 4 basis coefficients");
  if (Theta.rows() != qq) throw ValidationError("Theta row count does not match theta_mu");
  if (kk < 1 || kk >= qq) throw ValidationError("component count must satisfy 1 <= k < q");
  if (D.size() != kk) throw ValidationError("score variance count does not match k");
  if ((D.array() < 0.0).any()) throw ValidationError("score variances must be non-negative");
  if (sigma2 < 0.0) throw ValidationError("noise variance must be non-negative");
  if (N < 1) throw ValidationError("subject count must be >= 1");
  if (N_T < 1) throw ValidationError("candidate time count must be >= 1");
  if (!(mu_T > 0.0) || mu_T > N_T) throw ValidationError("mean visit count must lie in (0, N_T]");
  if (static_cast<int>(internal_knots.size()) + 4 != qq) {
    throw ValidationError("internal knot count does not match basis dimension");
  }
  const Eigen::MatrixXd gram = Theta.transpose() * Theta;
  if ((gram - Eigen::MatrixXd::Identity(kk, kk)).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("truth loadings are not orthonormal");
  }
}

SimulationTruth default_truth() {
  SimulationTruth t;
  t.internal_knots = {0.5};
  t.theta_mu.resize(5);
  t.theta_mu << 0.5, 1.2, -0.8, 0.9, -0.3;

  Eigen::MatrixXd raw(5, 2);
  raw.col(0) << 1.0, 0.8, 0.6, 0.4, 0.2;
  raw.col(1) << 1.0, -0.5, -1.0, 0.5, 1.0;
  t.Theta.resize(5, 2);
  t.Theta.col(0) = raw.col(0).normalized();
  Eigen::VectorXd v = raw.col(1) - t.Theta.col(0).dot(raw.col(1)) * t.Theta.col(0);
  t.Theta.col(1) = v.normalized();

  t.D.resize(2);
  t.D << 4.0, 1.0;
  t.sigma2 = 0.25;
  t.N = 100;
  t.N_T = 10;
  t.mu_T = 10.0;
  t.seed = 42;
  t.validate();
  return t;
}

SimulationTruth truth_from_json_text(const std::string& text) {
  SimulationTruth t;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    const auto theta_mu = j.at("theta_mu").get<std::vector<double>>();
    t.theta_mu = Eigen::Map<const Eigen::VectorXd>(theta_mu.data(), theta_mu.size());

    const auto rows = j.at("Theta").get<std::vector<std::vector<double>>>();
    const int q = static_cast<int>(rows.size());
    const int k = q > 0 ? static_cast<int>(rows[0].size()) : 0;
    t.Theta.resize(q, k);
    for (int r = 0; r < q; ++r) {
      if (static_cast<int>(rows[r].size()) != k)
        throw FormatError("truth JSON: ragged Theta rows");
      for (int c = 0; c < k; ++c) t.Theta(r, c) = rows[r][c];
    }

    const auto d = j.at("D").get<std::vector<double>>();
    t.D = Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());
    t.sigma2 = j.at("sigma2").get<double>();
    t.N = j.at("N").get<int>();
    t.N_T = j.at("N_T").get<int>();
    t.mu_T = j.at("mu_T").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.internal_knots = j.at("internal_knots").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("truth JSON: ") + e.what());
  }
  t.validate();
  return t;
}

std::string truth_to_json_text(const SimulationTruth& truth) {
  nlohmann::ordered_json j;
  j["theta_mu"] = std::vector<double>(truth.theta_mu.data(),
                                      truth.theta_mu.data() + truth.theta_mu.size());
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int r = 0; r < truth.Theta.rows(); ++r) {
    std::vector<double> row(truth.Theta.cols());
    for (int c = 0; c < truth.Theta.cols(); ++c) row[c] = truth.Theta(r, c);
    rows.push_back(row);
  }
  j["Theta"] = std::move(rows);
  j["D"] = std::vector<double>(truth.D.data(), truth.D.data() + truth.D.size());
  j["sigma2"] = truth.sigma2;
  j["N"] = truth.N;
  j["N_T"] = truth.N_T;
  j["mu_T"] = truth.mu_T;
  j["seed"] = truth.seed;
  j["internal_knots"] = truth.internal_knots;
  return j.dump(2) + "\n";
}

OrthonormalBasis truth_basis(const SimulationTruth& truth) {
  return OrthonormalBasis(truth.internal_knots);
}

LongitudinalDataset generate(const SimulationTruth& truth) {
  truth.validate();
  const OrthonormalBasis basis = truth_basis(truth);
  Rng rng = Rng::stream(truth.seed, 0);

  Eigen::VectorXd slots(truth.N_T);
  if (truth.N_T == 1) {
    slots[0] = 0.5;
  } else {
    for (int j = 0; j < truth.N_T; ++j) slots[j] = static_cast<double>(j) / (truth.N_T - 1);
  }

  std::vector<std::string> ids;
  std::vector<double> times, values;
  const Eigen::VectorXd sqrt_d = truth.D.cwiseSqrt();
  for (int i = 0; i < truth.N; ++i) {
    int n;
    do {
      n = rng.poisson(truth.mu_T);
    } while (n == 0);
    n = std::min(n, truth.N_T);
    const std::vector<int> chosen = rng.sample_without_replacement(truth.N_T, n);

    Eigen::VectorXd alpha(truth.k());
    for (int j = 0; j < truth.k(); ++j) alpha[j] = sqrt_d[j] * rng.normal();
    const Eigen::VectorXd coeff = truth.theta_mu + truth.Theta * alpha;
    const double noise_sd = std::sqrt(truth.sigma2);
    const std::string id = subject_label(i, truth.N);
    for (int idx : chosen) {
      const double t = slots[idx];
      ids.push_back(id);
      times.push_back(t);
      values.push_back(basis.evaluate(t).dot(coeff) + noise_sd * rng.normal());
    }
  }
  return make_dataset(ids, times, values);
}

RecoveryRecord score_recovery(const Eigen::VectorXd& theta_mu_hat,
                              const Eigen::MatrixXd& theta_star_hat,
                              const OrthonormalBasis& basis, const SimulationTruth& truth) {
  if (theta_mu_hat.size() != truth.q()) throw ScoringError("mean coefficient length mismatch");
  if (theta_star_hat.rows() != truth.q() || theta_star_hat.cols() != truth.k()) {
    throw ScoringError("loading matrix shape does not match the truth");
  }
  if (basis.dim() != truth.q()) throw ScoringError("basis dimension does not match the truth");

  RecoveryRecord rec;
  rec.mse_theta_mu = (theta_mu_hat - truth.theta_mu).squaredNorm() / truth.q();

  const Eigen::MatrixXd matched = match_columns(theta_star_hat, truth.Theta);
  rec.mse_theta = (matched - truth.Theta).squaredNorm() / (truth.q() * truth.k());

  const OrthonormalBasis tb = truth_basis(truth);
  double mean_sq = 0.0, fpc_sq = 0.0;
  for (int g = 0; g < kCurveGrid; ++g) {
    const double t = static_cast<double>(g) / (kCurveGrid - 1);
    const Eigen::VectorXd b_fit = basis.evaluate(t);
    const Eigen::VectorXd b_true = tb.evaluate(t);
    const double dm = b_fit.dot(theta_mu_hat) - b_true.dot(truth.theta_mu);
    mean_sq += dm * dm;
    for (int j = 0; j < truth.k(); ++j) {
      const double df = b_fit.dot(matched.col(j)) - b_true.dot(truth.Theta.col(j));
      fpc_sq += df * df;
    }
  }
  rec.curve_mse_mean = mean_sq / kCurveGrid;
  rec.curve_mse_fpc = fpc_sq / (kCurveGrid * truth.k());
  return rec;
}

RepResult run_rep(const SimulationTruth& truth, const SamplerConfig& config) {
  RepResult result;
  try {
    const LongitudinalDataset data = generate(truth);
    auto [std_data, st] = standardize(data);
    const OrthonormalBasis basis = truth_basis(truth);
    const SfpcaModel model(basis, std_data, truth.k());

    SamplerConfig cfg = config;
    cfg.seed = derive_seed(truth.seed, 9001);
    const PosteriorDraws draws = nuts_sample(model, cfg);

    const int S = draws.total_draws();
    std::vector<Eigen::MatrixXd> thetas, alphas;
    thetas.reserve(S);
    alphas.reserve(S);
    Eigen::VectorXd theta_mu_std = Eigen::VectorXd::Zero(truth.q());
    for (int s = 0; s < S; ++s) {
      const ParameterVector p = model.unpack(draws.draws.row(s).transpose());
      theta_mu_std += p.theta_mu;
      thetas.push_back(p.Theta);
      alphas.push_back(p.alpha);
    }
    theta_mu_std /= S;
    const RotatedDraws rotated = align_draws(thetas, alphas);

    // Back to original outcome scale; the constant shift is exact because
    // constants lie in the spline space.
    const Eigen::VectorXd gamma =
        basis.project(Eigen::VectorXd::Ones(basis.quad_nodes().size()));
    const Eigen::VectorXd theta_mu_hat = st.sd * theta_mu_std + st.mean * gamma;

    result.record = score_recovery(theta_mu_hat, rotated.mean_theta_star, basis, truth);
    result.record.realized_missingness =
        1.0 - static_cast<double>(data.n_total) / (static_cast<double>(truth.N) * truth.N_T);

    const CurveSet curves = fitted_curves(model, draws, rotated, st, std_data, kCurveGrid);
    const OrthonormalBasis tb = truth_basis(truth);
    int covered = 0;
    for (int g = 0; g < kCurveGrid; ++g) {
      const double mu_true = tb.evaluate(curves.grid[g]).dot(truth.theta_mu);
      if (mu_true >= curves.mean_curve.lower[g] && mu_true <= curves.mean_curve.upper[g]) {
        ++covered;
      }
    }
    result.record.band_coverage_mean = static_cast<double>(covered) / kCurveGrid;
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  return result;
}

double GridResult::scenario_mean(int scenario, double RecoveryRecord::*field) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& row : rows) {
    if (row.scenario == scenario && row.ok) {
      sum += row.record.*field;
      ++n;
    }
  }
  if (n == 0) throw ScoringError("no successful replicates for scenario");
  return sum / n;
}

GridResult run_grid(const std::vector<SimulationTruth>& scenarios, int reps,
                    const SamplerConfig& config, std::uint64_t master_seed) {
  if (reps < 1) throw ConfigError("replicate count must be >= 1");
  GridResult grid;
  for (int si = 0; si < static_cast<int>(scenarios.size()); ++si) {
    const std::uint64_t scenario_seed = derive_seed(master_seed, static_cast<std::uint64_t>(si) + 1);
    for (int r = 0; r < reps; ++r) {
      SimulationTruth truth = scenarios[si];
      truth.seed = derive_seed(scenario_seed, static_cast<std::uint64_t>(r) + 1);
      RepResult res = run_rep(truth, config);
      res.scenario = si;
      res.rep = r;
      if (!res.ok) ++grid.failures;
      grid.rows.push_back(std::move(res));
    }
  }
  return grid;
}

}  // namespace sfpca
