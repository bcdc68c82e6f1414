#include "sfpca/psis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfpca/errors.hpp"
#include "sfpca/stats.hpp"

namespace sfpca {

namespace {

constexpr double kFlatTailKhat = -10.0;  // finite floor for a zero-width tail

}  // namespace

GpdFit fit_gpd_tail(const std::vector<double>& tail) {
  const int n = static_cast<int>(tail.size());
  if (n < 5) throw TailError("tail has fewer than 5 exceedances");
  std::vector<double> x = tail;
  std::sort(x.begin(), x.end());
  if (x.front() < 0.0) throw TailError("negative exceedance in tail");
  if (!(x.back() > 0.0)) throw TailError("degenerate tail: all exceedances zero");

  // Quartile pivot for the grid; fall back past any zero ties.
  const int pivot = std::max(0, static_cast<int>(std::floor(n / 4.0 + 0.5)) - 1);
  double xstar = x[pivot];
  if (!(xstar > 0.0)) {
    xstar = *std::find_if(x.begin(), x.end(), [](double v) { return v > 0.0; });
  }

  const int m = 30 + static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  Eigen::VectorXd theta(m), logl(m);
  for (int j = 0; j < m; ++j) {
    theta[j] = 1.0 / x.back() + (1.0 - std::sqrt(m / (j + 0.5))) / (3.0 * xstar);
    double k = 0.0;
    for (double v : x) k += std::log1p(-theta[j] * v);
    k /= n;
    logl[j] = n * (std::log(-theta[j] / k) - k - 1.0);
  }
  const double lse = stats::log_sum_exp(logl);
  double theta_hat = 0.0;
  for (int j = 0; j < m; ++j) theta_hat += std::exp(logl[j] - lse) * theta[j];

  GpdFit fit;
  fit.M = n;
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  fit.khat = k / n;
  fit.sigma_hat = -fit.khat / theta_hat;
  if (!(fit.sigma_hat > 0.0) || !std::isfinite(fit.khat)) {
    throw TailError("generalized Pareto fit did not produce a valid scale");
  }
  return fit;
}

double gpd_quantile(double p, double khat, double sigma) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("quantile probability must lie in [0,1)");
  if (std::abs(khat) < 1e-12) return -sigma * std::log1p(-p);
  return sigma / khat * std::expm1(-khat * std::log1p(-p));
}

SmoothedWeights smooth_weights(const Eigen::VectorXd& log_ratios) {
  const int S = static_cast<int>(log_ratios.size());
  const int M = std::max(5, static_cast<int>(std::ceil(0.2 * S)));
  if (S < M + 1) throw TailError("too few draws for tail smoothing");
  if (!log_ratios.allFinite()) throw SpecError("non-finite log importance ratio");

  SmoothedWeights out;
  out.M = M;
  const double shift = log_ratios.maxCoeff();
  Eigen::VectorXd w = (log_ratios.array() - shift).exp();

  std::vector<int> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w[a] < w[b]; });

  const double u = w[order[S - M - 1]];
  std::vector<double> exceed(M);
  for (int z = 0; z < M; ++z) exceed[z] = w[order[S - M + z]] - u;

  if (*std::max_element(exceed.begin(), exceed.end()) > 0.0) {
    const GpdFit fit = fit_gpd_tail(exceed);
    out.khat = fit.khat;
    for (int z = 0; z < M; ++z) {
      w[order[S - M + z]] = u + gpd_quantile((z + 0.5) / M, fit.khat, fit.sigma_hat);
    }
  } else {
    out.khat = kFlatTailKhat;  // flat tail: weights left as they are
  }

  const double cap = std::pow(static_cast<double>(S), 0.75) * w.mean();
  w = w.cwiseMin(cap);
  out.log_weights = w.array().log() + shift;
  return out;
}

Eigen::MatrixXd importance_log_ratios(const Eigen::MatrixXd& loglik) {
  if (!loglik.allFinite()) throw SpecError("log-likelihood matrix has non-finite entries");
  return -loglik;
}

LooReport compute_loo(const Eigen::MatrixXd& loglik) {
  const int S = static_cast<int>(loglik.rows());
  const int N = static_cast<int>(loglik.cols());
  if (S < 1 || N < 1) throw SpecError("empty log-likelihood matrix");
  const Eigen::MatrixXd log_r = importance_log_ratios(loglik);

  LooReport report;
  report.S = S;
  report.pointwise.resize(N);
  report.khat.resize(N);
  for (int i = 0; i < N; ++i) {
    const SmoothedWeights sw = smooth_weights(log_r.col(i));
    report.M = sw.M;
    const Eigen::VectorXd num = sw.log_weights + loglik.col(i);
    report.pointwise[i] = stats::log_sum_exp(num) - stats::log_sum_exp(sw.log_weights);
    report.khat[i] = sw.khat;
    if (sw.khat > 0.7) {
      ++report.n_bad;
      report.bad_units.push_back(i);
    }
  }
  report.elppd = report.pointwise.sum();
  double var = 0.0;
  if (N >= 2) {
    const double m = report.pointwise.mean();
    var = (report.pointwise.array() - m).square().sum() / (N - 1);
  }
  report.se = std::sqrt(N * var);
  return report;
}

ComparisonTable compare_models(const std::vector<LooReport>& reports) {
  if (reports.empty()) throw ComparisonError("no models to compare");
  const int N = static_cast<int>(reports.front().pointwise.size());
  for (const auto& r : reports) {
    if (static_cast<int>(r.pointwise.size()) != N) {
      throw ComparisonError("models were scored on different unit counts");
    }
  }

  int best = 0;
  for (int i = 1; i < static_cast<int>(reports.size()); ++i) {
    if (reports[i].elppd > reports[best].elppd) best = i;
  }

  ComparisonTable table;
  table.best_index = best;
  for (int i = 0; i < static_cast<int>(reports.size()); ++i) {
    ModelComparison row;
    row.index = i;
    row.label = reports[i].label;
    row.elppd = reports[i].elppd;
    if (i == best) {
      row.tied = true;
    } else {
      row.delta = reports[i].elppd - reports[best].elppd;
      const Eigen::VectorXd diff = reports[i].pointwise - reports[best].pointwise;
      double var = 0.0;
      if (N >= 2) {
        const double m = diff.mean();
        var = (diff.array() - m).square().sum() / (N - 1);
      }
      row.se_delta = std::sqrt(N * var);
      row.tied = std::abs(row.delta) <= row.se_delta;
    }
    table.rows.push_back(std::move(row));
  }

  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ModelComparison& a, const ModelComparison& b) {
                     return a.elppd > b.elppd;
                   });

  // Recommendation: among ties with the best, prefer the most parsimonious.
  int rec = best;
  for (const auto& row : table.rows) {
    if (!row.tied) continue;
    const auto& cand = reports[row.index];
    const auto& cur = reports[rec];
    if (cand.n_pcs < cur.n_pcs ||
        (cand.n_pcs == cur.n_pcs && cand.n_knots < cur.n_knots)) {
      rec = row.index;
    }
  }
  table.recommended_index = rec;
  return table;
}

}  // namespace sfpca
