#include "sfpca/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sfpca/errors.hpp"
#include "sfpca/stats.hpp"

namespace sfpca {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Split every chain into first and last halves, dropping the middle draw of
/// an odd-length chain so all sequences share one length.
std::vector<Eigen::VectorXd> split_halves(const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const int n = static_cast<int>(c.size());
    const int half = n / 2;
    if (half < 1) continue;
    out.push_back(c.head(half));
    out.push_back(c.tail(half));
  }
  return out;
}

bool is_constant(const std::vector<Eigen::VectorXd>& seqs) {
  double ref = kNaN;
  for (const auto& s : seqs) {
    for (int i = 0; i < s.size(); ++i) {
      if (std::isnan(ref)) {
        ref = s[i];
      } else if (s[i] != ref) {
        return false;
      }
    }
  }
  return true;
}

/// Between/within variance decomposition over equal-length sequences.
struct VarianceParts {
  double w = 0.0;      // mean within-sequence variance
  double var_plus = 0.0;
  int m = 0, n = 0;
};

VarianceParts variance_parts(const std::vector<Eigen::VectorXd>& seqs) {
  VarianceParts p;
  p.m = static_cast<int>(seqs.size());
  p.n = static_cast<int>(seqs.front().size());
  Eigen::VectorXd means(p.m);
  double w = 0.0;
  for (int j = 0; j < p.m; ++j) {
    means[j] = seqs[j].mean();
    w += (seqs[j].array() - means[j]).square().sum() / (p.n - 1);
  }
  p.w = w / p.m;
  const double grand = means.mean();
  const double b_over_n = (means.array() - grand).square().sum() / (p.m - 1);
  p.var_plus = (p.n - 1.0) / p.n * p.w + b_over_n;
  return p;
}

/**
 * Replace pooled values by normal scores: rank with average ties, then
 * z = Phi^{-1}((rank - 3/8) / (N + 1/4)).
 */
std::vector<Eigen::VectorXd> rank_normalize(const std::vector<Eigen::VectorXd>& seqs) {
  const int m = static_cast<int>(seqs.size());
  const int n = static_cast<int>(seqs.front().size());
  const int total = m * n;
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  auto value = [&](int idx) { return seqs[idx / n][idx % n]; };
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return value(a) < value(b); });

  std::vector<double> rank(total);
  int i = 0;
  while (i < total) {
    int j = i;
    while (j + 1 < total && value(order[j + 1]) == value(order[i])) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // average of 1-based ranks i+1..j+1
    for (int t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }

  std::vector<Eigen::VectorXd> out(m, Eigen::VectorXd(n));
  for (int idx = 0; idx < total; ++idx) {
    out[idx / n][idx % n] = stats::norm_quantile((rank[idx] - 0.375) / (total + 0.25));
  }
  return out;
}

/// ESS of equal-length sequences via Geyer's initial monotone estimator.
double ess_of(const std::vector<Eigen::VectorXd>& seqs) {
  const auto p = variance_parts(seqs);
  const int m = p.m, n = p.n;
  if (p.var_plus <= 0.0) return kNaN;

  Eigen::VectorXd means(m);
  for (int j = 0; j < m; ++j) means[j] = seqs[j].mean();

  // Chain-averaged autocovariance at lag t (1/n normalization).
  auto acov = [&](int t) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      const auto& z = seqs[j];
      double a = 0.0;
      for (int i = 0; i + t < n; ++i) a += (z[i] - means[j]) * (z[i + t] - means[j]);
      s += a / n;
    }
    return s / m;
  };

  const int max_lag = n - 1;
  double rho_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (int t = 1; t + 1 <= max_lag; t += 2) {
    const double rho_a = 1.0 - (p.w - acov(t)) / p.var_plus;
    const double rho_b = 1.0 - (p.w - acov(t + 1)) / p.var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;               // initial positive sequence ends
    pair = std::min(pair, prev_pair);    // enforce monotone non-increase
    prev_pair = pair;
    rho_sum += pair;
  }

  const double tau = 1.0 + 2.0 * rho_sum;
  const double total = static_cast<double>(m) * n;
  double ess = total / std::max(tau, 1.0 / total);
  // Antithetic chains can push the estimate above the draw count; cap it.
  ess = std::min(ess, total * std::log10(std::max(total, 10.0)));
  return ess;
}

}  // namespace

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  const auto seqs = split_halves(chains);
  if (seqs.size() < 2) return kNaN;
  if (is_constant(seqs)) return kNaN;
  const auto p = variance_parts(seqs);
  if (p.w <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(p.var_plus / p.w);
}

double bulk_ess(const std::vector<Eigen::VectorXd>& chains) {
  auto seqs = split_halves(chains);
  if (seqs.empty() || seqs.front().size() < 4) return kNaN;
  if (is_constant(seqs)) return kNaN;
  return ess_of(rank_normalize(seqs));
}

double mcse_mean(const std::vector<Eigen::VectorXd>& chains) {
  const double ess = bulk_ess(chains);
  if (!(ess > 0.0)) return kNaN;
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.data(), c.data() + c.size());
  return stats::sample_sd(pooled) / std::sqrt(ess);
}

std::vector<Eigen::VectorXd> parameter_chains(const PosteriorDraws& draws, int index) {
  if (index < 0 || index >= draws.draws.cols()) {
    throw LookupError("parameter index out of range");
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(draws.chains);
  for (int c = 0; c < draws.chains; ++c) {
    out.push_back(draws.draws.col(index).segment(c * draws.iters, draws.iters));
  }
  return out;
}

ConvergenceReport diagnose(const PosteriorDraws& draws, const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != draws.draws.cols()) {
    throw SpecError("parameter name count does not match draw columns");
  }
  ConvergenceReport report;
  report.rhat_available = draws.chains >= 2 && draws.iters >= 50;
  report.divergences = draws.total_divergences();
  report.divergence_warning = draws.divergence_warning;
  report.parameters.reserve(names.size());

  double max_rhat = -std::numeric_limits<double>::infinity();
  double min_ess = std::numeric_limits<double>::infinity();
  for (int j = 0; j < draws.draws.cols(); ++j) {
    const auto chains = parameter_chains(draws, j);
    ParameterDiagnostic d;
    d.name = names[j];
    d.degenerate = is_constant(chains);
    if (!d.degenerate) {
      d.ess_bulk = bulk_ess(chains);
      if (report.rhat_available) {
        d.rhat = split_rhat(chains);
        if (std::isfinite(d.rhat)) max_rhat = std::max(max_rhat, d.rhat);
        if (d.rhat > 1.01) report.flagged.push_back(d.name);
      }
      if (std::isfinite(d.ess_bulk)) min_ess = std::min(min_ess, d.ess_bulk);
    }
    report.parameters.push_back(std::move(d));
  }
  if (std::isfinite(max_rhat)) report.max_rhat = max_rhat;
  if (std::isfinite(min_ess)) report.min_ess = min_ess;
  return report;
}

}  // namespace sfpca
