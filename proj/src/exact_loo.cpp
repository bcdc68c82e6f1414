#include "sfpca/exact_loo.hpp"

#include <cmath>
#include <vector>

#include "sfpca/diagnostics.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/model.hpp"
#include "sfpca/rng.hpp"
#include "sfpca/stats.hpp"

namespace sfpca {

namespace {

/// log N(y; B theta_mu, B Theta Theta^T B^T + sigma^2 I)
double gaussian_marginal(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& theta_mu, const Eigen::MatrixXd& Theta,
                         double sigma) {
  const int n = static_cast<int>(y.size());
  const Eigen::MatrixXd BT = B * Theta;
  Eigen::MatrixXd cov = BT * BT.transpose();
  cov.diagonal().array() += sigma * sigma;
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw EvaluationError("held-out marginal covariance is not positive definite");
  }
  const Eigen::VectorXd r = y - B * theta_mu;
  const Eigen::VectorXd z = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (n * std::log(2.0 * M_PI) + log_det + z.squaredNorm());
}

}  // namespace

ExactLooResult exact_loo(const OrthonormalBasis& basis, const LongitudinalDataset& data, int k,
                         const SamplerConfig& config) {
  const int N = data.n_subjects();
  if (N < 1) throw SpecError("exact LOO needs at least one subject");

  ExactLooResult out;
  double mcse_sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto& held = data.subjects[i];
    Eigen::MatrixXd B(held.n_obs(), basis.dim());
    for (int r = 0; r < held.n_obs(); ++r) B.row(r) = basis.evaluate(held.times[r]).transpose();

    const LongitudinalDataset rest = data.without_subject(i);
    const SfpcaModel refit(basis, rest, k);
    SamplerConfig cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i) + 1);
    const PosteriorDraws draws = nuts_sample(refit, cfg);

    const int S = draws.total_draws();
    Eigen::VectorXd l(S);
    for (int s = 0; s < S; ++s) {
      const ParameterVector p = refit.unpack(draws.draws.row(s).transpose());
      l[s] = gaussian_marginal(B, held.values, p.theta_mu, p.Theta, p.sigma());
    }

    ExactLooUnit unit;
    unit.subject = i;
    unit.log_pred = stats::log_sum_exp(l) - std::log(static_cast<double>(S));

    // Delta-method MCSE of log mean(a), a = exp(l - max), with an effective
    // sample size from the per-chain a series.
    const double m = l.maxCoeff();
    const Eigen::VectorXd a = (l.array() - m).exp();
    const double abar = a.mean();
    const double a_var = S > 1 ? (a.array() - abar).square().sum() / (S - 1) : 0.0;
    std::vector<Eigen::VectorXd> a_chains;
    for (int c = 0; c < draws.chains; ++c) {
      a_chains.push_back(a.segment(c * draws.iters, draws.iters));
    }
    double ess = bulk_ess(a_chains);
    if (!(ess > 0.0)) ess = static_cast<double>(S);
    unit.mcse = std::sqrt(a_var / ess) / abar;

    std::vector<Eigen::VectorXd> lp_chains;
    for (int c = 0; c < draws.chains; ++c) {
      lp_chains.push_back(draws.lp.segment(c * draws.iters, draws.iters));
    }
    unit.max_rhat = split_rhat(lp_chains);
    unit.converged = !(unit.max_rhat > 1.1) && !draws.divergence_warning;

    out.elppd += unit.log_pred;
    mcse_sq += unit.mcse * unit.mcse;
    out.units.push_back(std::move(unit));
  }
  out.mcse = std::sqrt(mcse_sq);
  return out;
}

}  // namespace sfpca
