#include "sfpca/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sfpca/errors.hpp"

namespace sfpca {

namespace {

/// Per-draw variance-explained shares: lambda_j Var_i(score_ij) normalized
/// across components. Falls back to raw eigenvalue shares when the score
/// variances carry no information (fewer than two subjects, or all zero).
Eigen::VectorXd ve_shares(const RotatedDraw& d) {
  const int k = static_cast<int>(d.eigenvalues.size());
  Eigen::VectorXd weighted(k);
  const int n = static_cast<int>(d.alpha_star.rows());
  for (int j = 0; j < k; ++j) {
    double var = 0.0;
    if (n >= 2) {
      const double m = d.alpha_star.col(j).mean();
      var = (d.alpha_star.col(j).array() - m).square().sum() / (n - 1);
    }
    weighted[j] = d.eigenvalues[j] * var;
  }
  double total = weighted.sum();
  if (!(total > 0.0)) {
    weighted = d.eigenvalues;
    total = weighted.sum();
  }
  return weighted / total;
}

/// Greedy permutation/sign assignment of draw columns to reference columns.
void align_to(const Eigen::MatrixXd& reference, RotatedDraw& d) {
  const int k = static_cast<int>(reference.cols());
  std::vector<int> pick(k, -1);
  std::vector<double> sign(k, 1.0);
  std::vector<bool> used(k, false);
  for (int j = 0; j < k; ++j) {
    int best = -1;
    double best_abs = -1.0;
    for (int c = 0; c < k; ++c) {
      if (used[c]) continue;
      const double ip = reference.col(j).dot(d.theta_star.col(c));
      if (std::abs(ip) > best_abs) {
        best_abs = std::abs(ip);
        best = c;
        sign[j] = ip < 0.0 ? -1.0 : 1.0;
      }
    }
    pick[j] = best;
    used[best] = true;
  }

  Eigen::MatrixXd theta(d.theta_star.rows(), k);
  Eigen::MatrixXd alpha(d.alpha_star.rows(), k);
  Eigen::VectorXd lambda(k);
  for (int j = 0; j < k; ++j) {
    theta.col(j) = sign[j] * d.theta_star.col(pick[j]);
    alpha.col(j) = sign[j] * d.alpha_star.col(pick[j]);
    lambda[j] = d.eigenvalues[pick[j]];
  }
  d.theta_star = std::move(theta);
  d.alpha_star = std::move(alpha);
  d.eigenvalues = std::move(lambda);
}

void permute_columns(RotatedDraw& d, const std::vector<int>& order) {
  const int k = static_cast<int>(order.size());
  Eigen::MatrixXd theta(d.theta_star.rows(), k);
  Eigen::MatrixXd alpha(d.alpha_star.rows(), k);
  Eigen::VectorXd lambda(k);
  for (int j = 0; j < k; ++j) {
    theta.col(j) = d.theta_star.col(order[j]);
    alpha.col(j) = d.alpha_star.col(order[j]);
    lambda[j] = d.eigenvalues[order[j]];
  }
  d.theta_star = std::move(theta);
  d.alpha_star = std::move(alpha);
  d.eigenvalues = std::move(lambda);
}

}  // namespace

RotatedDraw rotate_draw(const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& alpha) {
  const int q = static_cast<int>(Theta.rows());
  const int k = static_cast<int>(Theta.cols());
  if (alpha.cols() != k) throw SpecError("alpha column count does not match Theta");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Theta * Theta.transpose());
  if (eig.info() != Eigen::Success) throw RankError("eigendecomposition failed");

  // SelfAdjointEigenSolver orders ascending; take the top k in reverse.
  RotatedDraw out;
  out.theta_star.resize(q, k);
  out.eigenvalues.resize(k);
  for (int j = 0; j < k; ++j) {
    out.theta_star.col(j) = eig.eigenvectors().col(q - 1 - j);
    out.eigenvalues[j] = eig.eigenvalues()[q - 1 - j];
  }
  const double lead = out.eigenvalues[0];
  if (!(out.eigenvalues[k - 1] > 1e-12 * lead)) {
    throw RankError("loading matrix is rank deficient: eigenvalue " + std::to_string(k) +
                    " is below 1e-12 of the largest");
  }
  out.alpha_star = alpha * Theta.transpose() * out.theta_star;
  return out;
}

RotatedDraws align_draws(const std::vector<Eigen::MatrixXd>& Thetas,
                         const std::vector<Eigen::MatrixXd>& alphas) {
  if (Thetas.size() != alphas.size()) throw SpecError("draw count mismatch");
  if (Thetas.empty()) throw RankError("no draws to rotate");

  RotatedDraws out;
  for (std::size_t s = 0; s < Thetas.size(); ++s) {
    try {
      out.draws.push_back(rotate_draw(Thetas[s], alphas[s]));
      out.source_index.push_back(static_cast<int>(s));
    } catch (const RankError&) {
      ++out.n_excluded;
    }
  }
  if (out.draws.empty()) throw RankError("all draws rank deficient, nothing to align");

  const Eigen::MatrixXd reference = out.draws.front().theta_star;
  for (std::size_t s = 1; s < out.draws.size(); ++s) align_to(reference, out.draws[s]);

  const int k = static_cast<int>(reference.cols());
  const int S = static_cast<int>(out.draws.size());
  out.variance_explained.resize(S, k);
  for (int s = 0; s < S; ++s) out.variance_explained.row(s) = ve_shares(out.draws[s]).transpose();

  // Fix the global component order by descending posterior-mean share.
  Eigen::VectorXd mean_ve = out.variance_explained.colwise().mean();
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return mean_ve[a] > mean_ve[b]; });
  for (auto& d : out.draws) permute_columns(d, order);
  Eigen::MatrixXd ve(S, k);
  for (int j = 0; j < k; ++j) ve.col(j) = out.variance_explained.col(order[j]);
  out.variance_explained = std::move(ve);
  out.mean_variance_explained = out.variance_explained.colwise().mean();

  Eigen::VectorXd lambda_share_sum = Eigen::VectorXd::Zero(k);
  out.mean_theta_star = Eigen::MatrixXd::Zero(reference.rows(), k);
  out.mean_alpha_star = Eigen::MatrixXd::Zero(out.draws.front().alpha_star.rows(), k);
  for (const auto& d : out.draws) {
    lambda_share_sum += d.eigenvalues / d.eigenvalues.sum();
    out.mean_theta_star += d.theta_star;
    out.mean_alpha_star += d.alpha_star;
  }
  out.mean_eigenvalue_share = lambda_share_sum / S;
  out.mean_theta_star /= S;
  out.mean_alpha_star /= S;
  return out;
}

}  // namespace sfpca
