#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sfpca {

/// One posterior draw after the identifiability rotation.
struct RotatedDraw {
  Eigen::MatrixXd theta_star;   // q x k, orthonormal columns
  Eigen::MatrixXd alpha_star;   // N x k rotated scores
  Eigen::VectorXd eigenvalues;  // k eigenvalues of Theta Theta^T for this draw
};

/**
 * Rotate a single draw: eigendecompose the q x q matrix Theta Theta^T, take
 * the k leading eigenvectors (descending eigenvalue) as theta_star and set
 * alpha_star rows to theta_star^T Theta alpha_i. The reconstruction
 * theta_star alpha_star_i = Theta alpha_i is exact because theta_star spans
 * col(Theta). Throws RankError when eigenvalue k falls below 1e-12 times the
 * largest.
 */
RotatedDraw rotate_draw(const Eigen::MatrixXd& Theta, const Eigen::MatrixXd& alpha);

/// Rotated posterior with per-draw loadings/scores aligned across draws.
struct RotatedDraws {
  std::vector<RotatedDraw> draws;     // valid draws only
  std::vector<int> source_index;      // original draw index of each entry
  int n_excluded = 0;                 // rank-deficient draws dropped

  Eigen::MatrixXd variance_explained;       // draws x k per-draw shares
  Eigen::VectorXd mean_variance_explained;  // k, non-increasing
  Eigen::VectorXd mean_eigenvalue_share;    // k, raw eigenvalue shares
  Eigen::MatrixXd mean_theta_star;          // q x k posterior mean loadings
  Eigen::MatrixXd mean_alpha_star;          // N x k posterior mean scores
};

/**
 * Rotate every draw, drop rank-deficient ones, and align columns across
 * draws: the first valid draw is the reference; each draw's columns are
 * greedily reordered to maximize |inner product| with the reference columns
 * and sign-flipped so the inner product is positive. Scores and eigenvalues
 * are permuted identically, so reconstructions are untouched. Components are
 * finally reordered globally by descending posterior-mean variance
 * explained. Throws RankError when no draw survives.
 */
RotatedDraws align_draws(const std::vector<Eigen::MatrixXd>& Thetas,
                         const std::vector<Eigen::MatrixXd>& alphas);

}  // namespace sfpca
