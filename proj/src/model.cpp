#include "sfpca/model.hpp"

#include <cmath>

#include "sfpca/errors.hpp"

namespace sfpca {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

SfpcaModel::SfpcaModel(const OrthonormalBasis& basis, const LongitudinalDataset& data, int k)
    : basis_(basis), k_(k) {
  if (k < 1 || k >= basis.dim()) {
    throw SpecError("need 1 <= k < q; got k=" + std::to_string(k) +
                    ", q=" + std::to_string(basis.dim()));
  }
  design_.reserve(data.subjects.size());
  outcomes_.reserve(data.subjects.size());
  for (const auto& s : data.subjects) {
    design_.push_back(basis.evaluate(s.times));
    outcomes_.push_back(s.values);
    n_total_ += s.n_obs();
  }
}

void SfpcaModel::check_packed(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) {
    throw SpecError("packed parameter length " + std::to_string(x.size()) +
                    " does not match model dimension " + std::to_string(dim()));
  }
  if (!x.allFinite()) throw EvaluationError("non-finite parameter vector");
}

ParameterVector SfpcaModel::unpack(const Eigen::VectorXd& packed) const {
  check_packed(packed);
  const int q = basis_.dim();
  const int n = n_subjects();
  ParameterVector p;
  p.theta_mu = packed.head(q);
  p.Theta = Eigen::Map<const Eigen::MatrixXd>(packed.data() + q, q, k_);
  p.alpha = Eigen::Map<const Eigen::MatrixXd>(packed.data() + q + q * k_, k_, n).transpose();
  p.log_sigma = packed[packed.size() - 1];
  return p;
}

Eigen::VectorXd SfpcaModel::pack(const ParameterVector& p) const {
  const int q = basis_.dim();
  const int n = n_subjects();
  if (p.theta_mu.size() != q || p.Theta.rows() != q || p.Theta.cols() != k_ ||
      p.alpha.rows() != n || p.alpha.cols() != k_) {
    throw SpecError("parameter blocks do not match model dimensions");
  }
  Eigen::VectorXd packed(dim());
  packed.head(q) = p.theta_mu;
  Eigen::Map<Eigen::MatrixXd>(packed.data() + q, q, k_) = p.Theta;
  Eigen::Map<Eigen::MatrixXd>(packed.data() + q + q * k_, k_, n) = p.alpha.transpose();
  packed[packed.size() - 1] = p.log_sigma;
  return packed;
}

std::vector<std::string> SfpcaModel::parameter_names() const {
  const int q = basis_.dim();
  std::vector<std::string> names;
  names.reserve(dim());
  for (int j = 0; j < q; ++j) names.push_back("theta_mu." + std::to_string(j + 1));
  for (int l = 0; l < k_; ++l) {
    for (int j = 0; j < q; ++j) {
      names.push_back("Theta." + std::to_string(j + 1) + "." + std::to_string(l + 1));
    }
  }
  for (int i = 0; i < n_subjects(); ++i) {
    for (int l = 0; l < k_; ++l) {
      names.push_back("alpha." + std::to_string(i + 1) + "." + std::to_string(l + 1));
    }
  }
  names.push_back("log_sigma");
  return names;
}

double SfpcaModel::log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  check_packed(x);
  const int q = basis_.dim();
  const int n = n_subjects();
  const auto theta_mu = x.head(q);
  const Eigen::Map<const Eigen::MatrixXd> Theta(x.data() + q, q, k_);
  const Eigen::Map<const Eigen::MatrixXd> alpha_t(x.data() + q + q * k_, k_, n);  // k x N
  const double log_sigma = x[x.size() - 1];
  const double sigma = std::exp(log_sigma);
  const double inv_var = std::exp(-2.0 * log_sigma);

  double lp = 0.0;
  Eigen::VectorXd g_theta_mu;
  Eigen::MatrixXd g_Theta;
  Eigen::MatrixXd g_alpha_t;
  double g_log_sigma = 0.0;
  if (grad) {
    g_theta_mu = Eigen::VectorXd::Zero(q);
    g_Theta = Eigen::MatrixXd::Zero(q, k_);
    g_alpha_t = Eigen::MatrixXd::Zero(k_, n);
  }

  // Likelihood.
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd& B = design_[i];
    const auto a_i = alpha_t.col(i);
    const Eigen::VectorXd resid = outcomes_[i] - B * (theta_mu + Theta * a_i);
    const double r2 = resid.squaredNorm();
    rss += r2;
    const double n_i = static_cast<double>(B.rows());
    lp += -0.5 * n_i * kLog2Pi - n_i * log_sigma - 0.5 * r2 * inv_var;
    if (grad) {
      const Eigen::VectorXd bt_r = B.transpose() * resid;  // q
      g_theta_mu.noalias() += inv_var * bt_r;
      g_Theta.noalias() += inv_var * bt_r * a_i.transpose();
      g_alpha_t.col(i).noalias() += inv_var * (Theta.transpose() * bt_r);
    }
  }

  // Priors: standard normal on theta_mu, Theta columns, scores.
  const double npar_gauss = static_cast<double>(q + q * k_ + n * k_);
  lp += -0.5 * npar_gauss * kLog2Pi;
  lp += -0.5 * theta_mu.squaredNorm();
  lp += -0.5 * Theta.squaredNorm();
  lp += -0.5 * alpha_t.squaredNorm();

  // Half-Cauchy(0,1) on sigma plus the log-sigma change of variables.
  const double sigma2 = sigma * sigma;
  lp += std::log(2.0 / M_PI) - std::log1p(sigma2);
  lp += log_sigma;

  if (grad) {
    g_theta_mu -= theta_mu;
    g_Theta -= Theta;
    g_alpha_t -= alpha_t;
    // d/dlog_sigma of the likelihood, prior and Jacobian terms.
    g_log_sigma = -static_cast<double>(n_total_) + rss * inv_var;
    g_log_sigma += -2.0 * sigma2 / (1.0 + sigma2);
    g_log_sigma += 1.0;

    grad->resize(dim());
    grad->head(q) = g_theta_mu;
    Eigen::Map<Eigen::MatrixXd>(grad->data() + q, q, k_) = g_Theta;
    Eigen::Map<Eigen::MatrixXd>(grad->data() + q + q * k_, k_, n) = g_alpha_t;
    (*grad)[grad->size() - 1] = g_log_sigma;
  }
  return lp;
}

Eigen::VectorXd SfpcaModel::grad_log_posterior(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g;
  log_density(x, &g);
  return g;
}

Eigen::VectorXd SfpcaModel::pointwise_loglik(const Eigen::VectorXd& x) const {
  check_packed(x);
  const int q = basis_.dim();
  const int n = n_subjects();
  const auto theta_mu = x.head(q);
  const Eigen::Map<const Eigen::MatrixXd> Theta(x.data() + q, q, k_);
  const Eigen::Map<const Eigen::MatrixXd> alpha_t(x.data() + q + q * k_, k_, n);
  const double log_sigma = x[x.size() - 1];
  const double inv_var = std::exp(-2.0 * log_sigma);

  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd& B = design_[i];
    const Eigen::VectorXd resid = outcomes_[i] - B * (theta_mu + Theta * alpha_t.col(i));
    const double n_i = static_cast<double>(B.rows());
    out[i] = -0.5 * n_i * kLog2Pi - n_i * log_sigma - 0.5 * resid.squaredNorm() * inv_var;
  }
  return out;
}

double SfpcaModel::log_likelihood(const Eigen::VectorXd& x) const {
  return pointwise_loglik(x).sum();
}

}  // namespace sfpca
