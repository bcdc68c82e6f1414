#include "sfpca/sampler.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>

#include "sfpca/errors.hpp"
#include "sfpca/rng.hpp"

namespace sfpca {

namespace {

constexpr double kMaxEnergyError = 1000.0;  // divergence threshold
constexpr int kInitBuffer = 75;
constexpr int kTermBuffer = 50;
constexpr int kBaseWindow = 25;

double log_sum_exp2(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int t = 0;
  static constexpr double gamma = 0.05;
  static constexpr double t0 = 10.0;
  static constexpr double kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    t = 0;
  }

  void update(double accept, double target) {
    ++t;
    const double eta = 1.0 / (t + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept);
    log_eps = mu - std::sqrt(static_cast<double>(t)) / gamma * h_bar;
    const double w = std::pow(static_cast<double>(t), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
};

/// Streaming mean/variance accumulator for the metric windows.
struct VarAccumulator {
  Eigen::VectorXd mean, m2;
  int n = 0;

  void reset(int dim) {
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
    n = 0;
  }

  void add(const Eigen::VectorXd& x) {
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / n;
    m2 += delta.cwiseProduct(x - mean);
  }

  /// Sample variance shrunk toward a small diagonal.
  Eigen::VectorXd regularized() const {
    const double w = static_cast<double>(n) / (n + 5.0);
    const Eigen::VectorXd var = m2 / std::max(n - 1, 1);
    return (w * var.array() + 1e-3 * (1.0 - w) * 5.0).matrix();
  }
};

/// A phase-space point with its cached log density and gradient.
struct Point {
  Eigen::VectorXd x, p, g;
  double lp = 0.0;
};

struct TreeState {
  Point minus, plus;  // trajectory endpoints
  Eigen::VectorXd x_prop, g_prop;
  double lp_prop = 0.0;
  Eigen::VectorXd rho;  // summed momenta across the subtree
  double log_w = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  int n_leapfrog = 0;
  bool ok = false;
  bool divergent = false;
};

bool no_uturn(const Eigen::VectorXd& inv_mass, const Eigen::VectorXd& p_minus,
              const Eigen::VectorXd& p_plus, const Eigen::VectorXd& rho) {
  const Eigen::VectorXd v = inv_mass.cwiseProduct(rho);
  return p_minus.dot(v) > 0.0 && p_plus.dot(v) > 0.0;
}

class ChainRunner {
 public:
  ChainRunner(const LogDensityTarget& target, const SamplerConfig& config, int chain_id)
      : target_(target),
        config_(config),
        rng_(Rng::stream(config.seed, static_cast<std::uint64_t>(chain_id))),
        dim_(target.dim()),
        inv_mass_(Eigen::VectorXd::Ones(target.dim())) {}

  void run(Eigen::Ref<Eigen::MatrixXd> out_draws, Eigen::Ref<Eigen::VectorXd> out_lp,
           ChainStats& stats) {
    initialize();
    eps_ = find_reasonable_epsilon(1.0);
    if (config_.adapt) {
      da_.restart(eps_);
      adaptive_warmup();
    } else {
      for (int it = 0; it < config_.warmup; ++it) transition();
    }

    double sum_accept = 0.0;
    int divergences = 0, depth_hits = 0;
    for (int it = 0; it < config_.iters; ++it) {
      const auto res = transition();
      sum_accept += res.accept;
      divergences += res.divergent ? 1 : 0;
      depth_hits += res.depth_saturated ? 1 : 0;
      out_draws.row(it) = x_.transpose();
      out_lp[it] = lp_;
    }
    stats.mean_accept = config_.iters > 0 ? sum_accept / config_.iters : 0.0;
    stats.divergences = divergences;
    stats.treedepth_hits = depth_hits;
    stats.step_size = eps_;
    stats.inv_mass = inv_mass_;
  }

 private:
  struct TransitionResult {
    double accept = 0.0;
    bool divergent = false;
    bool depth_saturated = false;
  };

  void initialize() {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd x(dim_);
      for (int j = 0; j < dim_; ++j) {
        x[j] = rng_.uniform(-config_.init_radius, config_.init_radius);
      }
      Eigen::VectorXd g(dim_);
      double lp;
      try {
        lp = target_.log_density(x, &g);
      } catch (const Error&) {
        continue;
      }
      if (std::isfinite(lp) && g.allFinite()) {
        gradient_self_test(x, g);
        x_ = std::move(x);
        grad_ = std::move(g);
        lp_ = lp;
        return;
      }
    }
    throw InitError("no finite starting point found in 100 attempts");
  }

  /// Spot-checks a few gradient coordinates against central differences.
  void gradient_self_test(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const {
    const int n_check = std::min(dim_, 3);
    Eigen::VectorXd xp = x;
    for (int c = 0; c < n_check; ++c) {
      const int j = (c * std::max(dim_ / n_check, 1)) % dim_;
      const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
      xp[j] = x[j] + h;
      const double fp = target_.log_density(xp, nullptr);
      xp[j] = x[j] - h;
      const double fm = target_.log_density(xp, nullptr);
      xp[j] = x[j];
      const double fd = (fp - fm) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[j]), 1.0});
      if (std::abs(fd - g[j]) > 1e-3 * scale) {
        throw InitError("gradient self-test failed at coordinate " + std::to_string(j) +
                        ": analytic " + std::to_string(g[j]) + " vs finite difference " +
                        std::to_string(fd));
      }
    }
  }

  Eigen::VectorXd sample_momentum() {
    Eigen::VectorXd p(dim_);
    for (int j = 0; j < dim_; ++j) p[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
    return p;
  }

  double find_reasonable_epsilon(double eps0) {
    double eps = eps0;
    const Eigen::VectorXd p0 = sample_momentum();
    const double h0 = hamiltonian(inv_mass_, p0, lp_);
    bool dir_up = true;
    for (int iter = 0; iter < 50; ++iter) {
      Eigen::VectorXd x = x_, p = p0, g = grad_;
      double lp = lp_;
      double log_ratio = -std::numeric_limits<double>::infinity();
      try {
        leapfrog(target_, inv_mass_, x, p, g, lp, eps);
        if (std::isfinite(lp) && p.allFinite()) log_ratio = h0 - hamiltonian(inv_mass_, p, lp);
      } catch (const Error&) {
      }
      if (iter == 0) dir_up = log_ratio > std::log(0.5);
      if (dir_up) {
        if (log_ratio <= std::log(0.5)) break;
        eps *= 2.0;
      } else {
        if (log_ratio > std::log(0.5)) break;
        eps *= 0.5;
      }
      if (eps < 1e-10 || eps > 1e7) break;
    }
    return eps;
  }

  void adaptive_warmup() {
    // Fast start interval, doubling slow metric windows, fast final interval.
    const int warmup = config_.warmup;
    const int slow_end = warmup - kTermBuffer;
    int window_end = kInitBuffer + kBaseWindow;
    int next_window = 2 * kBaseWindow;
    // A window that could not fit its successor absorbs the remainder.
    if (window_end + next_window > slow_end) window_end = slow_end;

    var_.reset(dim_);
    for (int it = 0; it < warmup; ++it) {
      const auto res = transition();
      da_.update(res.accept, config_.target_accept);
      eps_ = std::exp(da_.log_eps);
      const bool in_slow = it >= kInitBuffer && it < slow_end;
      if (in_slow) var_.add(x_);
      if (in_slow && it + 1 == window_end) {
        inv_mass_ = var_.regularized();
        var_.reset(dim_);
        eps_ = find_reasonable_epsilon(eps_);
        da_.restart(eps_);
        if (window_end < slow_end) {
          window_end += next_window;
          next_window *= 2;
          if (window_end + next_window > slow_end) window_end = slow_end;
        }
      }
    }
    eps_ = std::exp(da_.log_eps_bar);
  }

  /// One leapfrog step from `from`, wrapped as a singleton subtree. A
  /// non-finite state or energy error beyond the threshold is divergent.
  TreeState leaf(const Point& from, int dir, double h0) {
    TreeState t;
    t.n_leapfrog = 1;
    Point next = from;
    bool finite = true;
    try {
      leapfrog(target_, inv_mass_, next.x, next.p, next.g, next.lp, dir * eps_);
      finite = std::isfinite(next.lp) && next.p.allFinite() && next.g.allFinite();
    } catch (const Error&) {
      finite = false;
    }
    if (!finite) {
      t.divergent = true;
      t.ok = false;
      t.minus = t.plus = from;
      t.x_prop = from.x;
      t.g_prop = from.g;
      t.lp_prop = from.lp;
      t.rho = Eigen::VectorXd::Zero(dim_);
      return t;
    }
    const double delta = hamiltonian(inv_mass_, next.p, next.lp) - h0;
    t.divergent = !(delta < kMaxEnergyError);
    t.ok = !t.divergent;
    t.log_w = -delta;
    t.sum_accept = std::min(1.0, std::exp(-delta));
    t.minus = next;
    t.plus = std::move(next);
    t.x_prop = t.minus.x;
    t.g_prop = t.minus.g;
    t.lp_prop = t.minus.lp;
    t.rho = t.minus.p;
    return t;
  }

  TreeState build_tree(int depth, const Point& from, int dir, double h0) {
    if (depth == 0) return leaf(from, dir, h0);

    TreeState t1 = build_tree(depth - 1, from, dir, h0);
    if (!t1.ok) return t1;

    const bool fwd = dir > 0;
    TreeState t2 = build_tree(depth - 1, fwd ? t1.plus : t1.minus, dir, h0);
    t1.sum_accept += t2.sum_accept;
    t1.n_leapfrog += t2.n_leapfrog;
    t1.divergent = t1.divergent || t2.divergent;
    if (!t2.ok) {
      t1.ok = false;
      return t1;
    }

    // Multinomial selection between the halves, proportional to weight.
    const double log_w = log_sum_exp2(t1.log_w, t2.log_w);
    if (std::log(rng_.uniform()) < t2.log_w - log_w) {
      t1.x_prop = std::move(t2.x_prop);
      t1.g_prop = std::move(t2.g_prop);
      t1.lp_prop = t2.lp_prop;
    }
    t1.log_w = log_w;
    t1.rho += t2.rho;
    (fwd ? t1.plus : t1.minus) = fwd ? std::move(t2.plus) : std::move(t2.minus);
    t1.ok = no_uturn(inv_mass_, t1.minus.p, t1.plus.p, t1.rho);
    return t1;
  }

  TransitionResult transition() {
    Point minus{x_, sample_momentum(), grad_, lp_};
    const double h0 = hamiltonian(inv_mass_, minus.p, minus.lp);
    Point plus = minus;

    Eigen::VectorXd rho = minus.p;
    Eigen::VectorXd x_prop = x_, g_prop = grad_;
    double lp_prop = lp_;
    double log_w_traj = 0.0;

    TransitionResult res;
    double sum_accept = 0.0;
    int n_leapfrog = 0;
    int depth = 0;
    for (; depth < config_.max_treedepth; ++depth) {
      const int dir = rng_.uniform() < 0.5 ? -1 : 1;
      TreeState sub = build_tree(depth, dir > 0 ? plus : minus, dir, h0);
      sum_accept += sub.sum_accept;
      n_leapfrog += sub.n_leapfrog;
      res.divergent = res.divergent || sub.divergent;
      if (!sub.ok) break;

      // Biased progressive sampling: the fresh subtree is favored.
      if (std::log(rng_.uniform()) < sub.log_w - log_w_traj) {
        x_prop = std::move(sub.x_prop);
        g_prop = std::move(sub.g_prop);
        lp_prop = sub.lp_prop;
      }
      log_w_traj = log_sum_exp2(log_w_traj, sub.log_w);
      rho += sub.rho;
      (dir > 0 ? plus : minus) = dir > 0 ? std::move(sub.plus) : std::move(sub.minus);
      if (!no_uturn(inv_mass_, minus.p, plus.p, rho)) {
        ++depth;
        break;
      }
    }
    res.depth_saturated = depth >= config_.max_treedepth;
    res.accept = n_leapfrog > 0 ? sum_accept / n_leapfrog : 0.0;

    x_ = std::move(x_prop);
    grad_ = std::move(g_prop);
    lp_ = lp_prop;
    return res;
  }

  const LogDensityTarget& target_;
  const SamplerConfig& config_;
  Rng rng_;
  int dim_;
  Eigen::VectorXd inv_mass_;
  Eigen::VectorXd x_, grad_;
  double lp_ = 0.0;
  double eps_ = 1.0;
  DualAveraging da_;
  VarAccumulator var_;
};

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (iters < 1) throw ConfigError("sampling iterations must be >= 1");
  if (warmup < 0) throw ConfigError("warmup must be >= 0");
  if (adapt && warmup < 150) {
    throw ConfigError("warmup must be >= 150 when adaptation is enabled");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("target_accept must lie in (0,1)");
  }
  if (max_treedepth < 1) throw ConfigError("max_treedepth must be >= 1");
}

int PosteriorDraws::total_divergences() const {
  int n = 0;
  for (const auto& c : chain_stats) n += c.divergences;
  return n;
}

void leapfrog(const LogDensityTarget& target, const Eigen::VectorXd& inv_mass,
              Eigen::VectorXd& x, Eigen::VectorXd& p, Eigen::VectorXd& grad, double& lp,
              double eps) {
  p += 0.5 * eps * grad;
  x += eps * inv_mass.cwiseProduct(p);
  lp = target.log_density(x, &grad);
  p += 0.5 * eps * grad;
}

double hamiltonian(const Eigen::VectorXd& inv_mass, const Eigen::VectorXd& p, double lp) {
  return -lp + 0.5 * inv_mass.cwiseProduct(p).dot(p);
}

PosteriorDraws nuts_sample(const LogDensityTarget& target, const SamplerConfig& config) {
  config.validate();
  const int dim = target.dim();
  PosteriorDraws out;
  out.chains = config.chains;
  out.iters = config.iters;
  out.draws.resize(config.chains * config.iters, dim);
  out.lp.resize(config.chains * config.iters);
  out.chain_stats.resize(config.chains);

  std::vector<std::exception_ptr> errors(config.chains);
  auto run_chain = [&](int c) {
    try {
      ChainRunner runner(target, config, c);
      runner.run(out.draws.middleRows(c * config.iters, config.iters),
                 out.lp.segment(c * config.iters, config.iters), out.chain_stats[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (config.parallel && config.chains > 1) {
    std::vector<std::thread> threads;
    threads.reserve(config.chains);
    for (int c = 0; c < config.chains; ++c) threads.emplace_back(run_chain, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < config.chains; ++c) run_chain(c);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const int total = out.total_draws();
  out.divergence_warning = total > 0 && out.total_divergences() > 0.1 * total;
  return out;
}

}  // namespace sfpca
