#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "sfpca/diagnostics.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/rng.hpp"
#include "sfpca/sampler.hpp"
#include "sfpca/stats.hpp"
#include "sfpca/target.hpp"

using namespace sfpca;

namespace {

struct DiagGaussian : LogDensityTarget {
  Eigen::VectorXd mu, sd;
  DiagGaussian(Eigen::VectorXd m, Eigen::VectorXd s) : mu(std::move(m)), sd(std::move(s)) {}
  int dim() const override { return static_cast<int>(mu.size()); }
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
    const Eigen::ArrayXd z = (x - mu).array() / sd.array();
    if (grad) *grad = (-z / sd.array()).matrix();
    return -0.5 * z.square().sum() - sd.array().log().sum();
  }
};

struct Quartic : LogDensityTarget {
  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
    if (grad) (*grad)[0] = -std::pow(x[0], 3);
    return -0.25 * std::pow(x[0], 4);
  }
};

/// Flat density inside the max-norm unit box, undefined outside. Every
/// trajectory eventually steps out, so transitions end in divergences.
struct Box : LogDensityTarget {
  int dim() const override { return 2; }
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
    if (x.cwiseAbs().maxCoeff() > 1.0) throw EvaluationError("outside the box");
    if (grad) grad->setZero(2);
    return 0.0;
  }
};

/// Improper flat density on the whole line: no U-turn ever happens, so every
/// transition saturates the tree depth.
struct FlatLine : LogDensityTarget {
  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd&, Eigen::VectorXd* grad) const override {
    if (grad) grad->setZero(1);
    return 0.0;
  }
};

struct NeverFinite : LogDensityTarget {
  int dim() const override { return 2; }
  double log_density(const Eigen::VectorXd&, Eigen::VectorXd* grad) const override {
    if (grad) grad->setZero(2);
    return std::numeric_limits<double>::quiet_NaN();
  }
};

/// Deliberately wrong gradient; the self-test at initialization must object.
struct WrongGradient : LogDensityTarget {
  int dim() const override { return 2; }
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const override {
    if (grad) *grad = x;  // should be -x
    return -0.5 * x.squaredNorm();
  }
};

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("leapfrog is time-reversible") {
  DiagGaussian target((Eigen::VectorXd(3) << 1.0, -2.0, 0.5).finished(),
                      (Eigen::VectorXd(3) << 1.0, 0.5, 2.0).finished());
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(3);
  Rng rng(7);
  Eigen::VectorXd x(3), p(3);
  for (int i = 0; i < 3; ++i) {
    x[i] = rng.normal();
    p[i] = rng.normal();
  }
  const Eigen::VectorXd x0 = x, p0 = p;
  Eigen::VectorXd g(3);
  double lp = target.log_density(x, &g);
  for (int step = 0; step < 20; ++step) leapfrog(target, inv_mass, x, p, g, lp, 0.1);
  p = -p;
  for (int step = 0; step < 20; ++step) leapfrog(target, inv_mass, x, p, g, lp, 0.1);
  p = -p;
  CHECK((x - x0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((p - p0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("single-step energy error shrinks like eps cubed") {
  Quartic target;
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(1);
  auto one_step_error = [&](double eps) {
    Eigen::VectorXd x(1), p(1), g(1);
    x[0] = 1.1;
    p[0] = 0.7;
    double lp = target.log_density(x, &g);
    const double h0 = hamiltonian(inv_mass, p, lp);
    leapfrog(target, inv_mass, x, p, g, lp, eps);
    return std::abs(hamiltonian(inv_mass, p, lp) - h0);
  };
  const double e1 = one_step_error(0.05);
  const double e2 = one_step_error(0.025);
  const double ratio = e1 / e2;
  CHECK(ratio > 4.0);
  CHECK(ratio < 16.0);
}

TEST_CASE("hamiltonian combines potential and metric-weighted kinetic energy") {
  Eigen::VectorXd inv_mass(2), p(2);
  inv_mass << 0.5, 2.0;
  p << 1.0, 3.0;
  CHECK(hamiltonian(inv_mass, p, -4.0) ==
        doctest::Approx(4.0 + 0.5 * (0.5 * 1.0 + 2.0 * 9.0)));
}

TEST_CASE("recovers a shifted scaled 1-d gaussian") {
  DiagGaussian target((Eigen::VectorXd(1) << 10.0).finished(),
                      (Eigen::VectorXd(1) << 2.0).finished());
  SamplerConfig config;
  config.chains = 4;
  config.warmup = 500;
  config.iters = 500;
  config.seed = 2024;
  const PosteriorDraws draws = nuts_sample(target, config);
  REQUIRE(draws.total_draws() == 2000);

  const auto chains = parameter_chains(draws, 0);
  const double mean = draws.draws.col(0).mean();
  const double mcse = mcse_mean(chains);
  CHECK(std::abs(mean - 10.0) < 3.0 * mcse);

  std::vector<double> all(draws.draws.col(0).data(), draws.draws.col(0).data() + 2000);
  const double sd = stats::sample_sd(all);
  CHECK(sd == doctest::Approx(2.0).epsilon(0.10));
  CHECK(split_rhat(chains) < 1.01);
  CHECK_FALSE(draws.divergence_warning);
}

TEST_CASE("recovers a 5-d standard gaussian with healthy diagnostics") {
  DiagGaussian target(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5));
  SamplerConfig config;
  config.chains = 4;
  config.warmup = 400;
  config.iters = 400;
  config.seed = 99;
  const PosteriorDraws draws = nuts_sample(target, config);

  const auto report = diagnose(draws, {"x1", "x2", "x3", "x4", "x5"});
  CHECK(report.rhat_available);
  CHECK(report.max_rhat < 1.01);
  for (int j = 0; j < 5; ++j) {
    const auto chains = parameter_chains(draws, j);
    CHECK(std::abs(draws.draws.col(j).mean()) < 3.0 * mcse_mean(chains));
    std::vector<double> col(draws.draws.col(j).data(),
                            draws.draws.col(j).data() + draws.total_draws());
    CHECK(stats::sample_variance(col) == doctest::Approx(1.0).epsilon(0.10));
  }
  // lp values are the target evaluated at the draws.
  for (int s = 0; s < 20; ++s) {
    CHECK(draws.lp[s] ==
          doctest::Approx(target.log_density(draws.draws.row(s).transpose(), nullptr)));
  }
}

TEST_CASE("same seed gives bit-identical draws, parallel or not") {
  DiagGaussian target(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3));
  SamplerConfig config;
  config.chains = 2;
  config.warmup = 200;
  config.iters = 150;
  config.seed = 31;
  const PosteriorDraws a = nuts_sample(target, config);
  const PosteriorDraws b = nuts_sample(target, config);
  config.parallel = false;
  const PosteriorDraws c = nuts_sample(target, config);
  CHECK(a.draws == b.draws);
  CHECK(a.lp == b.lp);
  CHECK(a.draws == c.draws);
  CHECK(a.chain_stats[0].step_size == c.chain_stats[0].step_size);
  CHECK(a.chain_stats[1].divergences == c.chain_stats[1].divergences);
}

TEST_CASE("draws are stacked chain-major") {
  // With one chain the draws are just that chain; with two chains and the
  // same per-chain seeds, chain 0 of the pair must equal the single run of
  // stream 0. Rely on per-chain streams being derived from (seed, chain).
  DiagGaussian target(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  SamplerConfig one;
  one.chains = 1;
  one.warmup = 200;
  one.iters = 100;
  one.seed = 404;
  SamplerConfig two = one;
  two.chains = 2;
  const PosteriorDraws a = nuts_sample(target, one);
  const PosteriorDraws b = nuts_sample(target, two);
  CHECK(b.draws.topRows(100) == a.draws);
  CHECK(b.lp.head(100) == a.lp);
}

TEST_CASE("divergent trajectories are counted and flagged") {
  Box target;
  SamplerConfig config;
  config.chains = 1;
  config.warmup = 0;
  config.iters = 40;
  config.adapt = false;
  config.init_radius = 0.5;
  config.seed = 5;
  const PosteriorDraws draws = nuts_sample(target, config);
  CHECK(draws.total_divergences() > 4);  // > 10% of 40
  CHECK(draws.divergence_warning);
}

TEST_CASE("tree depth saturation is reported") {
  FlatLine target;
  SamplerConfig config;
  config.chains = 1;
  config.warmup = 0;
  config.iters = 15;
  config.adapt = false;
  config.max_treedepth = 4;
  config.seed = 6;
  const PosteriorDraws draws = nuts_sample(target, config);
  CHECK(draws.chain_stats[0].treedepth_hits == 15);
  CHECK(draws.total_divergences() == 0);
}

TEST_CASE("configuration validation") {
  SamplerConfig config;
  config.chains = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = SamplerConfig{};
  config.warmup = 100;  // too short for adaptation
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.adapt = false;
  CHECK_NOTHROW(config.validate());
  config = SamplerConfig{};
  config.iters = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = SamplerConfig{};
  config.target_accept = 1.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("initialization failures surface as InitError") {
  NeverFinite nf;
  SamplerConfig config;
  config.chains = 1;
  config.warmup = 0;
  config.iters = 1;
  config.adapt = false;
  config.seed = 8;
  CHECK_THROWS_AS(nuts_sample(nf, config), InitError);

  WrongGradient wg;
  CHECK_THROWS_AS(nuts_sample(wg, config), InitError);
}

}  // TEST_SUITE
