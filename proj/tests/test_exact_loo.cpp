#include <cmath>

#include "doctest.h"
#include "sfpca/dataset.hpp"
#include "sfpca/exact_loo.hpp"
#include "sfpca/sampler.hpp"
#include "sfpca/spline_basis.hpp"
#include "test_helpers.hpp"

using namespace sfpca;

namespace {

SamplerConfig short_config(std::uint64_t seed) {
  SamplerConfig config;
  config.chains = 2;
  config.warmup = 200;
  config.iters = 200;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_SUITE("exact_loo") {

TEST_CASE("all units are scored with finite predictions") {
  const auto data = test_util::toy_dataset(6, 5, 301);
  const auto [std_data, st] = standardize(data);
  const OrthonormalBasis basis({0.5});
  const ExactLooResult res = exact_loo(basis, std_data, 1, short_config(17));

  REQUIRE(static_cast<int>(res.units.size()) == 6);
  double total = 0.0;
  for (const auto& u : res.units) {
    CHECK(std::isfinite(u.log_pred));
    CHECK(u.mcse > 0.0);
    CHECK(u.max_rhat > 0.0);
    total += u.log_pred;
  }
  CHECK(res.elppd == doctest::Approx(total).epsilon(1e-12));
  CHECK(res.mcse > 0.0);
  // Combined MCSE is the per-unit values in quadrature.
  double q = 0.0;
  for (const auto& u : res.units) q += u.mcse * u.mcse;
  CHECK(res.mcse == doctest::Approx(std::sqrt(q)).epsilon(1e-12));
}

TEST_CASE("a single subject falls back to the prior predictive") {
  const auto data = test_util::toy_dataset(1, 4, 302);
  const auto [std_data, st] = standardize(data);
  const OrthonormalBasis basis({0.5});
  const ExactLooResult res = exact_loo(basis, std_data, 1, short_config(19));
  REQUIRE(res.units.size() == 1);
  CHECK(std::isfinite(res.units[0].log_pred));
  CHECK(std::isfinite(res.elppd));
}

TEST_CASE("two seeds agree within their combined uncertainty") {
  const auto data = test_util::toy_dataset(8, 5, 303);
  const auto [std_data, st] = standardize(data);
  const OrthonormalBasis basis({0.5});
  const ExactLooResult a = exact_loo(basis, std_data, 1, short_config(100));
  const ExactLooResult b = exact_loo(basis, std_data, 1, short_config(200));
  CHECK(std::abs(a.elppd - b.elppd) < 3.0 * (a.mcse + b.mcse));
}

TEST_CASE("reruns with the same seed are identical") {
  const auto data = test_util::toy_dataset(4, 4, 304);
  const auto [std_data, st] = standardize(data);
  const OrthonormalBasis basis({0.5});
  const ExactLooResult a = exact_loo(basis, std_data, 1, short_config(7));
  const ExactLooResult b = exact_loo(basis, std_data, 1, short_config(7));
  CHECK(a.elppd == b.elppd);
  for (size_t i = 0; i < a.units.size(); ++i) {
    CHECK(a.units[i].log_pred == b.units[i].log_pred);
  }
}

}  // TEST_SUITE
