#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "sfpca/rng.hpp"

using sfpca::Rng;
using sfpca::derive_seed;

TEST_SUITE("rng") {

TEST_CASE("same seed reproduces the stream, different seed does not") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("derived streams are distinct and stable") {
  CHECK(derive_seed(7, 0) == derive_seed(7, 0));
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 0) != derive_seed(8, 0));

  Rng a = Rng::stream(42, 0);
  Rng b = Rng::stream(42, 1);
  int diff = 0;
  for (int i = 0; i < 100; ++i) {
    if (a.uniform() != b.uniform()) ++diff;
  }
  CHECK(diff > 90);
}

TEST_CASE("uniform stays inside [0, 1) with the right mean") {
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // 3 standard errors of the mean of U(0,1) is ~0.0027.
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("uniform(lo, hi) respects the interval") {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-3.0, 2.0);
    CHECK(u >= -3.0);
    CHECK(u <= 2.0);
  }
}

TEST_CASE("normal moments match the standard normal") {
  Rng rng(9);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("normal(mean, sd) rescales") {
  Rng rng(10);
  const int n = 50000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.normal(3.0, 0.5);
  CHECK(std::abs(sum / n - 3.0) < 0.02);
}

TEST_CASE("poisson mean is right and draws are nonnegative") {
  Rng rng(11);
  const int n = 50000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = rng.poisson(3.0);
    REQUIRE(k >= 0);
    sum += k;
  }
  // SE of the mean is sqrt(3/n) ~ 0.0077.
  CHECK(std::abs(sum / n - 3.0) < 0.03);
}

TEST_CASE("uniform_int covers [0, n) roughly uniformly") {
  Rng rng(12);
  const int n = 70000;
  std::vector<int> freq(7, 0);
  for (int i = 0; i < n; ++i) {
    const int k = rng.uniform_int(7);
    REQUIRE(k >= 0);
    REQUIRE(k < 7);
    ++freq[k];
  }
  for (int k = 0; k < 7; ++k) {
    CHECK(std::abs(freq[k] - n / 7.0) < 500.0);  // ~5.4 binomial SDs
  }
}

TEST_CASE("sample_without_replacement returns sorted distinct indices") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto idx = rng.sample_without_replacement(10, 4);
    REQUIRE(idx.size() == 4);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    const std::set<int> uniq(idx.begin(), idx.end());
    CHECK(uniq.size() == 4);
    for (int v : idx) {
      CHECK(v >= 0);
      CHECK(v < 10);
    }
  }
}

TEST_CASE("sample_without_replacement with m = n is the identity set") {
  Rng rng(14);
  const auto idx = rng.sample_without_replacement(6, 6);
  REQUIRE(idx.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(idx[i] == i);
}

TEST_CASE("sample_without_replacement is marginally uniform") {
  Rng rng(15);
  const int trials = 20000;
  std::vector<int> hits(8, 0);
  for (int t = 0; t < trials; ++t) {
    for (int v : rng.sample_without_replacement(8, 3)) ++hits[v];
  }
  // Each index appears with probability 3/8; 3 SDs of the count is ~176.
  for (int v = 0; v < 8; ++v) {
    CHECK(std::abs(hits[v] - trials * 3.0 / 8.0) < 300.0);
  }
}

}  // TEST_SUITE
