#include <cmath>
#include <set>

#include "doctest.h"
#include "tdr/rng.hpp"

using namespace tdr;

TEST_CASE("splitmix64 matches the published reference sequence") {
  // First outputs for seed 1234567, the widely circulated test vector for
  // the reference splitmix64.c. Raster noise depends on these bits, so any
  // drift here would silently change every generated scene.
  SplitMix64 rng(1234567);
  CHECK(rng.next() == 6457827717110365317ull);
  CHECK(rng.next() == 3203168211198807973ull);
  CHECK(rng.next() == 9817491932198370423ull);
}

TEST_CASE("uniform stays in [0,1) and is deterministic per seed") {
  SplitMix64 a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
}

TEST_CASE("gaussian moments on a large sample") {
  SplitMix64 rng(2024);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sd - 1.0) < 0.01);
}

TEST_CASE("poisson mean is respected") {
  SplitMix64 rng(7);
  const double lambda = 0.6;
  const int n = 100000;
  long total = 0;
  for (int i = 0; i < n; ++i) total += rng.poisson(lambda);
  const double mean = static_cast<double>(total) / n;
  CHECK(std::abs(mean - lambda) < 0.02);
}

TEST_CASE("derive_seed separates purposes and indices") {
  const std::uint64_t base = 42;
  std::set<std::uint64_t> seen;
  seen.insert(derive_seed(base, "scene"));
  seen.insert(derive_seed(base, "weather"));
  seen.insert(derive_seed(base, "weather", 1));
  seen.insert(derive_seed(base, "weather", 2));
  seen.insert(derive_seed(base, "weather", 1, 1));
  seen.insert(derive_seed(base + 1, "weather", 1));
  CHECK(seen.size() == 6);
  CHECK(derive_seed(base, "scene") == derive_seed(base, "scene"));
}

TEST_CASE("sample_without_replacement returns ascending distinct indices") {
  SplitMix64 rng(5);
  const auto s = sample_without_replacement(100, 30, rng);
  REQUIRE(s.size() == 30);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1] < s[i]);
  CHECK(s.front() >= 0);
  CHECK(s.back() < 100);
  CHECK_THROWS_AS(sample_without_replacement(10, 11, rng), argument_error);
}
