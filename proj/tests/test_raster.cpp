#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tdr/raster.hpp"
#include "tdr/rng.hpp"

using namespace tdr;

namespace {

Raster random_raster(Variable var, int res_m, int h, int w, std::uint64_t seed,
                     double lo = 0.0, double hi = 0.5) {
  Raster r(var, res_m, 1, h, w);
  SplitMix64 rng(seed);
  for (auto& v : r.values) v = rng.uniform(lo, hi);
  return r;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("block mean of a constant raster is that constant") {
  Raster r(Variable::SM, 200, 1, 10, 10, 0.2);
  const Raster out = aggregate_block_mean(r, 5);
  CHECK(out.height == 2);
  CHECK(out.width == 2);
  CHECK(out.resolution_m == 1000);
  CHECK(out.variable == Variable::SM);
  CHECK(out.day == 1);
  for (double v : out.values) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("block mean hand case") {
  Raster r(Variable::SM, 1000, 3, 2, 2);
  r.at(0, 0) = 0.1;
  r.at(0, 1) = 0.2;
  r.at(1, 0) = 0.3;
  r.at(1, 1) = 0.4;
  const Raster out = aggregate_block_mean(r, 2);
  REQUIRE(out.size() == 1);
  CHECK(std::abs(out.values[0] - 0.25) < 1e-15);
}

TEST_CASE("block mean matches a naive double-loop oracle") {
  const Raster fine = random_raster(Variable::LST, 200, 50, 50, 77, 270.0, 310.0);
  const Raster coarse = aggregate_block_mean(fine, 10);
  REQUIRE(coarse.height == 5);
  REQUIRE(coarse.width == 5);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      double s = 0.0;
      int n = 0;
      for (int i = 0; i < fine.height; ++i)
        for (int j = 0; j < fine.width; ++j)
          if (i / 10 == r && j / 10 == c) {
            s += fine.at(i, j);
            ++n;
          }
      CHECK(std::abs(coarse.at(r, c) - s / n) < 1e-12);
    }
  }
}

TEST_CASE("aggregation errors") {
  const Raster r = random_raster(Variable::SM, 200, 10, 10, 1);
  CHECK_THROWS_AS(aggregate_block_mean(r, 1), argument_error);
  CHECK_THROWS_AS(aggregate_block_mean(r, 3), dimension_error);
}

TEST_CASE("aggregation properties: affine commutation, composition, mean preservation") {
  const Raster r = random_raster(Variable::LST, 200, 50, 50, 5, 270.0, 310.0);

  Raster scaled = r;
  for (auto& v : scaled.values) v = 1.7 * v - 3.0;
  const Raster agg_scaled = aggregate_block_mean(scaled, 5);
  const Raster agg = aggregate_block_mean(r, 5);
  for (std::size_t i = 0; i < agg.size(); ++i)
    CHECK(std::abs(agg_scaled.values[i] - (1.7 * agg.values[i] - 3.0)) < 1e-12);

  const Raster two_step = aggregate_block_mean(agg, 10);
  const Raster one_step = aggregate_block_mean(r, 50);
  REQUIRE(two_step.size() == one_step.size());
  for (std::size_t i = 0; i < one_step.size(); ++i)
    CHECK(std::abs(two_step.values[i] - one_step.values[i]) < 1e-12);

  CHECK(std::abs(agg.mean() - r.mean()) < 1e-12);
}

TEST_CASE("gaussian noise: sd 0 is the identity") {
  const Raster r = random_raster(Variable::SM, 1000, 20, 20, 9);
  const Raster out = add_gaussian_noise(r, 0.0, 123);
  CHECK(out.values == r.values);
}

TEST_CASE("gaussian noise: sample statistics over 1e6 draws") {
  Raster zeros(Variable::LST, 1000, 1, 1000, 1000, 0.0);
  const Raster noisy = add_gaussian_noise(zeros, 0.02, 4242);
  double sum = 0.0, sumsq = 0.0;
  for (double v : noisy.values) {
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(noisy.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 3.0 * 0.02 / 1000.0);
  CHECK(std::abs(sd - 0.02) < 0.01 * 0.02);
}

TEST_CASE("gaussian noise: determinism and sensitivity") {
  const Raster r = random_raster(Variable::PPT, 1000, 10, 10, 3, 0.0, 2.0);
  const Raster a = add_gaussian_noise(r, 0.5, 77);
  const Raster b = add_gaussian_noise(r, 0.5, 77);
  CHECK(a.values == b.values);
  const Raster c = add_gaussian_noise(r, 0.5, 78);
  CHECK(a.values != c.values);
  // sd > 0 must perturb something
  CHECK(a.values != r.values);
}

TEST_CASE("gaussian noise: clamping per variable") {
  Raster sm(Variable::SM, 10000, 1, 20, 20, 0.59);
  const Raster sm_noisy = add_gaussian_noise(sm, 0.3, 11);
  for (double v : sm_noisy.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 0.6);
  }
  Raster ppt(Variable::PPT, 1000, 1, 20, 20, 0.1);
  for (double v : add_gaussian_noise(ppt, 2.0, 12).values) CHECK(v >= 0.0);
  Raster lai(Variable::LAI, 1000, 1, 20, 20, 0.05);
  for (double v : add_gaussian_noise(lai, 1.0, 13).values) CHECK(v >= 0.0);
}

TEST_CASE("gaussian noise: argument errors") {
  Raster lc(Variable::LC, 1000, 1, 4, 4, 0.0);
  CHECK_THROWS_AS(add_gaussian_noise(lc, 0.1, 1), argument_error);
  Raster sm(Variable::SM, 1000, 1, 4, 4, 0.2);
  CHECK_THROWS_AS(add_gaussian_noise(sm, -0.1, 1), argument_error);
}

TEST_CASE("pixel centroids") {
  GridGeometry km1{50.0, 0.0, 0.0, 1000};
  const auto p = pixel_centroid(km1, 0, 0);
  CHECK(std::abs(p.x_km - 0.5) < 1e-12);
  CHECK(std::abs(p.y_km - 0.5) < 1e-12);

  GridGeometry km10{50.0, 0.0, 0.0, 10000};
  const auto q = pixel_centroid(km10, 4, 4);
  CHECK(std::abs(q.x_km - 45.0) < 1e-12);
  CHECK(std::abs(q.y_km - 45.0) < 1e-12);

  GridGeometry m200{50.0, 0.0, 0.0, 200};
  const auto s = pixel_centroid(m200, 124, 124);
  CHECK(std::abs(s.x_km - 24.9) < 1e-12);
  CHECK(std::abs(s.y_km - 24.9) < 1e-12);

  CHECK_THROWS_AS(pixel_centroid(km10, 5, 0), index_error);
  CHECK_THROWS_AS(pixel_centroid(km10, 0, -1), index_error);
}

TEST_CASE("grid geometry validates divisibility") {
  GridGeometry bad{50.0, 0.0, 0.0, 3000};
  CHECK_THROWS_AS(bad.cells_per_side(), config_error);
  GridGeometry good{50.0, 0.0, 0.0, 200};
  CHECK(good.cells_per_side() == 250);
}

TEST_CASE("majority vote coarsening with lowest-code ties") {
  Raster lc(Variable::LC, 200, 1, 2, 2);
  lc.at(0, 0) = 1;
  lc.at(0, 1) = 1;
  lc.at(1, 0) = 2;
  lc.at(1, 1) = 2;  // tie between 1 and 2 -> 1
  const Raster out = aggregate_majority(lc, 2);
  CHECK(out.values[0] == 1.0);

  Raster lc2(Variable::LC, 200, 1, 2, 2);
  lc2.at(0, 0) = 2;
  lc2.at(0, 1) = 2;
  lc2.at(1, 0) = 2;
  lc2.at(1, 1) = 0;
  CHECK(aggregate_majority(lc2, 2).values[0] == 2.0);
}

TEST_CASE("TDR-CSV round trip is value-exact") {
  Raster r = random_raster(Variable::SM, 1000, 7, 5, 99);
  r.day = 123;
  r.values[3] = 0.1;  // exercises shortest-form formatting
  r.values[4] = 1e-17;
  r.values[5] = 0.6;
  const std::string path = temp_path("tdr_roundtrip.csv");
  write_tdr_csv(r, path);
  const Raster back = read_tdr_csv(path);
  CHECK(back.variable == r.variable);
  CHECK(back.resolution_m == r.resolution_m);
  CHECK(back.day == r.day);
  CHECK(back.height == r.height);
  CHECK(back.width == r.width);
  REQUIRE(back.size() == r.size());
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(back.values[i] == r.values[i]);
  std::filesystem::remove(path);
}

TEST_CASE("TDR-CSV header and validation failures") {
  const std::string path = temp_path("tdr_bad.csv");
  {
    std::ofstream out(path);
    out << "#tdr,v2,SM,1000,1,1,1\n0.2\n";
  }
  CHECK_THROWS_AS(read_tdr_csv(path), data_error);
  {
    std::ofstream out(path);
    out << "#tdr,v1,SM,1000,1,1,2\n0.2\n";  // wrong field count in row
  }
  CHECK_THROWS_AS(read_tdr_csv(path), data_error);
  {
    std::ofstream out(path);
    out << "#tdr,v1,SM,1000,1,1,1\n0.7\n";  // SM above porosity bound
  }
  CHECK_THROWS_AS(read_tdr_csv(path), data_error);
  CHECK_THROWS_AS(read_tdr_csv(temp_path("does_not_exist_xyz.csv")), io_error);
  std::filesystem::remove(path);
}

TEST_CASE("format_double produces shortest round-trip strings") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(300.0) == "300");
  CHECK(parse_double(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK_THROWS_AS(parse_double("12,3"), data_error);
}
