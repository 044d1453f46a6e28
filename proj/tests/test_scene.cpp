#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "tdr/rng.hpp"
#include "tdr/scene.hpp"

using namespace tdr;

namespace {

// 10 km strip: 50x50 fine, 10x10 mid, 1x1 coarse. Fast enough to rebuild in
// every test that needs a full simulated scene.
SceneConfig small_config(std::uint64_t seed = 1) {
  SceneConfig c;
  c.seed = seed;
  c.extent_km = 10.0;
  c.n_fields = 6;
  return c;
}

std::string temp_dir(const std::string& stem) {
  const auto dir = std::filesystem::temp_directory_path() / ("tdr_scene_" + stem);
  std::filesystem::remove_all(dir);
  return dir.string();
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_directories_identical(const std::string& a, const std::string& b) {
  std::vector<std::string> rel_a, rel_b;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a))
    if (e.is_regular_file())
      rel_a.push_back(std::filesystem::relative(e.path(), a).string());
  for (const auto& e : std::filesystem::recursive_directory_iterator(b))
    if (e.is_regular_file())
      rel_b.push_back(std::filesystem::relative(e.path(), b).string());
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  REQUIRE(rel_a == rel_b);
  for (const auto& rel : rel_a)
    CHECK(slurp(std::filesystem::path(a) / rel) == slurp(std::filesystem::path(b) / rel));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("field layout partitions the grid") {
  SceneConfig c = small_config();
  c.n_fields = 7;
  const FieldLayout layout = generate_field_layout(c);
  REQUIRE(static_cast<int>(layout.fields.size()) == 7);
  CHECK(layout.grid_size == 50);
  long long covered = 0;
  for (const Field& f : layout.fields) {
    CHECK(f.row0 >= 0);
    CHECK(f.col0 >= 0);
    CHECK(f.row1 <= 50);
    CHECK(f.col1 <= 50);
    CHECK(f.row0 < f.row1);
    CHECK(f.col0 < f.col1);
    covered += static_cast<long long>(f.row1 - f.row0) * (f.col1 - f.col0);
  }
  CHECK(covered == 2500);
  for (int v : layout.field_index) CHECK(v >= 0);
  // Every cell's field id agrees with the rectangle that contains it.
  for (int row = 0; row < 50; row += 7)
    for (int col = 0; col < 50; col += 7) {
      const Field& f = layout.fields[static_cast<std::size_t>(layout.field_at(row, col))];
      CHECK(f.row0 <= row);
      CHECK(row < f.row1);
      CHECK(f.col0 <= col);
      CHECK(col < f.col1);
    }
}

TEST_CASE("field layout crop assignment") {
  SceneConfig c = small_config();
  c.n_fields = 6;
  const FieldLayout layout = generate_field_layout(c);
  std::set<Crop> seen;
  for (const Field& f : layout.fields) seen.insert(f.crop);
  CHECK(seen.size() == 3);  // balanced rotation covers all covers for n >= 3

  c.field_crops = {2, 2, 2, 2, 2, 2};
  const FieldLayout cotton = generate_field_layout(c);
  for (const Field& f : cotton.fields) CHECK(f.crop == Crop::cotton);

  c.field_crops = {1, 2};
  CHECK_THROWS_AS(c.validate(), config_error);
  c.field_crops.clear();
  c.n_fields = 50 * 50 + 1;
  CHECK_THROWS_AS(generate_field_layout(c), config_error);
}

TEST_CASE("field layout is deterministic per seed") {
  const SceneConfig c = small_config(9);
  const FieldLayout a = generate_field_layout(c);
  const FieldLayout b = generate_field_layout(c);
  CHECK(a.field_index == b.field_index);
  SceneConfig other = c;
  other.field_layout_seed = 123456;
  CHECK(generate_field_layout(other).field_index != a.field_index);
}

TEST_CASE("land cover follows the crop calendar") {
  const SceneConfig c = small_config();
  const FieldLayout layout = generate_field_layout(c);
  const CropCalendar cal = CropCalendar::defaults();

  // before the first planting everything is bare
  const Raster early = landcover_raster(c, layout, cal, 39);
  for (double v : early.values) CHECK(v == 0.0);

  // mid-season day with corn and cotton simultaneously present
  const Raster mid = landcover_raster(c, layout, cal, 222);
  bool corn = false, cotton = false;
  for (double v : mid.values) {
    if (v == 1.0) corn = true;
    if (v == 2.0) cotton = true;
  }
  CHECK(corn);
  CHECK(cotton);

  // second-year phenology repeats the first year's
  const Raster second_year = landcover_raster(c, layout, cal, 222 + 365);
  CHECK(second_year.values == mid.values);
}

TEST_CASE("single cotton field gives uniform land cover in season") {
  SceneConfig c = small_config();
  c.n_fields = 1;
  c.field_crops = {2};
  const FieldLayout layout = generate_field_layout(c);
  const Raster lc = landcover_raster(c, layout, CropCalendar::defaults(), 200);
  for (double v : lc.values) CHECK(v == 2.0);
}

TEST_CASE("lai_curve shape") {
  CHECK(lai_curve(Crop::sweet_corn, 0, 78) == 0.0);
  CHECK(lai_curve(Crop::sweet_corn, 7, 10) == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(lai_curve(Crop::cotton, 7, 10) == doctest::Approx(4.5).epsilon(1e-12));
  // declines at least 20% from the peak by harvest
  CHECK(lai_curve(Crop::cotton, 180, 180) <= 0.8 * 4.5);

  for (Crop crop : {Crop::sweet_corn, Crop::cotton}) {
    for (int season : {78, 180}) {
      double prev = lai_curve(crop, 0, season);
      bool declining = false;
      for (int d = 1; d <= season; ++d) {
        const double cur = lai_curve(crop, d, season);
        CHECK(cur >= 0.0);
        if (cur < prev) declining = true;
        if (declining) CHECK(cur <= prev);  // unimodal: never rises again
        prev = cur;
      }
      CHECK(declining);
    }
  }

  CHECK_THROWS_AS(lai_curve(Crop::sweet_corn, -1, 78), argument_error);
  CHECK_THROWS_AS(lai_curve(Crop::sweet_corn, 79, 78), argument_error);
  CHECK_THROWS_AS(lai_curve(Crop::bare, 5, 78), argument_error);
}

TEST_CASE("weather: no sources means zero precipitation") {
  SceneConfig c = small_config();
  c.rain_event_rate = 0.0;
  const FieldLayout layout = generate_field_layout(c);
  const Raster sm(Variable::SM, c.fine_resolution_m, 0, 50, 50, 0.3);
  // day 30 precedes the first planting window, so irrigation cannot fire
  const WeatherDay w = generate_weather(c, layout, CropCalendar::defaults(), 30, sm);
  CHECK(w.n_rain_events == 0);
  for (double v : w.ppt.values) CHECK(v == 0.0);
}

TEST_CASE("weather: irrigation fires exactly on the dry cropped field") {
  SceneConfig c = small_config();
  c.rain_event_rate = 0.0;
  c.irrigation_jitter = 0.0;
  c.n_fields = 2;
  c.field_crops = {0, 1};  // bare and corn
  const FieldLayout layout = generate_field_layout(c);
  const Raster dry(Variable::SM, c.fine_resolution_m, 0, 50, 50, 0.06);
  // day 100 sits inside the first corn window (61..139)
  const WeatherDay w = generate_weather(c, layout, CropCalendar::defaults(), 100, dry);
  const Field& corn_field = layout.fields[layout.fields[0].crop == Crop::sweet_corn ? 0 : 1];
  for (int row = 0; row < 50; ++row)
    for (int col = 0; col < 50; ++col) {
      const bool inside = row >= corn_field.row0 && row < corn_field.row1 &&
                          col >= corn_field.col0 && col < corn_field.col1;
      CHECK(w.ppt.at(row, col) == (inside ? c.corn_irrigation.dose : 0.0));
    }

  // a wet field is left alone
  const Raster wet(Variable::SM, c.fine_resolution_m, 0, 50, 50, 0.3);
  const WeatherDay none = generate_weather(c, layout, CropCalendar::defaults(), 100, wet);
  for (double v : none.ppt.values) CHECK(v == 0.0);
}

TEST_CASE("weather: two-year event count matches the Poisson rate") {
  const Scene scene = build_scene(small_config(21));
  const int total = std::accumulate(scene.n_rain_events.begin(),
                                    scene.n_rain_events.end(), 0);
  const double expectation = scene.config.rain_event_rate * 730.0 / 7.0;
  const double three_sigma = 3.0 * std::sqrt(expectation);
  CHECK(total >= expectation - three_sigma);
  CHECK(total <= expectation + three_sigma);
}

TEST_CASE("water balance: wilting point is a dry fixed point") {
  const SceneConfig c = small_config();
  const Raster sm(Variable::SM, 200, 0, 4, 4, c.wilting_point);
  const Raster ppt(Variable::PPT, 200, 1, 4, 4, 0.0);
  const Raster lai(Variable::LAI, 200, 1, 4, 4, 1.5);
  const auto [next, lst] = step_water_balance(c, sm, ppt, lai, 300.0);
  for (double v : next.values) CHECK(v == c.wilting_point);
  CHECK(lst.height == 4);
}

TEST_CASE("water balance: dry-down is strictly decreasing after one event") {
  const SceneConfig c = small_config();
  Raster sm(Variable::SM, 200, 0, 1, 1, 0.15);
  const Raster lai(Variable::LAI, 200, 1, 1, 1, 2.0);
  Raster event(Variable::PPT, 200, 1, 1, 1, 3.0);
  auto [wet, lst0] = step_water_balance(c, sm, event, lai, 298.0);
  double prev = wet.values[0];
  CHECK(prev > 0.15);
  const Raster dry(Variable::PPT, 200, 1, 1, 1, 0.0);
  Raster state = wet;
  for (int d = 0; d < 12; ++d) {
    auto [next, lst] = step_water_balance(c, state, dry, lai, 298.0);
    CHECK(next.values[0] < prev);
    prev = next.values[0];
    state = next;
    CHECK(prev >= c.wilting_point);
  }
}

TEST_CASE("water balance: canopy cools the surface") {
  const SceneConfig c = small_config();
  Raster sm(Variable::SM, 200, 0, 1, 2, 0.25);
  const Raster ppt(Variable::PPT, 200, 1, 1, 2, 0.0);
  Raster lai(Variable::LAI, 200, 1, 1, 2, 0.0);
  lai.at(0, 1) = 4.0;
  Raster state = sm;
  for (int d = 0; d < 5; ++d) {
    auto [next, lst] = step_water_balance(c, state, ppt, lai, 300.0);
    CHECK(lst.at(0, 1) < lst.at(0, 0));  // vegetated cell stays cooler
    state = next;
  }

  const Raster bad(Variable::PPT, 200, 1, 3, 3, 0.0);
  CHECK_THROWS_AS(step_water_balance(c, sm, bad, lai, 300.0), dimension_error);
}

TEST_CASE("default-extent scene has the standard grid shapes") {
  SceneConfig c;
  c.seed = 5;
  c.years = 1;  // one year is enough to pin the geometry
  const Scene scene = build_scene(c);
  CHECK(scene.fine_geom.cells_per_side() == 250);
  CHECK(scene.mid_geom.cells_per_side() == 50);
  CHECK(scene.coarse_geom.cells_per_side() == 5);
  REQUIRE(scene.n_days == 365);
  CHECK(scene.sm_truth.front().height == 50);
  CHECK(scene.sm_truth.front().width == 50);
  CHECK(scene.lst_obs.back().height == 50);
  REQUIRE(scene.coarse_available(1));
  CHECK(scene.sm_coarse_obs.front()->height == 5);
  CHECK(scene.sites_large.size() == 750);
  CHECK(scene.sites_small.size() == 30);
  for (std::size_t i = 1; i < scene.sites_small.size(); ++i)
    CHECK(scene.sites_small[i] > scene.sites_small[i - 1]);
  CHECK(scene.sites_large.back() < 2500);
}

TEST_CASE("coarse availability cadence") {
  const Scene scene = build_scene(small_config(31));
  REQUIRE(scene.n_days == 730);
  int year2 = 0;
  for (int day = 366; day <= 730; ++day)
    if (scene.coarse_available(day)) ++year2;
  CHECK(year2 >= 120);
  CHECK(year2 <= 124);
  CHECK(scene.coarse_available(1));
  CHECK_FALSE(scene.coarse_available(2));
  CHECK(scene.lai_observed(1));
  CHECK_FALSE(scene.lai_observed(2));
  CHECK(scene.lai_observed(8));
}

TEST_CASE("scene invariants: bounds, aggregation, couplings") {
  SceneConfig c = small_config(41);
  c.keep_fine_rasters = true;
  c.years = 1;
  const Scene scene = build_scene(c);

  std::vector<double> sm_flat, lst_flat;
  for (int day = 1; day <= scene.n_days; ++day) {
    const auto i = static_cast<std::size_t>(day - 1);
    for (double v : scene.sm_truth[i].values) {
      CHECK(v >= c.wilting_point);
      CHECK(v <= c.porosity);
    }
    // mid-resolution truth is the exact block mean of the fine field
    const Raster blocked = aggregate_block_mean(scene.sm_fine[i], 5);
    for (std::size_t k = 0; k < blocked.values.size(); ++k)
      CHECK(std::abs(blocked.values[k] - scene.sm_truth[i].values[k]) == 0.0);
    CHECK(std::abs(scene.sm_fine[i].mean() - scene.sm_truth[i].mean()) < 1e-12);

    sm_flat.insert(sm_flat.end(), scene.sm_truth[i].values.begin(),
                   scene.sm_truth[i].values.end());
    lst_flat.insert(lst_flat.end(), scene.lst_truth[i].values.begin(),
                    scene.lst_truth[i].values.end());
  }
  CHECK(pearson(sm_flat, lst_flat) < 0.0);

  // soil moisture rises with recent water input
  std::vector<double> sm_late, ppt_sum;
  for (int day = 3; day <= scene.n_days; ++day) {
    const auto i = static_cast<std::size_t>(day - 1);
    for (std::size_t k = 0; k < scene.sm_truth[i].values.size(); ++k) {
      sm_late.push_back(scene.sm_truth[i].values[k]);
      ppt_sum.push_back(scene.ppt_truth[i].values[k] +
                        scene.ppt_truth[i - 1].values[k] +
                        scene.ppt_truth[i - 2].values[k]);
    }
  }
  CHECK(pearson(sm_late, ppt_sum) > 0.0);
}

TEST_CASE("lai is zero outside every calendar window") {
  SceneConfig c = small_config(43);
  c.years = 1;
  const Scene scene = build_scene(c);
  const CropCalendar cal = CropCalendar::defaults();
  for (int day = 1; day <= scene.n_days; ++day) {
    const int doy = (day - 1) % 365 + 1;
    const bool corn = cal.season_for(Crop::sweet_corn, doy).has_value();
    const bool cotton = cal.season_for(Crop::cotton, doy).has_value();
    if (!corn && !cotton) {
      for (double v : scene.lai_truth[static_cast<std::size_t>(day - 1)].values)
        CHECK(v == 0.0);
    }
  }
}

TEST_CASE("noise wiring: observations equal truth plus the derived noise") {
  SceneConfig c = small_config(47);
  c.years = 1;
  const Scene scene = build_scene(c);
  const int day = 10;
  const auto i = static_cast<std::size_t>(day - 1);
  const Raster expected = add_gaussian_noise(
      scene.lst_truth[i], c.lst_noise_sd,
      derive_seed(c.seed, "noise-lst", static_cast<std::uint64_t>(day)));
  CHECK(expected.values == scene.lst_obs[i].values);

  SceneConfig clean = small_config(47);
  clean.years = 1;
  clean.lst_noise_sd = 0.0;
  clean.ppt_noise_sd = 0.0;
  clean.lai_noise_sd = 0.0;
  clean.sm_noise_sd = 0.0;
  const Scene noiseless = build_scene(clean);
  CHECK(noiseless.lst_obs[i].values == noiseless.lst_truth[i].values);
  CHECK(noiseless.ppt_obs[i].values == noiseless.ppt_truth[i].values);
}

TEST_CASE("scene config JSON round trip and validation") {
  SceneConfig c = small_config(53);
  c.rain_depth_scale = 0.9;
  c.field_crops = {0, 1, 2, 0, 1, 2};
  const SceneConfig back = scene_config_from_json(scene_config_to_json(c));
  CHECK(back.seed == c.seed);
  CHECK(back.extent_km == c.extent_km);
  CHECK(back.rain_depth_scale == c.rain_depth_scale);
  CHECK(back.field_crops == c.field_crops);
  CHECK(back.corn_irrigation.trigger_sm == c.corn_irrigation.trigger_sm);

  nlohmann::json j = scene_config_to_json(c);
  j["no_such_knob"] = 1;
  CHECK_THROWS_AS(scene_config_from_json(j), config_error);
  nlohmann::json bad = scene_config_to_json(c);
  bad["porosity"] = 0.01;  // below the wilting point
  CHECK_THROWS_AS(scene_config_from_json(bad), config_error);
  CHECK_THROWS_AS(scene_config_from_json(nlohmann::json::array()), config_error);
}

TEST_CASE("same seed produces byte-identical scene directories") {
  SceneConfig c = small_config(59);
  c.years = 1;
  const std::string dir_a = temp_dir("det_a");
  const std::string dir_b = temp_dir("det_b");
  save_scene(build_scene(c), dir_a);
  save_scene(build_scene(c), dir_b);
  check_directories_identical(dir_a, dir_b);
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("scene save/load round trip") {
  SceneConfig c = small_config(61);
  c.years = 1;
  const Scene scene = build_scene(c);
  const std::string dir = temp_dir("roundtrip");
  save_scene(scene, dir);
  const Scene back = load_scene(dir);

  CHECK(back.n_days == scene.n_days);
  CHECK(back.config.seed == scene.config.seed);
  CHECK(back.sites_large == scene.sites_large);
  CHECK(back.sites_small == scene.sites_small);
  CHECK(back.layout.field_index == scene.layout.field_index);
  for (int day = 1; day <= scene.n_days; ++day) {
    const auto i = static_cast<std::size_t>(day - 1);
    CHECK(back.sm_truth[i].values == scene.sm_truth[i].values);
    CHECK(back.lst_obs[i].values == scene.lst_obs[i].values);
    CHECK(back.ppt_obs[i].values == scene.ppt_obs[i].values);
    CHECK(back.lc_mid[i].values == scene.lc_mid[i].values);
    CHECK(back.lai_observed(day) == scene.lai_observed(day));
    if (scene.lai_observed(day))
      CHECK(back.lai_obs[i]->values == scene.lai_obs[i]->values);
    CHECK(back.coarse_available(day) == scene.coarse_available(day));
    if (scene.coarse_available(day))
      CHECK(back.sm_coarse_obs[i]->values == scene.sm_coarse_obs[i]->values);
  }
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(load_scene(temp_dir("missing")), io_error);
}
