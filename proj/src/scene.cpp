#include "tdr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "tdr/rng.hpp"

namespace tdr {

namespace {

constexpr double kLaiPeakCorn = 3.5;
constexpr double kLaiPeakCotton = 4.5;
constexpr double kLaiHarvestDrop = 0.25;  // fraction of peak lost by harvest
constexpr double kPeakSeasonFraction = 0.7;
constexpr double kCanopyExtinction = 0.6;
constexpr double kEtBaseTempK = 278.0;
constexpr double kEtTempSlopeK = 25.0;
constexpr double kEtTempCap = 1.2;
constexpr int kAirtempPhaseDoy = 121;  // seasonal sine peaks mid-July

const char* crop_label(Crop c) {
  switch (c) {
    case Crop::bare: return "bare";
    case Crop::sweet_corn: return "sweet_corn";
    case Crop::cotton: return "cotton";
  }
  throw argument_error("crop_label: unknown crop code");
}

Crop crop_from_label(const std::string& s) {
  if (s == "bare") return Crop::bare;
  if (s == "sweet_corn") return Crop::sweet_corn;
  if (s == "cotton") return Crop::cotton;
  throw config_error("unknown crop label '" + s + "'");
}

}  // namespace

int day_of_year(int day) { return (day - 1) % 365 + 1; }

CropCalendar CropCalendar::defaults() {
  CropCalendar c;
  c.entries = {{Crop::sweet_corn, 61, 139},
               {Crop::sweet_corn, 183, 261},
               {Crop::cotton, 153, 332}};
  return c;
}

void CropCalendar::validate() const {
  for (const auto& e : entries) {
    if (e.crop == Crop::bare)
      throw config_error("calendar: bare soil has no planting window");
    if (e.planting_doy < 1 || e.harvest_doy > 365 ||
        e.planting_doy >= e.harvest_doy)
      throw config_error("calendar: need 1 <= planting < harvest <= 365");
  }
}

std::optional<CalendarEntry> CropCalendar::season_for(Crop crop, int doy) const {
  for (const auto& e : entries)
    if (e.crop == crop && e.planting_doy <= doy && doy <= e.harvest_doy) return e;
  return std::nullopt;
}

void SceneConfig::validate() const {
  if (years < 1) throw config_error("scene: years must be >= 1");
  if (!(0.0 < wilting_point && wilting_point < porosity && porosity <= 0.6))
    throw config_error("scene: need 0 < wilting point < porosity <= 0.6");
  if (rain_event_rate < 0.0) throw config_error("scene: rain_event_rate must be >= 0");
  if (coarse_sm_cadence_days < 1)
    throw config_error("scene: coarse_sm_cadence_days must be >= 1");
  if (lai_obs_interval_days < 1)
    throw config_error("scene: lai_obs_interval_days must be >= 1");
  if (n_fields < 1) throw config_error("scene: n_fields must be >= 1");
  if (!(fine_resolution_m > 0 && mid_resolution_m > fine_resolution_m &&
        coarse_resolution_m > mid_resolution_m))
    throw config_error("scene: resolutions must increase fine < mid < coarse");
  if (mid_resolution_m % fine_resolution_m != 0 ||
      coarse_resolution_m % mid_resolution_m != 0)
    throw config_error("scene: each resolution must divide the next");
  // also validates extent divisibility at the three resolutions
  for (int res : {fine_resolution_m, mid_resolution_m, coarse_resolution_m})
    GridGeometry{extent_km, 0.0, 0.0, res}.cells_per_side();
  if (!(initial_sm >= wilting_point && initial_sm <= porosity))
    throw config_error("scene: initial_sm must lie in [wilting, porosity]");
  for (double sd : {lst_noise_sd, ppt_noise_sd, lai_noise_sd, sm_noise_sd})
    if (sd < 0.0) throw config_error("scene: noise SDs must be >= 0");
  if (!(rain_sigma_min_km > 0.0 && rain_sigma_max_km >= rain_sigma_min_km))
    throw config_error("scene: need 0 < rain_sigma_min <= rain_sigma_max");
  if (rain_depth_scale < 0.0) throw config_error("scene: rain_depth_scale must be >= 0");
  if (!(irrigation_jitter >= 0.0 && irrigation_jitter < 1.0))
    throw config_error("scene: irrigation_jitter must lie in [0, 1)");
  if (!(training_fraction_large > 0.0 && training_fraction_large <= 1.0 &&
        training_fraction_small > 0.0 && training_fraction_small <= 1.0))
    throw config_error("scene: training fractions must lie in (0, 1]");
  if (!field_crops.empty()) {
    if (static_cast<int>(field_crops.size()) != n_fields)
      throw config_error("scene: field_crops must list one code per field");
    for (int c : field_crops)
      if (c < 0 || c > 2) throw config_error("scene: field crop codes are 0, 1 or 2");
  }
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw config_error(std::string("scene config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

SceneConfig scene_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("scene config must be a JSON object");
  static const std::set<std::string> known = {
      "seed", "years", "extent_km", "fine_resolution_m", "mid_resolution_m",
      "coarse_resolution_m", "n_fields", "field_layout_seed", "field_crops",
      "rain_event_rate", "rain_depth_scale", "rain_sigma_min_km", "rain_sigma_max_km",
      "corn_irrigation_trigger", "corn_irrigation_dose", "cotton_irrigation_trigger",
      "cotton_irrigation_dose", "irrigation_jitter", "porosity", "wilting_point",
      "drainage_coeff",
      "infiltration_coeff", "et_soil", "et_vegetation", "initial_sm",
      "lst_dryness_gain", "lst_canopy_drop", "airtemp_mean_k", "airtemp_amplitude_k",
      "airtemp_jitter_k", "lst_noise_sd", "ppt_noise_sd", "lai_noise_sd",
      "sm_noise_sd", "coarse_sm_cadence_days", "lai_obs_interval_days",
      "training_fraction_large", "training_fraction_small", "keep_fine_rasters"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw config_error("scene config: unknown key '" + it.key() + "'");

  SceneConfig c;
  read_key(j, "seed", c.seed);
  read_key(j, "years", c.years);
  read_key(j, "extent_km", c.extent_km);
  read_key(j, "fine_resolution_m", c.fine_resolution_m);
  read_key(j, "mid_resolution_m", c.mid_resolution_m);
  read_key(j, "coarse_resolution_m", c.coarse_resolution_m);
  read_key(j, "n_fields", c.n_fields);
  read_key(j, "field_layout_seed", c.field_layout_seed);
  read_key(j, "field_crops", c.field_crops);
  read_key(j, "rain_event_rate", c.rain_event_rate);
  read_key(j, "rain_depth_scale", c.rain_depth_scale);
  read_key(j, "rain_sigma_min_km", c.rain_sigma_min_km);
  read_key(j, "rain_sigma_max_km", c.rain_sigma_max_km);
  read_key(j, "corn_irrigation_trigger", c.corn_irrigation.trigger_sm);
  read_key(j, "corn_irrigation_dose", c.corn_irrigation.dose);
  read_key(j, "cotton_irrigation_trigger", c.cotton_irrigation.trigger_sm);
  read_key(j, "cotton_irrigation_dose", c.cotton_irrigation.dose);
  read_key(j, "irrigation_jitter", c.irrigation_jitter);
  read_key(j, "porosity", c.porosity);
  read_key(j, "wilting_point", c.wilting_point);
  read_key(j, "drainage_coeff", c.drainage_coeff);
  read_key(j, "infiltration_coeff", c.infiltration_coeff);
  read_key(j, "et_soil", c.et_soil);
  read_key(j, "et_vegetation", c.et_vegetation);
  read_key(j, "initial_sm", c.initial_sm);
  read_key(j, "lst_dryness_gain", c.lst_dryness_gain);
  read_key(j, "lst_canopy_drop", c.lst_canopy_drop);
  read_key(j, "airtemp_mean_k", c.airtemp_mean_k);
  read_key(j, "airtemp_amplitude_k", c.airtemp_amplitude_k);
  read_key(j, "airtemp_jitter_k", c.airtemp_jitter_k);
  read_key(j, "lst_noise_sd", c.lst_noise_sd);
  read_key(j, "ppt_noise_sd", c.ppt_noise_sd);
  read_key(j, "lai_noise_sd", c.lai_noise_sd);
  read_key(j, "sm_noise_sd", c.sm_noise_sd);
  read_key(j, "coarse_sm_cadence_days", c.coarse_sm_cadence_days);
  read_key(j, "lai_obs_interval_days", c.lai_obs_interval_days);
  read_key(j, "training_fraction_large", c.training_fraction_large);
  read_key(j, "training_fraction_small", c.training_fraction_small);
  read_key(j, "keep_fine_rasters", c.keep_fine_rasters);
  c.validate();
  return c;
}

nlohmann::json scene_config_to_json(const SceneConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["years"] = c.years;
  j["extent_km"] = c.extent_km;
  j["fine_resolution_m"] = c.fine_resolution_m;
  j["mid_resolution_m"] = c.mid_resolution_m;
  j["coarse_resolution_m"] = c.coarse_resolution_m;
  j["n_fields"] = c.n_fields;
  j["field_layout_seed"] = c.field_layout_seed;
  if (!c.field_crops.empty()) j["field_crops"] = c.field_crops;
  j["rain_event_rate"] = c.rain_event_rate;
  j["rain_depth_scale"] = c.rain_depth_scale;
  j["rain_sigma_min_km"] = c.rain_sigma_min_km;
  j["rain_sigma_max_km"] = c.rain_sigma_max_km;
  j["corn_irrigation_trigger"] = c.corn_irrigation.trigger_sm;
  j["corn_irrigation_dose"] = c.corn_irrigation.dose;
  j["cotton_irrigation_trigger"] = c.cotton_irrigation.trigger_sm;
  j["cotton_irrigation_dose"] = c.cotton_irrigation.dose;
  j["irrigation_jitter"] = c.irrigation_jitter;
  j["porosity"] = c.porosity;
  j["wilting_point"] = c.wilting_point;
  j["drainage_coeff"] = c.drainage_coeff;
  j["infiltration_coeff"] = c.infiltration_coeff;
  j["et_soil"] = c.et_soil;
  j["et_vegetation"] = c.et_vegetation;
  j["initial_sm"] = c.initial_sm;
  j["lst_dryness_gain"] = c.lst_dryness_gain;
  j["lst_canopy_drop"] = c.lst_canopy_drop;
  j["airtemp_mean_k"] = c.airtemp_mean_k;
  j["airtemp_amplitude_k"] = c.airtemp_amplitude_k;
  j["airtemp_jitter_k"] = c.airtemp_jitter_k;
  j["lst_noise_sd"] = c.lst_noise_sd;
  j["ppt_noise_sd"] = c.ppt_noise_sd;
  j["lai_noise_sd"] = c.lai_noise_sd;
  j["sm_noise_sd"] = c.sm_noise_sd;
  j["coarse_sm_cadence_days"] = c.coarse_sm_cadence_days;
  j["lai_obs_interval_days"] = c.lai_obs_interval_days;
  j["training_fraction_large"] = c.training_fraction_large;
  j["training_fraction_small"] = c.training_fraction_small;
  j["keep_fine_rasters"] = c.keep_fine_rasters;
  return j;
}

FieldLayout generate_field_layout(const SceneConfig& config) {
  const int grid = GridGeometry{config.extent_km, 0, 0, config.fine_resolution_m}
                       .cells_per_side();
  const auto capacity = static_cast<long long>(grid) * grid;
  if (config.n_fields > capacity)
    throw config_error("layout: more fields than fine-grid cells");

  struct Rect {
    int r0, c0, r1, c1;
    long long area() const {
      return static_cast<long long>(r1 - r0) * (c1 - c0);
    }
  };
  const std::uint64_t seed = config.field_layout_seed != 0
                                 ? config.field_layout_seed
                                 : derive_seed(config.seed, "layout");
  SplitMix64 rng(seed);
  std::vector<Rect> rects{{0, 0, grid, grid}};
  while (static_cast<int>(rects.size()) < config.n_fields) {
    // Split the largest remaining rectangle across its longer side at a
    // random interior fraction; largest-first keeps areas balanced.
    std::size_t pick = 0;
    for (std::size_t i = 1; i < rects.size(); ++i)
      if (rects[i].area() > rects[pick].area()) pick = i;
    Rect r = rects[pick];
    const int h = r.r1 - r.r0;
    const int w = r.c1 - r.c0;
    if (h < 2 && w < 2)
      throw state_error("layout: cannot split a single-cell rectangle");
    const double u = rng.uniform(0.35, 0.65);
    if (h > w) {
      const int k = std::clamp(static_cast<int>(std::lround(h * u)), 1, h - 1);
      rects[pick] = {r.r0, r.c0, r.r0 + k, r.c1};
      rects.push_back({r.r0 + k, r.c0, r.r1, r.c1});
    } else {
      const int k = std::clamp(static_cast<int>(std::lround(w * u)), 1, w - 1);
      rects[pick] = {r.r0, r.c0, r.r1, r.c0 + k};
      rects.push_back({r.r0, r.c0 + k, r.r1, r.c1});
    }
  }

  std::vector<int> crops(static_cast<std::size_t>(config.n_fields));
  if (!config.field_crops.empty()) {
    crops = config.field_crops;
  } else {
    // Bare-dominated mix with corn the major crop and cotton the minor one,
    // shuffled so the cover types interleave across the region. Any scene
    // with three or more fields carries all three cover types.
    const int n = config.n_fields;
    const int n_corn = std::max(1, static_cast<int>(std::lround(0.30 * n)));
    const int n_cotton = std::max(1, static_cast<int>(std::lround(0.11 * n)));
    for (std::size_t i = 0; i < crops.size(); ++i) {
      if (static_cast<int>(i) < n_corn) crops[i] = 1;
      else if (static_cast<int>(i) < n_corn + n_cotton) crops[i] = 2;
      else crops[i] = 0;
    }
    shuffle(crops, rng);
  }

  FieldLayout layout;
  layout.grid_size = grid;
  layout.field_index.assign(static_cast<std::size_t>(grid) * grid, -1);
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rect& r = rects[i];
    layout.fields.push_back(
        {r.r0, r.c0, r.r1, r.c1, static_cast<Crop>(crops[i])});
    for (int row = r.r0; row < r.r1; ++row)
      for (int col = r.c0; col < r.c1; ++col)
        layout.field_index[static_cast<std::size_t>(row) * grid + col] =
            static_cast<int>(i);
  }
  return layout;
}

Raster landcover_raster(const SceneConfig& config, const FieldLayout& layout,
                        const CropCalendar& calendar, int day) {
  const int doy = day_of_year(day);
  Raster lc(Variable::LC, config.fine_resolution_m, day, layout.grid_size,
            layout.grid_size, 0.0);
  for (const Field& f : layout.fields) {
    if (f.crop == Crop::bare || !calendar.season_for(f.crop, doy)) continue;
    const auto code = static_cast<double>(f.crop);
    for (int row = f.row0; row < f.row1; ++row)
      for (int col = f.col0; col < f.col1; ++col) lc.at(row, col) = code;
  }
  return lc;
}

double lai_curve(Crop crop, int days_since_planting, int season_length) {
  if (crop == Crop::bare) throw argument_error("lai_curve: bare soil has no canopy");
  if (days_since_planting < 0 || season_length < 1 ||
      days_since_planting > season_length)
    throw argument_error("lai_curve: need 0 <= days_since_planting <= season_length");
  const double peak = crop == Crop::sweet_corn ? kLaiPeakCorn : kLaiPeakCotton;
  const double peak_day = kPeakSeasonFraction * season_length;
  const double d = days_since_planting;
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (d <= peak_day) {
    const double s = std::sin(half_pi * d / peak_day);
    return peak * s * s;
  }
  const double s = std::sin(half_pi * (d - peak_day) / (season_length - peak_day));
  return peak * (1.0 - kLaiHarvestDrop * s * s);
}

Raster lai_raster(const SceneConfig& config, const FieldLayout& layout,
                  const CropCalendar& calendar, int day) {
  const int doy = day_of_year(day);
  Raster lai(Variable::LAI, config.fine_resolution_m, day, layout.grid_size,
             layout.grid_size, 0.0);
  for (const Field& f : layout.fields) {
    if (f.crop == Crop::bare) continue;
    const auto season = calendar.season_for(f.crop, doy);
    if (!season) continue;
    const double v = lai_curve(f.crop, doy - season->planting_doy,
                               season->harvest_doy - season->planting_doy);
    for (int row = f.row0; row < f.row1; ++row)
      for (int col = f.col0; col < f.col1; ++col) lai.at(row, col) = v;
  }
  return lai;
}

WeatherDay generate_weather(const SceneConfig& config, const FieldLayout& layout,
                            const CropCalendar& calendar, int day,
                            const Raster& sm_prev) {
  const int grid = layout.grid_size;
  if (sm_prev.height != grid || sm_prev.width != grid)
    throw dimension_error("generate_weather: SM raster does not match the layout");

  SplitMix64 rng(derive_seed(config.seed, "weather", static_cast<std::uint64_t>(day)));
  WeatherDay out;
  out.ppt = Raster(Variable::PPT, config.fine_resolution_m, day, grid, grid, 0.0);

  const int doy = day_of_year(day);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  out.air_temp_k = config.airtemp_mean_k +
                   config.airtemp_amplitude_k *
                       std::sin(two_pi * (doy - kAirtempPhaseDoy) / 365.0) +
                   config.airtemp_jitter_k * rng.gaussian();

  // Regional rain: each event drops a bounded depth under a smooth Gaussian
  // footprint whose centre may sit outside the region, so gradients cross
  // the domain instead of always peaking inside it.
  out.n_rain_events = rng.poisson(config.rain_event_rate / 7.0);
  const double extent = config.extent_km;
  const double cell_km = config.fine_resolution_m / 1000.0;
  for (int e = 0; e < out.n_rain_events; ++e) {
    const double cx = rng.uniform(-0.2 * extent, 1.2 * extent);
    const double cy = rng.uniform(-0.2 * extent, 1.2 * extent);
    const double sigma = rng.uniform(config.rain_sigma_min_km, config.rain_sigma_max_km);
    const double depth = config.rain_depth_scale * rng.uniform(0.5, 1.5);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int row = 0; row < grid; ++row) {
      const double y = (row + 0.5) * cell_km;
      const double dy2 = (y - cy) * (y - cy);
      for (int col = 0; col < grid; ++col) {
        const double x = (col + 0.5) * cell_km;
        out.ppt.at(row, col) += depth * std::exp(-((x - cx) * (x - cx) + dy2) * inv2s2);
      }
    }
  }

  // Threshold irrigation: a cropped field whose previous-day mean SM sits
  // below its trigger receives the full dose uniformly. Each field applies
  // its own day-independent management factors to the crop rule.
  for (std::size_t fi = 0; fi < layout.fields.size(); ++fi) {
    const Field& f = layout.fields[fi];
    if (f.crop == Crop::bare || !calendar.season_for(f.crop, doy)) continue;
    const IrrigationRule& rule =
        f.crop == Crop::sweet_corn ? config.corn_irrigation : config.cotton_irrigation;
    SplitMix64 field_rng(derive_seed(config.seed, "irrigation-jitter",
                                     static_cast<std::uint64_t>(fi)));
    const double j = config.irrigation_jitter;
    const double trigger = rule.trigger_sm * field_rng.uniform(1.0 - j, 1.0 + j);
    const double dose = rule.dose * field_rng.uniform(1.0 - j, 1.0 + j);
    double mean = 0.0;
    for (int row = f.row0; row < f.row1; ++row)
      for (int col = f.col0; col < f.col1; ++col) mean += sm_prev.at(row, col);
    mean /= static_cast<double>(f.row1 - f.row0) * (f.col1 - f.col0);
    if (mean < trigger) {
      for (int row = f.row0; row < f.row1; ++row)
        for (int col = f.col0; col < f.col1; ++col) out.ppt.at(row, col) += dose;
    }
  }
  return out;
}

std::pair<Raster, Raster> step_water_balance(const SceneConfig& config,
                                             const Raster& sm_prev, const Raster& ppt,
                                             const Raster& lai, double air_temp_k) {
  if (ppt.height != sm_prev.height || ppt.width != sm_prev.width ||
      lai.height != sm_prev.height || lai.width != sm_prev.width)
    throw dimension_error("step_water_balance: raster shapes differ");

  const int day = ppt.day;
  Raster sm(Variable::SM, sm_prev.resolution_m, day, sm_prev.height, sm_prev.width);
  Raster lst(Variable::LST, sm_prev.resolution_m, day, sm_prev.height, sm_prev.width);
  const double por = config.porosity;
  const double wilt = config.wilting_point;
  const double temp_factor =
      std::clamp((air_temp_k - kEtBaseTempK) / kEtTempSlopeK, 0.0, kEtTempCap);
  for (std::size_t i = 0; i < sm.size(); ++i) {
    const double prev = sm_prev.values[i];
    const double canopy = 1.0 - std::exp(-kCanopyExtinction * lai.values[i]);
    const double moisture_frac = (prev - wilt) / (por - wilt);
    const double et =
        (config.et_soil + config.et_vegetation * canopy) * temp_factor * moisture_frac;
    const double next = prev + config.infiltration_coeff * ppt.values[i] -
                        config.drainage_coeff * (prev - wilt) - et;
    sm.values[i] = std::clamp(next, wilt, por);
    lst.values[i] = air_temp_k + config.lst_dryness_gain * (1.0 - sm.values[i] / por) -
                    config.lst_canopy_drop * lai.values[i];
  }
  return {std::move(sm), std::move(lst)};
}

bool Scene::coarse_available(int day) const {
  return day >= 1 && day <= n_days &&
         sm_coarse_obs[static_cast<std::size_t>(day - 1)].has_value();
}

bool Scene::lai_observed(int day) const {
  return day >= 1 && day <= n_days &&
         lai_obs[static_cast<std::size_t>(day - 1)].has_value();
}

Scene build_scene(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.config = config;
  scene.calendar = CropCalendar::defaults();
  scene.calendar.validate();
  scene.layout = generate_field_layout(config);
  scene.n_days = config.years * 365;

  scene.fine_geom = {config.extent_km, 0.0, 0.0, config.fine_resolution_m};
  scene.mid_geom = {config.extent_km, 0.0, 0.0, config.mid_resolution_m};
  scene.coarse_geom = {config.extent_km, 0.0, 0.0, config.coarse_resolution_m};
  const int fine_to_mid = config.mid_resolution_m / config.fine_resolution_m;
  const int mid_to_coarse = config.coarse_resolution_m / config.mid_resolution_m;
  const int grid = scene.fine_geom.cells_per_side();

  const auto n = static_cast<std::size_t>(scene.n_days);
  scene.sm_truth.reserve(n);
  scene.lst_truth.reserve(n);
  scene.lst_obs.reserve(n);
  scene.ppt_truth.reserve(n);
  scene.ppt_obs.reserve(n);
  scene.lai_truth.reserve(n);
  scene.lai_obs.resize(n);
  scene.lc_mid.reserve(n);
  scene.sm_coarse_obs.resize(n);
  scene.air_temp_k.reserve(n);
  scene.n_rain_events.reserve(n);

  Raster sm_fine(Variable::SM, config.fine_resolution_m, 0, grid, grid,
                 config.initial_sm);
  for (int day = 1; day <= scene.n_days; ++day) {
    const Raster lc_fine = landcover_raster(config, scene.layout, scene.calendar, day);
    const Raster lai_fine = lai_raster(config, scene.layout, scene.calendar, day);
    WeatherDay weather =
        generate_weather(config, scene.layout, scene.calendar, day, sm_fine);
    auto [sm_next, lst_fine] =
        step_water_balance(config, sm_fine, weather.ppt, lai_fine, weather.air_temp_k);
    sm_fine = std::move(sm_next);

    Raster sm_mid = aggregate_block_mean(sm_fine, fine_to_mid);
    const Raster lst_mid = aggregate_block_mean(lst_fine, fine_to_mid);
    const Raster ppt_mid = aggregate_block_mean(weather.ppt, fine_to_mid);
    const Raster lai_mid = aggregate_block_mean(lai_fine, fine_to_mid);

    const auto d = static_cast<std::uint64_t>(day);
    scene.lst_obs.push_back(add_gaussian_noise(lst_mid, config.lst_noise_sd,
                                               derive_seed(config.seed, "noise-lst", d)));
    scene.ppt_obs.push_back(add_gaussian_noise(ppt_mid, config.ppt_noise_sd,
                                               derive_seed(config.seed, "noise-ppt", d)));
    if ((day - 1) % config.lai_obs_interval_days == 0)
      scene.lai_obs[static_cast<std::size_t>(day - 1)] = add_gaussian_noise(
          lai_mid, config.lai_noise_sd, derive_seed(config.seed, "noise-lai", d));
    if ((day - 1) % config.coarse_sm_cadence_days == 0) {
      const Raster sm_coarse = aggregate_block_mean(sm_mid, mid_to_coarse);
      scene.sm_coarse_obs[static_cast<std::size_t>(day - 1)] = add_gaussian_noise(
          sm_coarse, config.sm_noise_sd, derive_seed(config.seed, "noise-sm", d));
    }
    scene.lc_mid.push_back(aggregate_majority(lc_fine, fine_to_mid));
    scene.sm_truth.push_back(std::move(sm_mid));
    scene.lst_truth.push_back(lst_mid);
    scene.ppt_truth.push_back(ppt_mid);
    scene.lai_truth.push_back(lai_mid);
    scene.air_temp_k.push_back(weather.air_temp_k);
    scene.n_rain_events.push_back(weather.n_rain_events);
    if (config.keep_fine_rasters) {
      scene.sm_fine.push_back(sm_fine);
      scene.lst_fine.push_back(std::move(lst_fine));
      scene.ppt_fine.push_back(std::move(weather.ppt));
      scene.lai_fine.push_back(lai_fine);
    }
  }

  const int mid_pixels = scene.mid_cells() * scene.mid_cells();
  const int n_large = std::max(
      1, static_cast<int>(std::lround(config.training_fraction_large * mid_pixels)));
  const int n_small = std::max(
      1, static_cast<int>(std::lround(config.training_fraction_small * mid_pixels)));
  SplitMix64 rng_large(derive_seed(config.seed, "sites-large"));
  SplitMix64 rng_small(derive_seed(config.seed, "sites-small"));
  scene.sites_large = sample_without_replacement(mid_pixels, n_large, rng_large);
  scene.sites_small = sample_without_replacement(mid_pixels, n_small, rng_small);
  return scene;
}

namespace {

std::string raster_file(const char* stem, int resolution_m, int day) {
  return std::string("rasters/") + stem + "_" + std::to_string(resolution_m) + "_" +
         std::to_string(day) + ".csv";
}

void record_and_write(nlohmann::json& manifest, const std::string& dir,
                      const char* variable, const char* stem, const Raster& r) {
  const std::string rel = raster_file(stem, r.resolution_m, r.day);
  manifest["rasters"][variable][std::to_string(r.resolution_m)]
          [std::to_string(r.day)] = rel;
  write_tdr_csv(r, dir + "/" + rel);
}

}  // namespace

void save_scene(const Scene& scene, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(directory) / "rasters", ec);
  if (ec)
    throw io_error("save_scene: cannot create '" + directory + "': " + ec.message());

  nlohmann::json manifest;
  manifest["format"] = "tdr-scene,v1";
  manifest["config"] = scene_config_to_json(scene.config);
  manifest["n_days"] = scene.n_days;
  nlohmann::json calendar = nlohmann::json::array();
  for (const auto& e : scene.calendar.entries)
    calendar.push_back({{"crop", crop_label(e.crop)},
                        {"planting_doy", e.planting_doy},
                        {"harvest_doy", e.harvest_doy}});
  manifest["calendar"] = calendar;
  nlohmann::json fields = nlohmann::json::array();
  for (const Field& f : scene.layout.fields)
    fields.push_back({{"row0", f.row0},
                      {"col0", f.col0},
                      {"row1", f.row1},
                      {"col1", f.col1},
                      {"crop", crop_label(f.crop)}});
  manifest["layout"] = {{"grid_size", scene.layout.grid_size}, {"fields", fields}};
  manifest["air_temp_k"] = scene.air_temp_k;
  manifest["n_rain_events"] = scene.n_rain_events;
  manifest["sites_large"] = scene.sites_large;
  manifest["sites_small"] = scene.sites_small;

  // One raster per (variable, resolution): SM truth lives at the mid
  // resolution, every other stored field is the noisy observation series.
  for (int day = 1; day <= scene.n_days; ++day) {
    const auto i = static_cast<std::size_t>(day - 1);
    record_and_write(manifest, directory, "SM", "sm_truth", scene.sm_truth[i]);
    record_and_write(manifest, directory, "LST", "lst_obs", scene.lst_obs[i]);
    record_and_write(manifest, directory, "PPT", "ppt_obs", scene.ppt_obs[i]);
    if (scene.lai_obs[i])
      record_and_write(manifest, directory, "LAI", "lai_obs", *scene.lai_obs[i]);
    if (scene.sm_coarse_obs[i])
      record_and_write(manifest, directory, "SM", "sm_obs", *scene.sm_coarse_obs[i]);
  }

  std::ofstream out(directory + "/manifest.json", std::ios::binary);
  if (!out) throw io_error("save_scene: cannot write manifest in '" + directory + "'");
  out << manifest.dump(2) << '\n';
  if (!out) throw io_error("save_scene: manifest write failed in '" + directory + "'");
}

Scene load_scene(const std::string& directory) {
  const std::string manifest_path = directory + "/manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw io_error("load_scene: cannot open '" + manifest_path + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("load_scene: bad JSON in '" + manifest_path + "': " + e.what());
  }
  if (manifest.value("format", "") != "tdr-scene,v1")
    throw schema_error("load_scene: unrecognised manifest format in '" +
                       manifest_path + "'");

  Scene scene;
  try {
    scene.config = scene_config_from_json(manifest.at("config"));
    scene.n_days = manifest.at("n_days").get<int>();
    scene.calendar.entries.clear();
    for (const auto& e : manifest.at("calendar")) {
      scene.calendar.entries.push_back({crop_from_label(e.at("crop").get<std::string>()),
                                        e.at("planting_doy").get<int>(),
                                        e.at("harvest_doy").get<int>()});
    }
    scene.calendar.validate();
    const auto& layout = manifest.at("layout");
    scene.layout.grid_size = layout.at("grid_size").get<int>();
    for (const auto& f : layout.at("fields")) {
      scene.layout.fields.push_back({f.at("row0").get<int>(), f.at("col0").get<int>(),
                                     f.at("row1").get<int>(), f.at("col1").get<int>(),
                                     crop_from_label(f.at("crop").get<std::string>())});
    }
    scene.air_temp_k = manifest.at("air_temp_k").get<std::vector<double>>();
    scene.n_rain_events = manifest.at("n_rain_events").get<std::vector<int>>();
    scene.sites_large = manifest.at("sites_large").get<std::vector<int>>();
    scene.sites_small = manifest.at("sites_small").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw schema_error("load_scene: manifest missing fields: " + std::string(e.what()));
  }

  const int grid = scene.layout.grid_size;
  scene.layout.field_index.assign(static_cast<std::size_t>(grid) * grid, -1);
  for (std::size_t i = 0; i < scene.layout.fields.size(); ++i) {
    const Field& f = scene.layout.fields[i];
    for (int row = f.row0; row < f.row1; ++row)
      for (int col = f.col0; col < f.col1; ++col)
        scene.layout.field_index[static_cast<std::size_t>(row) * grid + col] =
            static_cast<int>(i);
  }

  scene.fine_geom = {scene.config.extent_km, 0.0, 0.0, scene.config.fine_resolution_m};
  scene.mid_geom = {scene.config.extent_km, 0.0, 0.0, scene.config.mid_resolution_m};
  scene.coarse_geom = {scene.config.extent_km, 0.0, 0.0,
                       scene.config.coarse_resolution_m};
  const int fine_to_mid = scene.config.mid_resolution_m / scene.config.fine_resolution_m;

  const auto n = static_cast<std::size_t>(scene.n_days);
  scene.lai_obs.resize(n);
  scene.sm_coarse_obs.resize(n);
  const auto& rasters = manifest.at("rasters");
  auto load_raster = [&](const char* variable, int resolution_m, int day) {
    const auto& path = rasters.at(variable)
                           .at(std::to_string(resolution_m))
                           .at(std::to_string(day));
    Raster r = read_tdr_csv(directory + "/" + path.get<std::string>());
    if (r.day != day || r.resolution_m != resolution_m)
      throw data_error("load_scene: raster header disagrees with manifest for " +
                       path.get<std::string>());
    return r;
  };
  try {
    for (int day = 1; day <= scene.n_days; ++day) {
      const auto i = static_cast<std::size_t>(day - 1);
      scene.sm_truth.push_back(load_raster("SM", scene.config.mid_resolution_m, day));
      scene.lst_obs.push_back(load_raster("LST", scene.config.mid_resolution_m, day));
      scene.ppt_obs.push_back(load_raster("PPT", scene.config.mid_resolution_m, day));
      if ((day - 1) % scene.config.lai_obs_interval_days == 0)
        scene.lai_obs[i] = load_raster("LAI", scene.config.mid_resolution_m, day);
      if ((day - 1) % scene.config.coarse_sm_cadence_days == 0)
        scene.sm_coarse_obs[i] =
            load_raster("SM", scene.config.coarse_resolution_m, day);
      // Land cover is a pure function of the stored layout and calendar.
      scene.lc_mid.push_back(aggregate_majority(
          landcover_raster(scene.config, scene.layout, scene.calendar, day),
          fine_to_mid));
    }
  } catch (const nlohmann::json::exception& e) {
    throw schema_error("load_scene: raster table incomplete: " + std::string(e.what()));
  }
  return scene;
}

}  // namespace tdr
