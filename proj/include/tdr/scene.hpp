#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tdr/raster.hpp"

namespace tdr {

enum class Crop { bare = 0, sweet_corn = 1, cotton = 2 };

// Day-of-year for a 1-based continuous day index (years are 365 days flat).
int day_of_year(int day);

struct CalendarEntry {
  Crop crop = Crop::bare;
  int planting_doy = 0;
  int harvest_doy = 0;
};

// Planting/harvest day-of-year windows, repeated every simulated year.
struct CropCalendar {
  std::vector<CalendarEntry> entries;

  static CropCalendar defaults();
  void validate() const;
  // The entry covering `doy` for this crop, if any (corn has two windows).
  std::optional<CalendarEntry> season_for(Crop crop, int doy) const;
};

struct IrrigationRule {
  double trigger_sm = 0.0;  // irrigate when field-mean SM drops below this
  double dose = 0.0;        // water added that day, same units as PPT
};

// Everything that shapes a generated scene. Defaults reproduce the standard
// 50 km / two-year setup; tests shrink extent_km or years for speed.
struct SceneConfig {
  std::uint64_t seed = 1;
  int years = 2;
  double extent_km = 50.0;
  int fine_resolution_m = 200;
  int mid_resolution_m = 1000;
  int coarse_resolution_m = 10000;

  int n_fields = 24;
  std::uint64_t field_layout_seed = 0;  // 0 = derive from seed
  std::vector<int> field_crops;         // optional override, codes 0/1/2

  double rain_event_rate = 1.3;   // mean events per week
  double rain_depth_scale = 0.5;  // mean event depth, mm/hr
  double rain_sigma_min_km = 20.0;
  double rain_sigma_max_km = 45.0;

  IrrigationRule corn_irrigation{0.18, 2.1};
  IrrigationRule cotton_irrigation{0.15, 1.5};
  // Per-field management spread: field i scales its trigger and dose by
  // factors drawn once from [1 - jitter, 1 + jitter], so fields of the same
  // crop run staggered schedules instead of firing in lockstep.
  double irrigation_jitter = 0.25;

  double porosity = 0.45;
  double wilting_point = 0.05;
  double drainage_coeff = 0.09;
  double infiltration_coeff = 0.10;
  double et_soil = 0.008;
  double et_vegetation = 0.020;
  double initial_sm = 0.25;

  double lst_dryness_gain = 30.0;  // K from saturated to fully dry soil
  double lst_canopy_drop = 3.0;    // K per unit LAI
  double airtemp_mean_k = 293.0;
  double airtemp_amplitude_k = 10.0;
  double airtemp_jitter_k = 1.5;

  double lst_noise_sd = 5.0;    // K, 1 km observations
  double ppt_noise_sd = 1.0;    // mm/hr, 1 km observations
  double lai_noise_sd = 0.1;    // 1 km observations
  double sm_noise_sd = 0.02;    // m3/m3, 10 km observations

  int coarse_sm_cadence_days = 3;
  int lai_obs_interval_days = 7;

  double training_fraction_large = 0.30;
  double training_fraction_small = 0.012;

  bool keep_fine_rasters = false;  // retain daily 200 m fields (tests only)

  void validate() const;
};

SceneConfig scene_config_from_json(const nlohmann::json& j);
nlohmann::json scene_config_to_json(const SceneConfig& c);

// One rectangular homogeneous-crop field: [row0, row1) x [col0, col1) on the
// fine grid, plus the crop grown there whenever its calendar window is open.
struct Field {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;
  Crop crop = Crop::bare;
};

struct FieldLayout {
  int grid_size = 0;
  std::vector<Field> fields;
  std::vector<int> field_index;  // grid_size^2 cells -> field id, row-major

  int field_at(int row, int col) const {
    return field_index[static_cast<std::size_t>(row) * grid_size + col];
  }
};

// Recursive guillotine partition of the fine grid into n_fields rectangles,
// crops assigned in balanced shuffled rotation unless field_crops overrides.
FieldLayout generate_field_layout(const SceneConfig& config);

// Land cover at the fine resolution for one day: a field shows its crop code
// only while that crop's calendar window is open, bare soil otherwise.
Raster landcover_raster(const SceneConfig& config, const FieldLayout& layout,
                        const CropCalendar& calendar, int day);

// Smooth unimodal canopy curve: zero at planting, crop-specific peak at 70%
// of the season, dropping to 75% of the peak by harvest.
double lai_curve(Crop crop, int days_since_planting, int season_length);

// LAI at the fine resolution for one day, driven only by layout and calendar.
Raster lai_raster(const SceneConfig& config, const FieldLayout& layout,
                  const CropCalendar& calendar, int day);

struct WeatherDay {
  Raster ppt;           // fine grid, rain plus irrigation
  double air_temp_k = 0.0;
  int n_rain_events = 0;
};

// Stochastic regional rain (Poisson arrivals, exponential depths, smooth
// Gaussian footprints) plus threshold-triggered per-field irrigation keyed on
// the previous day's field-mean SM. Deterministic per (config.seed, day).
WeatherDay generate_weather(const SceneConfig& config, const FieldLayout& layout,
                            const CropCalendar& calendar, int day,
                            const Raster& sm_prev);

// One bucket-balance step. Returns the new SM field and the matching LST
// field (dry, bare soil runs hotter than wet, vegetated soil).
std::pair<Raster, Raster> step_water_balance(const SceneConfig& config,
                                             const Raster& sm_prev,
                                             const Raster& ppt, const Raster& lai,
                                             double air_temp_k);

// A generated scene. Per-day mid-resolution rasters are indexed day-1; coarse
// SM and LAI observations exist only on their cadence days. Fine-resolution
// daily fields are retained only when config.keep_fine_rasters is set; land
// cover is cheap enough to recompute from the layout on demand.
struct Scene {
  SceneConfig config;
  CropCalendar calendar;
  FieldLayout layout;
  int n_days = 0;

  GridGeometry fine_geom;
  GridGeometry mid_geom;
  GridGeometry coarse_geom;

  std::vector<Raster> sm_truth;   // mid resolution, evaluation target
  std::vector<Raster> lst_truth;  // mid resolution
  std::vector<Raster> lst_obs;    // mid resolution, noisy
  std::vector<Raster> ppt_truth;
  std::vector<Raster> ppt_obs;
  std::vector<Raster> lai_truth;
  std::vector<std::optional<Raster>> lai_obs;      // weekly cadence
  std::vector<Raster> lc_mid;                      // majority-vote land cover
  std::vector<std::optional<Raster>> sm_coarse_obs;  // coarse cadence, noisy

  std::vector<double> air_temp_k;
  std::vector<int> n_rain_events;

  std::vector<Raster> sm_fine;  // only with keep_fine_rasters
  std::vector<Raster> lst_fine;
  std::vector<Raster> ppt_fine;
  std::vector<Raster> lai_fine;

  std::vector<int> sites_large;  // mid-grid row-major pixel indices
  std::vector<int> sites_small;

  bool coarse_available(int day) const;
  bool lai_observed(int day) const;
  int mid_cells() const { return mid_geom.cells_per_side(); }
};

Scene build_scene(const SceneConfig& config);

// Scene persistence: a manifest JSON plus one TDR-CSV file per stored raster.
// Truth LST/PPT/LAI are regenerable from the seed and are not written; the
// loader rebuilds land cover from the stored layout.
void save_scene(const Scene& scene, const std::string& directory);
Scene load_scene(const std::string& directory);

}  // namespace tdr
