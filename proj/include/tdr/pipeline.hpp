#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "tdr/ensemble.hpp"
#include "tdr/featurize.hpp"
#include "tdr/scene.hpp"

namespace tdr {

// Everything one downscaling run needs: which scenario, where the scene
// lives, the lag windows, ensemble size, pruning strength and seed. An empty
// evaluation_days list means "every day with a coarse observation" (minus the
// warm-up days a spatiotemporal schema cannot reach).
struct ScenarioConfig {
  Scenario scenario = Scenario::brt750;
  std::string scene_dir;
  int d1 = 7;
  int d2 = 7;
  int d3 = 7;
  bool include_lc = true;
  int k_trees = 50;
  double lambda = 0.005;
  std::uint64_t seed = 1;
  std::vector<int> evaluation_days;
  std::string out_dir;  // empty = keep results in memory only
  int threads = 1;      // 0 = hardware concurrency
  int reuse_model_days = 1;

  void validate() const;  // config_error on violations
};

ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::json scenario_config_to_json(const ScenarioConfig& c);

// Per-pixel error strata: crop pixels by majority class, bare pixels split by
// whether any 200 m subpixel is vegetated and by the late-season cutoff
// (after the last harvest in the default calendar the whole scene is bare).
inline constexpr int kLateSeasonDoy = 332;
inline constexpr int kStrataCount = 5;

struct StrataTable {
  std::array<std::size_t, kStrataCount> count{};  // pixels (or pixel-days)
  std::array<double, kStrataCount> sse{};

  double rmse(int stratum) const;  // NaN for an empty stratum
  void add(const StrataTable& other);
  static const std::array<std::string, kStrataCount>& names();
  static constexpr int corn = 0;
  static constexpr int cotton = 1;
  static constexpr int bare_mixed = 2;      // vegetated subpixels, in season
  static constexpr int bare_offseason = 3;  // any bare pixel past kLateSeasonDoy
  static constexpr int bare_pure = 4;       // no vegetated subpixels, in season
};

// Classifies every predicted pixel from the 200 m land cover (majority vote
// per block, ties to the lower code) and accumulates squared errors.
// dimension_error when shapes are misaligned.
StrataTable compute_strata_rmse(const Raster& predicted, const Raster& truth,
                                const Raster& lc_200m, int doy);

struct DayRecord {
  int day = 0;
  int doy = 0;
  bool ok = false;
  std::string error;  // failure reason when !ok
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double bias = std::numeric_limits<double>::quiet_NaN();
  double mae = std::numeric_limits<double>::quiet_NaN();
  double frac_err_gt_004 = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_active = 0;  // trees kept by pruning
};

struct MetricsReport {
  std::vector<DayRecord> days;  // one per attempted day, ascending
  StrataTable strata;           // pooled pixel-days over completed days
  double regional_rmse = std::numeric_limits<double>::quiet_NaN();  // pooled
  double time_avg_rmse = std::numeric_limits<double>::quiet_NaN();
  double rmse_sd = std::numeric_limits<double>::quiet_NaN();  // population SD
  double frac_err_gt_004 = std::numeric_limits<double>::quiet_NaN();
  // Fraction of (coarse block, day) pairs whose downscaled block mean sits
  // within 0.06 of the coarse observation.
  double coarse_consistency_frac = std::numeric_limits<double>::quiet_NaN();
  int days_attempted = 0;
  int days_completed = 0;
  std::vector<Raster> downscaled;     // completed days only, ascending
  std::vector<Raster> error_rasters;  // predicted minus truth, same order
};

inline constexpr double kCoarseConsistencyTol = 0.06;
inline constexpr double kErrorThreshold = 0.04;

// One full scenario: per evaluation day assemble training rows, fit the bag,
// prune it, downscale every pixel and score against the 1 km truth. A failing
// day is recorded and skipped, the run continues (partial coverage). When
// out_dir is set, writes rasters/, metrics_daily.csv, strata_rmse.csv,
// summary.csv and run_manifest.json, all byte-deterministic per seed.
MetricsReport run_scenario(const ScenarioConfig& config, const Scene& scene);
// Convenience overload that loads the scene from config.scene_dir.
MetricsReport run_scenario(const ScenarioConfig& config);

enum class LagVariable { lst, ppt, lai, all };

const char* lag_variable_name(LagVariable v);
LagVariable lag_variable_from_name(const std::string& name);

struct LagSweepPoint {
  int lag = 0;
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;
};

// Varies one variable's lag window (or all three together) over lag_grid,
// holding the rest at the config values, and averages the daily RMSE over the
// evaluation days. Requires the spatiotemporal scenario (config_error) and
// lags within the training history (availability_error). Writes
// lag_sweep_<variable>.csv when out_dir is set.
std::vector<LagSweepPoint> lag_sensitivity_sweep(const ScenarioConfig& config,
                                                 const Scene& scene,
                                                 LagVariable variable,
                                                 std::span<const int> lag_grid);

struct GapPoint {
  int gap = 0;
  double rmse = 0.0;
  double frac_err_gt_004 = 0.0;
};

// Withholds the g most recent LST observations (g = 0..max_gaps), retrains
// and downscales one fixed day per gap width. The day is the first configured
// evaluation day, or the most heterogeneous land-cover day when none is
// configured. gap widths beyond d1 are an argument_error. Writes
// gap_curve.csv and per-gap rasters when out_dir is set.
std::vector<GapPoint> gap_experiment(const ScenarioConfig& config,
                                     const Scene& scene, int max_gaps);

// The evaluation day used by gap_experiment by default: the coarse-observed
// day whose 1 km land-cover class mix has maximal entropy (the dual-crop
// mid-season peak). The entropy plateaus across the whole overlap season, so
// the middle of the last such plateau is returned: a full training history
// behind it, planting and harvest edges on either side kept at arm's length.
int select_heterogeneous_day(const Scene& scene);

// 10-fold CV of the bag size on the first evaluation day's training set.
// Writes treecount_cv.csv when out_dir is set.
std::vector<TreeCountCV> tree_count_cv(const ScenarioConfig& config,
                                       const Scene& scene,
                                       std::span<const int> k_grid,
                                       int folds = 10);

// Prunes the first evaluation day's bag along an ascending beta grid and
// reports the implied lambda at each point. An empty grid uses 25 log-spaced
// betas up to the all-zero ceiling. Writes lambda_sweep.csv when out_dir is
// set.
std::vector<LambdaSweepPoint> lambda_sweep(const ScenarioConfig& config,
                                           const Scene& scene,
                                           std::span<const double> betas = {});

// Renders the CSV outputs of a finished run directory as a plain-text table
// (io_error when the directory lacks them).
std::string render_report(const std::string& run_dir);

}  // namespace tdr
