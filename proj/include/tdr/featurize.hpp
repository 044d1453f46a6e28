#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tdr/matrix.hpp"
#include "tdr/scene.hpp"

namespace tdr {

enum class FeatureMode { spatial, spatiotemporal };
enum class Scenario { brt750, brt30, brtst };

const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct FeatureColumn {
  enum class Kind { lst_lag, lai_lag, ppt_lag, coarse_sm, x, y, lc };
  Kind kind = Kind::coarse_sm;
  int lag = 0;  // days before the downscaling day; 0 for the specials
  std::string name;
};

// Ordered column layout of one feature matrix. Spatial mode is the classic
// seven-column row (LST, PPT, LAI, LC, coarse SM, X, Y); spatiotemporal mode
// carries lag windows d1/d2/d3 for LST/LAI/PPT, oldest lag first.
struct FeatureSchema {
  FeatureMode mode = FeatureMode::spatial;
  int d1 = 0;
  int d2 = 0;
  int d3 = 0;
  bool include_lc = true;
  std::vector<FeatureColumn> columns;

  int column_count() const { return static_cast<int>(columns.size()); }
  int max_lag() const;
  std::vector<std::string> column_names() const;
};

FeatureSchema make_spatial_schema(bool include_lc = true);
FeatureSchema make_st_schema(int d1 = 7, int d2 = 7, int d3 = 7,
                             bool include_lc = true);

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

// Which LST lags are observed. available[k] refers to lag k (0 = the
// downscaling day itself); false drops that column from the assembled rows
// and from the schema the model is trained against.
struct GapMask {
  std::vector<bool> available;

  static GapMask identity(int d1);
  // Withholds the g most recent days: lags 0..g-1. g must lie in [0, d1].
  static GapMask trailing_gap(int d1, int g);
  bool is_identity() const;
};

// Removes the LST lag columns the mask withholds. Mask length must be
// d1 + 1 (schema_error otherwise); spatial schemas only accept the identity.
FeatureSchema apply_gap_mask(const FeatureSchema& schema, const GapMask& mask);

struct TrainingSelection {
  std::vector<int> pixels;  // mid-grid row-major indices, ascending
  int history_days = 365;
  Scenario scenario = Scenario::brtst;
};

// The standard per-scenario selection: the large site set trained on the day
// itself, the small set likewise, or the small set with a year of history.
TrainingSelection selection_for_scenario(const Scene& scene, Scenario s);

// Step-function fill: each day takes the most recent observation at or
// before it; days before the first observation take the first value.
// Observation days must be strictly increasing and within [1, n_days].
std::vector<double> forward_fill_lai(const std::vector<int>& obs_days,
                                     const std::vector<double>& obs_values,
                                     int n_days);

std::vector<double> build_spatial_row(const Scene& scene, int pixel, int day,
                                      const FeatureSchema& schema);
std::vector<double> build_st_row(const Scene& scene, int pixel, int day,
                                 const FeatureSchema& schema,
                                 const std::optional<GapMask>& mask = std::nullopt);

// Days in [day - history_days, day] that can produce a row: coarse SM
// observed, and (spatiotemporal mode) enough lag history behind them.
std::vector<int> eligible_days(const Scene& scene, const FeatureSchema& schema,
                               int day, int history_days);

struct TrainingSet {
  FeatureMatrix X;
  std::vector<double> y;                      // truth SM at the row's pixel/day
  std::vector<std::pair<int, int>> row_keys;  // (pixel, day) per row
  FeatureSchema schema;                       // post-mask layout
};

// One row per (selected pixel, eligible day), pixel-major then day-ascending.
// availability_error when no day qualifies.
TrainingSet assemble_training(const Scene& scene, const TrainingSelection& selection,
                              const FeatureSchema& schema, int day,
                              const std::optional<GapMask>& mask = std::nullopt);

// One row per mid-grid pixel for the downscaling day, same column layout as
// the matching training set.
FeatureMatrix assemble_inference(const Scene& scene, const FeatureSchema& schema,
                                 int day,
                                 const std::optional<GapMask>& mask = std::nullopt);

// CSV with one header line of column names, values in shortest round-trip
// form; the schema goes to `path + ".schema.json"`.
void export_feature_csv(const FeatureMatrix& X, const FeatureSchema& schema,
                        const std::string& path);

}  // namespace tdr
