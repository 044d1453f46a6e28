#include "tdr/featurize.hpp"

#include <algorithm>
#include <fstream>

namespace tdr {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::brt750: return "brt750";
    case Scenario::brt30: return "brt30";
    case Scenario::brtst: return "brtst";
  }
  throw argument_error("scenario_name: unknown scenario");
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "brt750") return Scenario::brt750;
  if (name == "brt30") return Scenario::brt30;
  if (name == "brtst") return Scenario::brtst;
  throw config_error("unknown scenario '" + name + "'");
}

int FeatureSchema::max_lag() const {
  if (mode == FeatureMode::spatial) return 0;
  return std::max({d1, d2, d3});
}

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

namespace {

FeatureColumn lag_column(FeatureColumn::Kind kind, const char* stem, int lag) {
  return {kind, lag, std::string(stem) + "_lag" + std::to_string(lag)};
}

void append_specials(FeatureSchema& s) {
  s.columns.push_back({FeatureColumn::Kind::coarse_sm, 0, "coarse_sm"});
  s.columns.push_back({FeatureColumn::Kind::x, 0, "x_km"});
  s.columns.push_back({FeatureColumn::Kind::y, 0, "y_km"});
  if (s.include_lc) s.columns.push_back({FeatureColumn::Kind::lc, 0, "lc"});
}

}  // namespace

FeatureSchema make_spatial_schema(bool include_lc) {
  FeatureSchema s;
  s.mode = FeatureMode::spatial;
  s.include_lc = include_lc;
  s.columns.push_back({FeatureColumn::Kind::lst_lag, 0, "lst"});
  s.columns.push_back({FeatureColumn::Kind::ppt_lag, 0, "ppt"});
  s.columns.push_back({FeatureColumn::Kind::lai_lag, 0, "lai"});
  if (include_lc) s.columns.push_back({FeatureColumn::Kind::lc, 0, "lc"});
  s.columns.push_back({FeatureColumn::Kind::coarse_sm, 0, "coarse_sm"});
  s.columns.push_back({FeatureColumn::Kind::x, 0, "x_km"});
  s.columns.push_back({FeatureColumn::Kind::y, 0, "y_km"});
  return s;
}

FeatureSchema make_st_schema(int d1, int d2, int d3, bool include_lc) {
  if (d1 < 0 || d2 < 0 || d3 < 0)
    throw argument_error("feature schema: lag windows must be >= 0");
  FeatureSchema s;
  s.mode = FeatureMode::spatiotemporal;
  s.d1 = d1;
  s.d2 = d2;
  s.d3 = d3;
  s.include_lc = include_lc;
  for (int lag = d1; lag >= 0; --lag)
    s.columns.push_back(lag_column(FeatureColumn::Kind::lst_lag, "lst", lag));
  for (int lag = d2; lag >= 0; --lag)
    s.columns.push_back(lag_column(FeatureColumn::Kind::lai_lag, "lai", lag));
  for (int lag = d3; lag >= 0; --lag)
    s.columns.push_back(lag_column(FeatureColumn::Kind::ppt_lag, "ppt", lag));
  append_specials(s);
  return s;
}

namespace {

const char* kind_label(FeatureColumn::Kind k) {
  switch (k) {
    case FeatureColumn::Kind::lst_lag: return "lst_lag";
    case FeatureColumn::Kind::lai_lag: return "lai_lag";
    case FeatureColumn::Kind::ppt_lag: return "ppt_lag";
    case FeatureColumn::Kind::coarse_sm: return "coarse_sm";
    case FeatureColumn::Kind::x: return "x";
    case FeatureColumn::Kind::y: return "y";
    case FeatureColumn::Kind::lc: return "lc";
  }
  throw argument_error("kind_label: unknown column kind");
}

FeatureColumn::Kind kind_from_label(const std::string& s) {
  if (s == "lst_lag") return FeatureColumn::Kind::lst_lag;
  if (s == "lai_lag") return FeatureColumn::Kind::lai_lag;
  if (s == "ppt_lag") return FeatureColumn::Kind::ppt_lag;
  if (s == "coarse_sm") return FeatureColumn::Kind::coarse_sm;
  if (s == "x") return FeatureColumn::Kind::x;
  if (s == "y") return FeatureColumn::Kind::y;
  if (s == "lc") return FeatureColumn::Kind::lc;
  throw schema_error("unknown feature column kind '" + s + "'");
}

}  // namespace

nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json j;
  j["mode"] = schema.mode == FeatureMode::spatial ? "spatial" : "spatiotemporal";
  j["d1"] = schema.d1;
  j["d2"] = schema.d2;
  j["d3"] = schema.d3;
  j["include_lc"] = schema.include_lc;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns)
    cols.push_back(
        {{"kind", kind_label(c.kind)}, {"lag", c.lag}, {"name", c.name}});
  j["columns"] = cols;
  return j;
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  try {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "spatial")
      s.mode = FeatureMode::spatial;
    else if (mode == "spatiotemporal")
      s.mode = FeatureMode::spatiotemporal;
    else
      throw schema_error("feature schema: unknown mode '" + mode + "'");
    s.d1 = j.at("d1").get<int>();
    s.d2 = j.at("d2").get<int>();
    s.d3 = j.at("d3").get<int>();
    s.include_lc = j.at("include_lc").get<bool>();
    for (const auto& c : j.at("columns"))
      s.columns.push_back({kind_from_label(c.at("kind").get<std::string>()),
                           c.at("lag").get<int>(),
                           c.at("name").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw schema_error("feature schema JSON: " + std::string(e.what()));
  }
  return s;
}

GapMask GapMask::identity(int d1) {
  if (d1 < 0) throw argument_error("GapMask: d1 must be >= 0");
  return {std::vector<bool>(static_cast<std::size_t>(d1) + 1, true)};
}

GapMask GapMask::trailing_gap(int d1, int g) {
  if (g < 0 || g > d1)
    throw argument_error("GapMask: trailing gap must lie in [0, d1]");
  GapMask m = identity(d1);
  for (int lag = 0; lag < g; ++lag) m.available[static_cast<std::size_t>(lag)] = false;
  return m;
}

bool GapMask::is_identity() const {
  return std::all_of(available.begin(), available.end(), [](bool b) { return b; });
}

FeatureSchema apply_gap_mask(const FeatureSchema& schema, const GapMask& mask) {
  if (schema.mode == FeatureMode::spatial) {
    if (!mask.is_identity())
      throw schema_error("gap masks apply to spatiotemporal schemas only");
    return schema;
  }
  if (static_cast<int>(mask.available.size()) != schema.d1 + 1)
    throw schema_error("gap mask length must equal d1 + 1");
  FeatureSchema out = schema;
  out.columns.clear();
  for (const auto& c : schema.columns) {
    if (c.kind == FeatureColumn::Kind::lst_lag &&
        !mask.available[static_cast<std::size_t>(c.lag)])
      continue;
    out.columns.push_back(c);
  }
  return out;
}

TrainingSelection selection_for_scenario(const Scene& scene, Scenario s) {
  TrainingSelection sel;
  sel.scenario = s;
  switch (s) {
    case Scenario::brt750:
      sel.pixels = scene.sites_large;
      sel.history_days = 0;
      break;
    case Scenario::brt30:
      sel.pixels = scene.sites_small;
      sel.history_days = 0;
      break;
    case Scenario::brtst:
      sel.pixels = scene.sites_small;
      sel.history_days = 365;
      break;
  }
  return sel;
}

std::vector<double> forward_fill_lai(const std::vector<int>& obs_days,
                                     const std::vector<double>& obs_values,
                                     int n_days) {
  if (obs_days.empty()) throw argument_error("forward_fill_lai: empty series");
  if (obs_days.size() != obs_values.size())
    throw argument_error("forward_fill_lai: day/value lengths differ");
  for (std::size_t i = 0; i < obs_days.size(); ++i) {
    if (obs_days[i] < 1 || obs_days[i] > n_days)
      throw argument_error("forward_fill_lai: observation day out of range");
    if (i > 0 && obs_days[i] <= obs_days[i - 1])
      throw argument_error("forward_fill_lai: days must be strictly increasing");
  }
  std::vector<double> daily(static_cast<std::size_t>(n_days));
  std::size_t next_obs = 0;
  double current = obs_values.front();
  for (int day = 1; day <= n_days; ++day) {
    while (next_obs < obs_days.size() && obs_days[next_obs] <= day)
      current = obs_values[next_obs++];
    daily[static_cast<std::size_t>(day - 1)] = current;
  }
  return daily;
}

namespace {

// Resolves every schema column against the scene for one (pixel, day). The
// day of the most recent LAI observation at or before each lagged day is
// precomputed by the caller (one entry per scene day, 0 = none yet).
class RowBuilder {
 public:
  RowBuilder(const Scene& scene, const FeatureSchema& schema)
      : scene_(scene), schema_(schema), grid_(scene.mid_cells()),
        mid_per_coarse_(scene.config.coarse_resolution_m /
                        scene.config.mid_resolution_m),
        last_lai_obs_(static_cast<std::size_t>(scene.n_days) + 1, 0) {
    int last = 0;
    for (int day = 1; day <= scene.n_days; ++day) {
      if (scene.lai_observed(day)) last = day;
      last_lai_obs_[static_cast<std::size_t>(day)] = last;
    }
  }

  void check_day(int day) const {
    if (day < 1 || day > scene_.n_days)
      throw availability_error("featurize: day " + std::to_string(day) +
                               " outside the scene");
    if (schema_.mode == FeatureMode::spatiotemporal && day <= schema_.max_lag())
      throw availability_error("featurize: day " + std::to_string(day) +
                               " lacks lag history");
    if (!scene_.coarse_available(day))
      throw availability_error("featurize: no coarse SM on day " +
                               std::to_string(day));
  }

  void fill(int pixel, int day, std::vector<double>& row) const {
    const int prow = pixel / grid_;
    const int pcol = pixel % grid_;
    row.clear();
    for (const auto& c : schema_.columns) {
      switch (c.kind) {
        case FeatureColumn::Kind::lst_lag:
          row.push_back(obs(scene_.lst_obs, day - c.lag, pixel));
          break;
        case FeatureColumn::Kind::ppt_lag:
          row.push_back(obs(scene_.ppt_obs, day - c.lag, pixel));
          break;
        case FeatureColumn::Kind::lai_lag:
          row.push_back(lai_filled(day - c.lag, pixel));
          break;
        case FeatureColumn::Kind::coarse_sm: {
          const Raster& coarse =
              *scene_.sm_coarse_obs[static_cast<std::size_t>(day - 1)];
          row.push_back(coarse.at(prow / mid_per_coarse_, pcol / mid_per_coarse_));
          break;
        }
        case FeatureColumn::Kind::x:
          row.push_back(pixel_centroid(scene_.mid_geom, prow, pcol).x_km);
          break;
        case FeatureColumn::Kind::y:
          row.push_back(pixel_centroid(scene_.mid_geom, prow, pcol).y_km);
          break;
        case FeatureColumn::Kind::lc:
          row.push_back(
              scene_.lc_mid[static_cast<std::size_t>(day - 1)].values
                  [static_cast<std::size_t>(pixel)]);
          break;
      }
    }
  }

 private:
  static double obs(const std::vector<Raster>& series, int day, int pixel) {
    return series[static_cast<std::size_t>(day - 1)]
        .values[static_cast<std::size_t>(pixel)];
  }

  double lai_filled(int day, int pixel) const {
    const int obs_day = last_lai_obs_[static_cast<std::size_t>(day)];
    // observations start on day 1, so any valid day has one behind it
    if (obs_day == 0)
      throw state_error("featurize: no LAI observation at or before day " +
                        std::to_string(day));
    return scene_.lai_obs[static_cast<std::size_t>(obs_day - 1)]
        ->values[static_cast<std::size_t>(pixel)];
  }

  const Scene& scene_;
  const FeatureSchema& schema_;
  int grid_;
  int mid_per_coarse_;
  std::vector<int> last_lai_obs_;
};

void check_pixel(const Scene& scene, int pixel) {
  const int n = scene.mid_cells() * scene.mid_cells();
  if (pixel < 0 || pixel >= n)
    throw index_error("featurize: pixel " + std::to_string(pixel) +
                      " outside the mid grid");
}

FeatureSchema effective_schema(const FeatureSchema& schema,
                               const std::optional<GapMask>& mask) {
  return mask ? apply_gap_mask(schema, *mask) : schema;
}

}  // namespace

std::vector<double> build_spatial_row(const Scene& scene, int pixel, int day,
                                      const FeatureSchema& schema) {
  if (schema.mode != FeatureMode::spatial)
    throw schema_error("build_spatial_row: schema is not spatial");
  check_pixel(scene, pixel);
  const RowBuilder builder(scene, schema);
  builder.check_day(day);
  std::vector<double> row;
  builder.fill(pixel, day, row);
  return row;
}

std::vector<double> build_st_row(const Scene& scene, int pixel, int day,
                                 const FeatureSchema& schema,
                                 const std::optional<GapMask>& mask) {
  if (schema.mode != FeatureMode::spatiotemporal)
    throw schema_error("build_st_row: schema is not spatiotemporal");
  check_pixel(scene, pixel);
  const FeatureSchema effective = effective_schema(schema, mask);
  const RowBuilder builder(scene, effective);
  builder.check_day(day);
  std::vector<double> row;
  builder.fill(pixel, day, row);
  return row;
}

std::vector<int> eligible_days(const Scene& scene, const FeatureSchema& schema,
                               int day, int history_days) {
  if (history_days < 0)
    throw argument_error("eligible_days: history_days must be >= 0");
  std::vector<int> days;
  const int first = std::max(1, day - history_days);
  const int min_day =
      schema.mode == FeatureMode::spatiotemporal ? schema.max_lag() + 1 : 1;
  for (int d = std::max(first, min_day); d <= day; ++d)
    if (scene.coarse_available(d)) days.push_back(d);
  return days;
}

TrainingSet assemble_training(const Scene& scene, const TrainingSelection& selection,
                              const FeatureSchema& schema, int day,
                              const std::optional<GapMask>& mask) {
  if (selection.pixels.empty())
    throw argument_error("assemble_training: no training pixels");
  // row order is (pixel, day) lexicographic regardless of input order
  std::vector<int> pixels = selection.pixels;
  std::sort(pixels.begin(), pixels.end());
  if (std::adjacent_find(pixels.begin(), pixels.end()) != pixels.end())
    throw argument_error("assemble_training: duplicate training pixels");
  for (int p : pixels) check_pixel(scene, p);

  const FeatureSchema effective = effective_schema(schema, mask);
  const std::vector<int> days =
      eligible_days(scene, effective, day, selection.history_days);
  if (days.empty())
    throw availability_error("assemble_training: no eligible day in [" +
                             std::to_string(day - selection.history_days) + ", " +
                             std::to_string(day) + "]");

  const RowBuilder builder(scene, effective);
  TrainingSet out;
  out.schema = effective;
  out.X = FeatureMatrix(0, static_cast<std::size_t>(effective.column_count()));
  std::vector<double> row;
  for (int pixel : pixels) {
    for (int d : days) {
      builder.fill(pixel, d, row);
      out.X.push_row(row);
      out.y.push_back(scene.sm_truth[static_cast<std::size_t>(d - 1)]
                          .values[static_cast<std::size_t>(pixel)]);
      out.row_keys.emplace_back(pixel, d);
    }
  }
  return out;
}

FeatureMatrix assemble_inference(const Scene& scene, const FeatureSchema& schema,
                                 int day, const std::optional<GapMask>& mask) {
  const FeatureSchema effective = effective_schema(schema, mask);
  const RowBuilder builder(scene, effective);
  builder.check_day(day);
  const int n = scene.mid_cells() * scene.mid_cells();
  FeatureMatrix X(0, static_cast<std::size_t>(effective.column_count()));
  std::vector<double> row;
  for (int pixel = 0; pixel < n; ++pixel) {
    builder.fill(pixel, day, row);
    X.push_row(row);
  }
  return X;
}

void export_feature_csv(const FeatureMatrix& X, const FeatureSchema& schema,
                        const std::string& path) {
  if (static_cast<std::size_t>(schema.column_count()) != X.cols)
    throw schema_error("export_feature_csv: schema width differs from the matrix");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("export_feature_csv: cannot open '" + path + "'");
  const auto names = schema.column_names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c) out << ',';
    out << names[c];
  }
  out << '\n';
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t c = 0; c < X.cols; ++c) {
      if (c) out << ',';
      out << format_double(X.at(r, c));
    }
    out << '\n';
  }
  if (!out) throw io_error("export_feature_csv: write failed for '" + path + "'");

  std::ofstream sidecar(path + ".schema.json", std::ios::binary);
  if (!sidecar)
    throw io_error("export_feature_csv: cannot open '" + path + ".schema.json'");
  sidecar << schema_to_json(schema).dump(2) << '\n';
}

}  // namespace tdr
