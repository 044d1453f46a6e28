#include "tdr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "tdr/parallel.hpp"
#include "tdr/rng.hpp"

namespace fs = std::filesystem;

namespace tdr {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

template <class T>
T read_key(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("scenario config key '") + key + "': " + e.what());
  }
}

FeatureSchema schema_for(const ScenarioConfig& cfg) {
  if (cfg.scenario == Scenario::brtst)
    return make_st_schema(cfg.d1, cfg.d2, cfg.d3, cfg.include_lc);
  return make_spatial_schema(cfg.include_lc);
}

// Every day a model can be trained and applied on: coarse SM observed, and
// past the lag warm-up in spatiotemporal mode.
std::vector<int> default_eval_days(const Scene& scene, const FeatureSchema& schema) {
  std::vector<int> days;
  for (int day = 1; day <= scene.n_days; ++day) {
    if (!scene.coarse_available(day)) continue;
    if (schema.mode == FeatureMode::spatiotemporal && day <= schema.max_lag())
      continue;
    days.push_back(day);
  }
  return days;
}

std::vector<int> resolve_eval_days(const ScenarioConfig& cfg, const Scene& scene,
                                   const FeatureSchema& schema) {
  if (cfg.evaluation_days.empty()) {
    auto days = default_eval_days(scene, schema);
    if (days.empty())
      throw availability_error("run_scenario: no day has a coarse observation");
    return days;
  }
  auto days = cfg.evaluation_days;
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  return days;
}

Ensemble train_day_model(const ScenarioConfig& cfg, const Scene& scene,
                         const FeatureSchema& schema, int day,
                         const std::optional<GapMask>& mask, int threads) {
  const TrainingSelection sel = selection_for_scenario(scene, cfg.scenario);
  const TrainingSet set = assemble_training(scene, sel, schema, day, mask);
  const Ensemble bag =
      fit_bagged(set.X, set.y, cfg.k_trees, FitParams{},
                 derive_seed(cfg.seed, "day", static_cast<std::uint64_t>(day)),
                 threads);
  return select_trees(bag, set.X, set.y, cfg.lambda);
}

struct DayScore {
  DayRecord record;
  Raster downscaled;
  Raster error;
  StrataTable strata;
  std::size_t blocks_within = 0;
  std::size_t blocks_total = 0;
};

DayScore score_day(const Scene& scene, const FeatureSchema& schema,
                   const Ensemble& model, int day,
                   const std::optional<GapMask>& mask) {
  const FeatureMatrix X = assemble_inference(scene, schema, day, mask);
  const int n = scene.mid_cells();
  DayScore s;
  s.downscaled = Raster(Variable::SM, scene.config.mid_resolution_m, day, n, n);
  for (std::size_t r = 0; r < X.rows; ++r) {
    const double p = predict_bagged(model, X.row(r));
    // structurally guaranteed (leaf values are means of bounded targets)
    if (!(p >= 0.0 && p <= 0.6))
      throw state_error("score_day: downscaled SM outside [0, 0.6]");
    s.downscaled.values[r] = p;
  }

  const Raster& truth = scene.sm_truth[static_cast<std::size_t>(day - 1)];
  s.error = s.downscaled;
  double sum_sq = 0.0, sum_abs = 0.0, sum = 0.0;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < s.error.values.size(); ++i) {
    const double e = s.downscaled.values[i] - truth.values[i];
    s.error.values[i] = e;
    sum_sq += e * e;
    sum_abs += std::abs(e);
    sum += e;
    if (std::abs(e) > kErrorThreshold) ++n_gt;
  }
  const auto n_px = static_cast<double>(s.error.values.size());
  s.record.day = day;
  s.record.doy = day_of_year(day);
  s.record.ok = true;
  s.record.rmse = std::sqrt(sum_sq / n_px);
  s.record.bias = sum / n_px;
  s.record.mae = sum_abs / n_px;
  s.record.frac_err_gt_004 = static_cast<double>(n_gt) / n_px;
  s.record.n_active = model.active.size();

  const Raster lc_fine =
      landcover_raster(scene.config, scene.layout, scene.calendar, day);
  s.strata = compute_strata_rmse(s.downscaled, truth, lc_fine, s.record.doy);

  const int factor = scene.config.coarse_resolution_m / scene.config.mid_resolution_m;
  const Raster block = aggregate_block_mean(s.downscaled, factor);
  const Raster& coarse = *scene.sm_coarse_obs[static_cast<std::size_t>(day - 1)];
  for (std::size_t i = 0; i < block.values.size(); ++i) {
    ++s.blocks_total;
    if (std::abs(block.values[i] - coarse.values[i]) < kCoarseConsistencyTol)
      ++s.blocks_within;
  }
  return s;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  return out;
}

std::string day_stem(int day) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", day);
  return buf;
}

void write_metrics_daily(const std::string& dir, const MetricsReport& report) {
  auto out = open_out(dir + "/metrics_daily.csv");
  out << "day,doy,rmse,bias,mae,frac_err_gt_004,n_active\n";
  for (const DayRecord& r : report.days) {
    if (!r.ok) continue;
    out << r.day << ',' << r.doy << ',' << format_double(r.rmse) << ','
        << format_double(r.bias) << ',' << format_double(r.mae) << ','
        << format_double(r.frac_err_gt_004) << ',' << r.n_active << '\n';
  }
}

void write_strata(const std::string& dir, const StrataTable& strata) {
  auto out = open_out(dir + "/strata_rmse.csv");
  out << "stratum,pixel_days,rmse\n";
  for (int s = 0; s < kStrataCount; ++s) {
    out << StrataTable::names()[static_cast<std::size_t>(s)] << ','
        << strata.count[static_cast<std::size_t>(s)] << ','
        << format_double(strata.rmse(s)) << '\n';
  }
}

void write_summary(const std::string& dir, const MetricsReport& report) {
  auto out = open_out(dir + "/summary.csv");
  out << "metric,value\n";
  out << "days_attempted," << report.days_attempted << '\n';
  out << "days_completed," << report.days_completed << '\n';
  out << "regional_rmse," << format_double(report.regional_rmse) << '\n';
  out << "time_avg_rmse," << format_double(report.time_avg_rmse) << '\n';
  out << "rmse_sd," << format_double(report.rmse_sd) << '\n';
  out << "frac_err_gt_004," << format_double(report.frac_err_gt_004) << '\n';
  out << "coarse_consistency_frac," << format_double(report.coarse_consistency_frac)
      << '\n';
}

void write_manifest(const std::string& dir, const ScenarioConfig& cfg,
                    const MetricsReport& report) {
  nlohmann::json j;
  j["config"] = scenario_config_to_json(cfg);
  j["version"] = kVersion;
  j["days_attempted"] = report.days_attempted;
  j["days_completed"] = report.days_completed;
  nlohmann::json failed = nlohmann::json::array();
  for (const DayRecord& r : report.days)
    if (!r.ok) failed.push_back({{"day", r.day}, {"error", r.error}});
  j["failed_days"] = failed;
  auto out = open_out(dir + "/run_manifest.json");
  out << j.dump(2) << '\n';
}

}  // namespace

void ScenarioConfig::validate() const {
  if (k_trees < 1) throw config_error("scenario config: k_trees must be >= 1");
  if (!(lambda > 0.0)) throw config_error("scenario config: lambda must be > 0");
  if (d1 < 0 || d2 < 0 || d3 < 0)
    throw config_error("scenario config: lag windows must be >= 0");
  if (threads < 0) throw config_error("scenario config: threads must be >= 0");
  if (reuse_model_days < 1)
    throw config_error("scenario config: reuse_model_days must be >= 1");
  for (int day : evaluation_days)
    if (day < 1) throw config_error("scenario config: evaluation days are 1-based");
  if (!scene_dir.empty() && !fs::exists(scene_dir))
    throw config_error("scenario config: scene_dir does not exist: " + scene_dir);
}

ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("scenario config: expected a JSON object");
  static const std::set<std::string> known = {
      "scenario", "scene_dir",        "d1",      "d2",     "d3",
      "include_lc", "k_trees",        "lambda",  "seed",   "evaluation_days",
      "out_dir",    "threads",        "reuse_model_days"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw config_error("scenario config: unknown key '" + key + "'");

  ScenarioConfig c;
  c.scenario = scenario_from_name(
      read_key<std::string>(j, "scenario", scenario_name(c.scenario)));
  c.scene_dir = read_key<std::string>(j, "scene_dir", c.scene_dir);
  c.d1 = read_key<int>(j, "d1", c.d1);
  c.d2 = read_key<int>(j, "d2", c.d2);
  c.d3 = read_key<int>(j, "d3", c.d3);
  c.include_lc = read_key<bool>(j, "include_lc", c.include_lc);
  c.k_trees = read_key<int>(j, "k_trees", c.k_trees);
  c.lambda = read_key<double>(j, "lambda", c.lambda);
  c.seed = read_key<std::uint64_t>(j, "seed", c.seed);
  c.evaluation_days =
      read_key<std::vector<int>>(j, "evaluation_days", c.evaluation_days);
  c.out_dir = read_key<std::string>(j, "out_dir", c.out_dir);
  c.threads = read_key<int>(j, "threads", c.threads);
  c.reuse_model_days = read_key<int>(j, "reuse_model_days", c.reuse_model_days);
  return c;
}

nlohmann::json scenario_config_to_json(const ScenarioConfig& c) {
  return nlohmann::json{{"scenario", scenario_name(c.scenario)},
                        {"scene_dir", c.scene_dir},
                        {"d1", c.d1},
                        {"d2", c.d2},
                        {"d3", c.d3},
                        {"include_lc", c.include_lc},
                        {"k_trees", c.k_trees},
                        {"lambda", c.lambda},
                        {"seed", c.seed},
                        {"evaluation_days", c.evaluation_days},
                        {"out_dir", c.out_dir},
                        {"threads", c.threads},
                        {"reuse_model_days", c.reuse_model_days}};
}

const std::array<std::string, kStrataCount>& StrataTable::names() {
  static const std::array<std::string, kStrataCount> n = {
      "corn", "cotton", "bare_mixed", "bare_offseason", "bare_pure"};
  return n;
}

double StrataTable::rmse(int stratum) const {
  const auto s = static_cast<std::size_t>(stratum);
  if (count[s] == 0) return kNan;
  return std::sqrt(sse[s] / static_cast<double>(count[s]));
}

void StrataTable::add(const StrataTable& other) {
  for (std::size_t s = 0; s < kStrataCount; ++s) {
    count[s] += other.count[s];
    sse[s] += other.sse[s];
  }
}

StrataTable compute_strata_rmse(const Raster& predicted, const Raster& truth,
                                const Raster& lc_200m, int doy) {
  if (predicted.height != truth.height || predicted.width != truth.width)
    throw dimension_error("compute_strata_rmse: predicted/truth shape mismatch");
  if (predicted.height <= 0 || lc_200m.height % predicted.height != 0 ||
      lc_200m.width % predicted.width != 0 ||
      lc_200m.height / predicted.height != lc_200m.width / predicted.width)
    throw dimension_error("compute_strata_rmse: land cover is not an integer "
                          "refinement of the prediction grid");
  if (doy < 1 || doy > 365)
    throw argument_error("compute_strata_rmse: day-of-year out of range");

  const int factor = lc_200m.height / predicted.height;
  StrataTable table;
  for (int row = 0; row < predicted.height; ++row) {
    for (int col = 0; col < predicted.width; ++col) {
      int counts[3] = {0, 0, 0};
      for (int r = 0; r < factor; ++r)
        for (int c = 0; c < factor; ++c) {
          const int code =
              static_cast<int>(lc_200m.at(row * factor + r, col * factor + c));
          if (code < 0 || code > 2)
            throw data_error("compute_strata_rmse: land-cover code out of range");
          ++counts[code];
        }
      int majority = 0;
      for (int code = 1; code < 3; ++code)
        if (counts[code] > counts[majority]) majority = code;

      int stratum;
      if (majority == static_cast<int>(Crop::sweet_corn)) {
        stratum = StrataTable::corn;
      } else if (majority == static_cast<int>(Crop::cotton)) {
        stratum = StrataTable::cotton;
      } else if (doy > kLateSeasonDoy) {
        stratum = StrataTable::bare_offseason;
      } else if (counts[1] + counts[2] > 0) {
        stratum = StrataTable::bare_mixed;
      } else {
        stratum = StrataTable::bare_pure;
      }
      const double e = predicted.at(row, col) - truth.at(row, col);
      ++table.count[static_cast<std::size_t>(stratum)];
      table.sse[static_cast<std::size_t>(stratum)] += e * e;
    }
  }
  return table;
}

MetricsReport run_scenario(const ScenarioConfig& config, const Scene& scene) {
  config.validate();
  const FeatureSchema schema = schema_for(config);
  const int threads = resolve_threads(config.threads);
  const std::vector<int> days = resolve_eval_days(config, scene, schema);

  MetricsReport report;
  report.days_attempted = static_cast<int>(days.size());

  std::optional<Ensemble> model;
  int days_since_train = config.reuse_model_days;
  double sum_sq = 0.0;
  std::size_t n_px = 0, n_gt = 0, blocks_within = 0, blocks_total = 0;
  std::vector<double> daily_rmse;

  for (int day : days) {
    DayRecord rec;
    rec.day = day;
    rec.doy = day_of_year(day);
    try {
      if (!model || days_since_train >= config.reuse_model_days) {
        model = train_day_model(config, scene, schema, day, std::nullopt, threads);
        days_since_train = 0;
      }
      DayScore s = score_day(scene, schema, *model, day, std::nullopt);
      rec = s.record;
      report.strata.add(s.strata);
      daily_rmse.push_back(rec.rmse);
      const auto n = s.error.values.size();
      for (double e : s.error.values) sum_sq += e * e;
      n_px += n;
      n_gt += static_cast<std::size_t>(
          std::lround(rec.frac_err_gt_004 * static_cast<double>(n)));
      blocks_within += s.blocks_within;
      blocks_total += s.blocks_total;
      report.downscaled.push_back(std::move(s.downscaled));
      report.error_rasters.push_back(std::move(s.error));
      ++report.days_completed;
      ++days_since_train;
    } catch (const std::exception& ex) {
      rec.ok = false;
      rec.error = ex.what();
      days_since_train = config.reuse_model_days;  // force a fresh model next day
    }
    report.days.push_back(rec);
  }

  if (report.days_completed > 0) {
    report.regional_rmse = std::sqrt(sum_sq / static_cast<double>(n_px));
    double mean = 0.0;
    for (double r : daily_rmse) mean += r;
    mean /= static_cast<double>(daily_rmse.size());
    double var = 0.0;
    for (double r : daily_rmse) var += (r - mean) * (r - mean);
    var /= static_cast<double>(daily_rmse.size());
    report.time_avg_rmse = mean;
    report.rmse_sd = std::sqrt(var);
    report.frac_err_gt_004 = static_cast<double>(n_gt) / static_cast<double>(n_px);
    report.coarse_consistency_frac =
        static_cast<double>(blocks_within) / static_cast<double>(blocks_total);
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir + "/rasters");
    for (const Raster& r : report.downscaled)
      write_tdr_csv(r, config.out_dir + "/rasters/sm_down_d" + day_stem(r.day) +
                           ".csv");
    write_metrics_daily(config.out_dir, report);
    write_strata(config.out_dir, report.strata);
    write_summary(config.out_dir, report);
    write_manifest(config.out_dir, config, report);
  }
  return report;
}

MetricsReport run_scenario(const ScenarioConfig& config) {
  config.validate();
  if (config.scene_dir.empty())
    throw config_error("run_scenario: scene_dir is not set");
  const Scene scene = load_scene(config.scene_dir);
  return run_scenario(config, scene);
}

const char* lag_variable_name(LagVariable v) {
  switch (v) {
    case LagVariable::lst: return "lst";
    case LagVariable::ppt: return "ppt";
    case LagVariable::lai: return "lai";
    case LagVariable::all: return "all";
  }
  throw argument_error("lag_variable_name: unknown variable");
}

LagVariable lag_variable_from_name(const std::string& name) {
  if (name == "lst") return LagVariable::lst;
  if (name == "ppt") return LagVariable::ppt;
  if (name == "lai") return LagVariable::lai;
  if (name == "all") return LagVariable::all;
  throw config_error("unknown lag variable '" + name + "'");
}

std::vector<LagSweepPoint> lag_sensitivity_sweep(const ScenarioConfig& config,
                                                 const Scene& scene,
                                                 LagVariable variable,
                                                 std::span<const int> lag_grid) {
  config.validate();
  if (config.scenario != Scenario::brtst)
    throw config_error("lag sweep requires the spatiotemporal scenario");
  if (lag_grid.empty())
    throw argument_error("lag_sensitivity_sweep: empty lag grid");

  const TrainingSelection sel = selection_for_scenario(scene, Scenario::brtst);
  auto schema_at = [&](int lag) {
    switch (variable) {
      case LagVariable::lst:
        return make_st_schema(lag, config.d2, config.d3, config.include_lc);
      case LagVariable::ppt:
        return make_st_schema(config.d1, config.d2, lag, config.include_lc);
      case LagVariable::lai:
        return make_st_schema(config.d1, lag, config.d3, config.include_lc);
      case LagVariable::all:
        return make_st_schema(lag, lag, lag, config.include_lc);
    }
    throw argument_error("lag_sensitivity_sweep: unknown variable");
  };

  int widest = 0;
  for (int lag : lag_grid) {
    if (lag > sel.history_days)
      throw availability_error("lag_sensitivity_sweep: lag " + std::to_string(lag) +
                               " exceeds the " + std::to_string(sel.history_days) +
                               "-day training history");
    widest = std::max(widest, schema_at(lag).max_lag());
  }

  // One shared day list keeps the points comparable: every day must clear the
  // widest warm-up in the grid.
  std::vector<int> days;
  if (config.evaluation_days.empty()) {
    for (int day = 1; day <= scene.n_days; ++day)
      if (scene.coarse_available(day) && day > widest) days.push_back(day);
    if (days.empty())
      throw availability_error("lag_sensitivity_sweep: no usable evaluation day");
  } else {
    days = config.evaluation_days;
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());
  }

  const int threads = resolve_threads(config.threads);
  std::vector<LagSweepPoint> points;
  for (int lag : lag_grid) {
    const FeatureSchema schema = schema_at(lag);
    std::vector<double> daily;
    for (int day : days) {
      const Ensemble model =
          train_day_model(config, scene, schema, day, std::nullopt, threads);
      daily.push_back(score_day(scene, schema, model, day, std::nullopt).record.rmse);
    }
    double mean = 0.0;
    for (double r : daily) mean += r;
    mean /= static_cast<double>(daily.size());
    double var = 0.0;
    for (double r : daily) var += (r - mean) * (r - mean);
    var /= static_cast<double>(daily.size());
    points.push_back({lag, mean, std::sqrt(var)});
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    auto out = open_out(config.out_dir + "/lag_sweep_" +
                        lag_variable_name(variable) + ".csv");
    out << "lag,mean_rmse,sd_rmse\n";
    for (const LagSweepPoint& p : points)
      out << p.lag << ',' << format_double(p.mean_rmse) << ','
          << format_double(p.sd_rmse) << '\n';
  }
  return points;
}

int select_heterogeneous_day(const Scene& scene) {
  std::vector<int> days;
  std::vector<double> entropies;
  double best_entropy = -1.0;
  for (int day = 1; day <= scene.n_days; ++day) {
    if (!scene.coarse_available(day)) continue;
    const Raster& lc = scene.lc_mid[static_cast<std::size_t>(day - 1)];
    std::array<std::size_t, 3> counts{};
    for (double v : lc.values) ++counts[static_cast<std::size_t>(v)];
    double h = 0.0;
    for (std::size_t c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(lc.values.size());
      h -= p * std::log(p);
    }
    days.push_back(day);
    entropies.push_back(h);
    best_entropy = std::max(best_entropy, h);
  }
  if (days.empty()) return -1;
  // The class mix, and with it the entropy, is constant across a whole
  // multi-crop season, so the argmax is a plateau. Take the plateau in the
  // last year (a full training history behind it) and step to its middle,
  // away from the planting and harvest edges.
  std::vector<int> peak;
  for (std::size_t i = 0; i < days.size(); ++i)
    if (entropies[i] >= best_entropy - 1e-12) peak.push_back(days[i]);
  std::vector<int> last_run{peak.back()};
  for (std::size_t i = peak.size() - 1; i-- > 0;) {
    if (peak[i + 1] - peak[i] > scene.config.coarse_sm_cadence_days) break;
    last_run.push_back(peak[i]);
  }
  return last_run[last_run.size() / 2];
}

std::vector<GapPoint> gap_experiment(const ScenarioConfig& config,
                                     const Scene& scene, int max_gaps) {
  config.validate();
  if (config.scenario != Scenario::brtst)
    throw config_error("gap experiment requires the spatiotemporal scenario");
  if (max_gaps < 0 || max_gaps > config.d1)
    throw argument_error("gap_experiment: gap width must lie in [0, d1]");

  const FeatureSchema schema =
      make_st_schema(config.d1, config.d2, config.d3, config.include_lc);
  const int day = config.evaluation_days.empty() ? select_heterogeneous_day(scene)
                                                 : config.evaluation_days.front();
  const int threads = resolve_threads(config.threads);

  std::vector<GapPoint> points;
  std::vector<Raster> rasters;
  for (int g = 0; g <= max_gaps; ++g) {
    const GapMask mask = GapMask::trailing_gap(config.d1, g);
    const Ensemble model = train_day_model(config, scene, schema, day, mask, threads);
    DayScore s = score_day(scene, schema, model, day, mask);
    points.push_back({g, s.record.rmse, s.record.frac_err_gt_004});
    rasters.push_back(std::move(s.downscaled));
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir + "/rasters");
    for (int g = 0; g <= max_gaps; ++g)
      write_tdr_csv(rasters[static_cast<std::size_t>(g)],
                    config.out_dir + "/rasters/sm_gap" + std::to_string(g) + "_d" +
                        day_stem(day) + ".csv");
    auto out = open_out(config.out_dir + "/gap_curve.csv");
    out << "gap,rmse,frac_err_gt_004\n";
    for (const GapPoint& p : points)
      out << p.gap << ',' << format_double(p.rmse) << ','
          << format_double(p.frac_err_gt_004) << '\n';
  }
  return points;
}

std::vector<TreeCountCV> tree_count_cv(const ScenarioConfig& config,
                                       const Scene& scene,
                                       std::span<const int> k_grid, int folds) {
  config.validate();
  const FeatureSchema schema = schema_for(config);
  const std::vector<int> days = resolve_eval_days(config, scene, schema);
  const int day = days.front();
  const TrainingSelection sel = selection_for_scenario(scene, config.scenario);
  const TrainingSet set = assemble_training(scene, sel, schema, day);
  const auto result = cross_validate_treecount(
      set.X, set.y, k_grid, folds, FitParams{},
      derive_seed(config.seed, "cv", static_cast<std::uint64_t>(day)),
      resolve_threads(config.threads));

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    auto out = open_out(config.out_dir + "/treecount_cv.csv");
    out << "k_trees,cv_rmse\n";
    for (const TreeCountCV& p : result)
      out << p.k_trees << ',' << format_double(p.cv_rmse) << '\n';
  }
  return result;
}

std::vector<LambdaSweepPoint> lambda_sweep(const ScenarioConfig& config,
                                           const Scene& scene,
                                           std::span<const double> betas) {
  config.validate();
  const FeatureSchema schema = schema_for(config);
  const std::vector<int> days = resolve_eval_days(config, scene, schema);
  const int day = days.front();
  const TrainingSelection sel = selection_for_scenario(scene, config.scenario);
  const TrainingSet set = assemble_training(scene, sel, schema, day);
  const Ensemble bag =
      fit_bagged(set.X, set.y, config.k_trees, FitParams{},
                 derive_seed(config.seed, "day", static_cast<std::uint64_t>(day)),
                 resolve_threads(config.threads));

  std::vector<double> grid(betas.begin(), betas.end());
  if (grid.empty()) {
    const EnsemblePruner pruner(bag, set.X, set.y);
    const double ceiling = pruner.beta_ceiling();
    const int n_points = 25;
    for (int i = 0; i < n_points; ++i)
      grid.push_back(ceiling * std::pow(10.0, -6.0 * (n_points - 1 - i) /
                                                  (n_points - 1)));
  }
  const auto points = sweep_beta(bag, set.X, set.y, grid);

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    auto out = open_out(config.out_dir + "/lambda_sweep.csv");
    out << "lambda,beta,n_active,resub_error\n";
    for (const LambdaSweepPoint& p : points)
      out << format_double(p.lambda) << ',' << format_double(p.beta) << ','
          << p.n_active << ',' << format_double(p.resub_error) << '\n';
  }
  return points;
}

std::string render_report(const std::string& run_dir) {
  auto read_rows = [&](const std::string& name) {
    std::ifstream in(run_dir + "/" + name, std::ios::binary);
    if (!in) throw io_error("render_report: missing " + run_dir + "/" + name);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) rows.push_back(line);
    return rows;
  };

  std::ostringstream out;
  out << "run: " << run_dir << '\n';
  out << "summary\n";
  const auto summary = read_rows("summary.csv");
  for (std::size_t i = 1; i < summary.size(); ++i) {
    const auto comma = summary[i].find(',');
    out << "  " << summary[i].substr(0, comma) << " = "
        << summary[i].substr(comma + 1) << '\n';
  }
  out << "strata rmse (pixel-days)\n";
  const auto strata = read_rows("strata_rmse.csv");
  for (std::size_t i = 1; i < strata.size(); ++i) out << "  " << strata[i] << '\n';
  const auto daily = read_rows("metrics_daily.csv");
  out << "daily rows: " << (daily.size() - 1) << '\n';
  return out.str();
}

}  // namespace tdr
