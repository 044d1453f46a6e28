#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tdr/common.hpp"
#include "tdr/pipeline.hpp"
#include "tdr/scene.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPartial = 4;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tdr::config_error("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw tdr::config_error("config file '" + path + "': " + e.what());
  }
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string scenario;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "scenario config JSON");
  cmd->add_option("--out", flags->out_dir, "output directory");
  cmd->add_option("--scenario", flags->scenario,
                  "scenario id: brt750, brt30 or brtst");
  cmd->add_option("--seed", flags->seed, "master seed override")
      ->each([flags](const std::string&) { flags->seed_set = true; });
  cmd->add_option("--threads", flags->threads, "worker threads (0 = auto)");
}

// Builds the effective scenario config: file first, then flag overrides.
tdr::ScenarioConfig scenario_from_flags(const CommonFlags& flags) {
  tdr::ScenarioConfig cfg;
  if (!flags.config_path.empty())
    cfg = tdr::scenario_config_from_json(read_json_file(flags.config_path));
  if (!flags.scenario.empty())
    cfg.scenario = tdr::scenario_from_name(flags.scenario);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.threads >= 0) cfg.threads = flags.threads;
  return cfg;
}

void print_report(const tdr::MetricsReport& report) {
  std::printf("days: %d attempted, %d completed\n", report.days_attempted,
              report.days_completed);
  for (const tdr::DayRecord& day : report.days)
    if (!day.ok)
      std::printf("  day %d failed: %s\n", day.day, day.error.c_str());
  std::printf("regional rmse:    %.6f\n", report.regional_rmse);
  std::printf("time-avg rmse:    %.6f (sd %.6f)\n", report.time_avg_rmse,
              report.rmse_sd);
  std::printf("frac |err|>0.04:  %.4f\n", report.frac_err_gt_004);
  std::printf("coarse agreement: %.4f\n", report.coarse_consistency_frac);
  const auto& names = tdr::StrataTable::names();
  for (int s = 0; s < tdr::kStrataCount; ++s)
    if (report.strata.count[s] > 0)
      std::printf("%-16s %.6f  (%zu pixel-days)\n", names[s].c_str(),
                  report.strata.rmse(s), report.strata.count[s]);
}

int run_command(const CommonFlags& flags) {
  const tdr::ScenarioConfig cfg = scenario_from_flags(flags);
  const tdr::MetricsReport report = tdr::run_scenario(cfg);
  print_report(report);
  if (report.days_completed == 0)
    throw tdr::data_error("no evaluation day completed");
  return report.days_completed < report.days_attempted ? kExitPartial
                                                       : kExitOk;
}

int synth_command(const CommonFlags& flags) {
  tdr::SceneConfig cfg;
  if (!flags.config_path.empty())
    cfg = tdr::scene_config_from_json(read_json_file(flags.config_path));
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.out_dir.empty())
    throw tdr::config_error("synth: --out directory is required");
  const tdr::Scene scene = tdr::build_scene(cfg);
  tdr::save_scene(scene, flags.out_dir);
  std::printf("scene written to %s (%d mid pixels, %d days)\n",
              flags.out_dir.c_str(), scene.mid_cells() * scene.mid_cells(),
              scene.config.years * 365);
  return kExitOk;
}

int sweep_lag_command(const CommonFlags& flags, const std::string& variable,
                      std::vector<int>& lags) {
  const tdr::ScenarioConfig cfg = scenario_from_flags(flags);
  const tdr::Scene scene = tdr::load_scene(cfg.scene_dir);
  if (lags.empty())
    for (int lag = 1; lag <= 14; ++lag) lags.push_back(lag);
  const auto points = tdr::lag_sensitivity_sweep(
      cfg, scene, tdr::lag_variable_from_name(variable), lags);
  std::printf("lag,mean_rmse,sd_rmse\n");
  for (const auto& p : points)
    std::printf("%d,%.6f,%.6f\n", p.lag, p.mean_rmse, p.sd_rmse);
  return kExitOk;
}

int sweep_trees_command(const CommonFlags& flags, std::vector<int>& k_grid,
                        int folds) {
  const tdr::ScenarioConfig cfg = scenario_from_flags(flags);
  const tdr::Scene scene = tdr::load_scene(cfg.scene_dir);
  if (k_grid.empty()) k_grid = {10, 25, 50, 75, 100};
  const auto points = tdr::tree_count_cv(cfg, scene, k_grid, folds);
  std::printf("k_trees,cv_rmse\n");
  for (const auto& p : points)
    std::printf("%d,%.6f\n", p.k_trees, p.cv_rmse);
  return kExitOk;
}

int sweep_lambda_command(const CommonFlags& flags,
                         const std::vector<double>& betas) {
  const tdr::ScenarioConfig cfg = scenario_from_flags(flags);
  const tdr::Scene scene = tdr::load_scene(cfg.scene_dir);
  const auto points = tdr::lambda_sweep(cfg, scene, betas);
  std::printf("lambda,beta,n_active,resub_error\n");
  for (const auto& p : points)
    std::printf("%g,%.10g,%d,%.6f\n", p.lambda, p.beta, p.n_active,
                p.resub_error);
  return kExitOk;
}

int gaps_command(const CommonFlags& flags, int max_gaps) {
  const tdr::ScenarioConfig cfg = scenario_from_flags(flags);
  const tdr::Scene scene = tdr::load_scene(cfg.scene_dir);
  const auto points = tdr::gap_experiment(cfg, scene, max_gaps);
  std::printf("gap,rmse,frac_err_gt_004\n");
  for (const auto& p : points)
    std::printf("%d,%.6f,%.6f\n", p.gap, p.rmse, p.frac_err_gt_004);
  return kExitOk;
}

int report_command(const CommonFlags& flags) {
  if (flags.out_dir.empty())
    throw tdr::config_error("report: --out must name a finished run directory");
  std::fputs(tdr::render_report(flags.out_dir).c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soil-moisture downscaling pipeline over synthetic scenes"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string lag_variable = "lst";
  std::vector<int> lags;
  std::vector<int> k_grid;
  std::vector<double> betas;
  int folds = 10;
  int max_gaps = 7;

  CLI::App* synth = app.add_subcommand("synth", "build a scene from JSON");
  CLI::App* run = app.add_subcommand("run", "run one downscaling scenario");
  CLI::App* sweep_lag =
      app.add_subcommand("sweep-lag", "vary one lag window over a grid");
  CLI::App* sweep_trees =
      app.add_subcommand("sweep-trees", "cross-validate the bag size");
  CLI::App* sweep_lambda =
      app.add_subcommand("sweep-lambda", "trace the pruning path");
  CLI::App* gaps =
      app.add_subcommand("gaps", "degrade recent LST availability");
  CLI::App* report =
      app.add_subcommand("report", "render a finished run directory");

  for (CLI::App* cmd :
       {synth, run, sweep_lag, sweep_trees, sweep_lambda, gaps, report})
    add_common_flags(cmd, &flags);
  sweep_lag->add_option("--variable", lag_variable,
                        "lst, ppt, lai or all (default lst)");
  sweep_lag->add_option("--lags", lags, "lag grid (default 1..14)");
  sweep_trees->add_option("--k-grid", k_grid,
                          "tree counts (default 10 25 50 75 100)");
  sweep_trees->add_option("--folds", folds, "CV folds (default 10)");
  sweep_lambda->add_option("--betas", betas,
                           "beta grid (default 25 log-spaced points)");
  gaps->add_option("--max-gaps", max_gaps, "widest gap to test (default 7)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return synth_command(flags);
    if (run->parsed()) return run_command(flags);
    if (sweep_lag->parsed())
      return sweep_lag_command(flags, lag_variable, lags);
    if (sweep_trees->parsed()) return sweep_trees_command(flags, k_grid, folds);
    if (sweep_lambda->parsed()) return sweep_lambda_command(flags, betas);
    if (gaps->parsed()) return gaps_command(flags, max_gaps);
    if (report->parsed()) return report_command(flags);
  } catch (const tdr::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tdr::argument_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tdr::schema_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tdr::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const tdr::availability_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
