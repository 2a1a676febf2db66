// Command-line surface over the pipeline: prep, calibrate, train, evaluate,
// report. Exit codes: 0 success, 1 runtime failure, 2 config/schema error.
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fairdcov/fairdcov.hpp"

namespace {

using namespace fairdcov;

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    grid.push_back(std::stod(item));
  }
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairdcov: fairness-regularised training via distance covariance"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir = "runs/out", bundle_dir, model_path, baseline_path,
              evaluation_dir;
  std::string regulariser, grid_csv;
  std::uint64_t seed = 0;
  std::size_t n_seeds = 0;
  double lambda = -1.0;
  bool deterministic = false;

  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--seeds", n_seeds, "number of calibration seeds");
  app.add_option("--lambda", lambda, "regularisation strength for train");
  app.add_option("--regulariser", regulariser, "none|separate|jdcov|ccdcov");
  app.add_option("--grid", grid_csv, "comma-separated lambda grid");
  app.add_flag("--deterministic", deterministic, "force single-threaded deterministic mode");

  auto* prep = app.add_subcommand("prep", "ingest, clean, split, freeze transforms");
  auto* calibrate = app.add_subcommand("calibrate", "lambda sweep with fairness/accuracy curves");
  calibrate->add_option("--bundle", bundle_dir, "prep output directory")->required();
  auto* train_cmd = app.add_subcommand("train", "train a model at a chosen lambda");
  train_cmd->add_option("--bundle", bundle_dir, "prep output directory")->required();
  auto* evaluate = app.add_subcommand("evaluate", "single-shot test-set evaluation");
  evaluate->add_option("--bundle", bundle_dir, "prep output directory")->required();
  evaluate->add_option("--model", model_path, "model checkpoint")->required();
  evaluate->add_option("--baseline", baseline_path, "baseline checkpoint for the Wilcoxon test");
  auto* report = app.add_subcommand("report", "figures from an evaluation");
  report->add_option("--evaluation", evaluation_dir, "evaluate output directory")->required();

  CLI11_PARSE(app, argc, argv);

  // Thread-count override: 1 forces deterministic mode. Execution is
  // single-threaded either way, so any other value only emits a note.
  if (const char* threads = std::getenv("FAIRDCOV_THREADS")) {
    if (std::string(threads) == "1") deterministic = true;
    else
      std::cerr << "note: FAIRDCOV_THREADS=" << threads
                << " requested; running single-threaded (deterministic)\n";
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed != 0) cfg.seed = seed;
    if (n_seeds != 0) cfg.calibration_seeds = n_seeds;
    if (lambda >= 0.0) cfg.train_lambda = lambda;
    if (!regulariser.empty()) {
      cfg.train_regulariser = detail::regulariser_from_string(regulariser);
      cfg.regularisers = {cfg.train_regulariser};
    }
    if (!grid_csv.empty()) cfg.grid = parse_grid(grid_csv);
    cfg.deterministic = cfg.deterministic || deterministic;

    if (prep->parsed()) {
      cmd_prep(cfg, out_dir);
    } else if (calibrate->parsed()) {
      cmd_calibrate(cfg, bundle_dir, out_dir);
    } else if (train_cmd->parsed()) {
      if (lambda < 0.0 && cfg.train_lambda <= 0.0 &&
          cfg.train_regulariser != RegulariserKind::none)
        std::cerr << "note: training with lambda = " << cfg.train_lambda << "\n";
      cmd_train(cfg, bundle_dir, out_dir);
    } else if (evaluate->parsed()) {
      const FairnessReport r =
          cmd_evaluate(cfg, bundle_dir, model_path, out_dir, baseline_path);
      std::cout << "n=" << r.n << " rps=" << r.mean_rps << " jsd=" << r.jsd << " uf=" << r.uf
                << " ccdcov=" << r.ccdcov << " jdcov=" << r.jdcov << "\n";
    } else if (report->parsed()) {
      cmd_report(cfg, evaluation_dir, out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
