// Command layer behind the CLI: dataset preparation, lambda calibration,
// final training, single-shot test evaluation, and figure generation. Every
// command materialises its outputs under a run directory together with a
// manifest listing inputs and outputs with checksums; the manifest doubles
// as the leakage audit (only `evaluate` ever reads the test split) and as
// the single-evaluation guard.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairdcov/checkpoint.hpp"
#include "fairdcov/evaluate.hpp"
#include "fairdcov/figures.hpp"
#include "fairdcov/search.hpp"
#include "fairdcov/split.hpp"
#include "fairdcov/synthetic.hpp"
#include "fairdcov/table.hpp"

namespace fairdcov {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string config_path;
  std::string dataset_csv;  // unused for the synthetic recipe
  DatasetSchema schema;
  SplitPlan split;
  PlantedBiasParams synthetic;

  HyperParams hyper;
  EarlyStoppingPolicy stopping{60, 8};
  int hutchinson_probes = 1;

  std::uint64_t seed = 1;
  std::size_t calibration_seeds = 3;
  std::vector<double> grid;  // empty: derived from the suggested lambda scale
  std::vector<RegulariserKind> regularisers{RegulariserKind::ccdcov, RegulariserKind::jdcov};

  double train_lambda = 0.0;
  RegulariserKind train_regulariser = RegulariserKind::ccdcov;

  std::size_t permutation_replicates = 199;
  bool oversample = false;
  std::size_t oversample_min = 30;
  std::size_t figure_min_subgroup = 100;
  bool deterministic = true;
};

namespace detail {

inline RegulariserKind regulariser_from_string(const std::string& s) {
  if (s == "none") return RegulariserKind::none;
  if (s == "separate") return RegulariserKind::separate_sum;
  if (s == "jdcov") return RegulariserKind::jdcov;
  if (s == "ccdcov") return RegulariserKind::ccdcov;
  throw ConfigError("unknown regulariser: " + s);
}

inline ColumnRole role_from_string(const std::string& s) {
  if (s == "response") return ColumnRole::response;
  if (s == "exposure") return ColumnRole::exposure;
  if (s == "feature") return ColumnRole::feature;
  if (s == "protected") return ColumnRole::protected_attr;
  if (s == "drop") return ColumnRole::drop;
  throw ConfigError("unknown column role: " + s);
}

inline Encoding encoding_from_string(const std::string& s) {
  if (s == "onehot") return Encoding::onehot;
  if (s == "ordinal") return Encoding::ordinal;
  if (s == "minmax") return Encoding::minmax;
  if (s == "none") return Encoding::none;
  throw ConfigError("unknown encoding: " + s);
}

inline ProtectedKind protected_kind_from_string(const std::string& s) {
  if (s == "binary") return ProtectedKind::binary;
  if (s == "categorical") return ProtectedKind::categorical_onehot;
  if (s == "continuous") return ProtectedKind::continuous;
  throw ConfigError("unknown protected kind: " + s);
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  RunConfig cfg;
  cfg.config_path = path;
  cfg.dataset_csv = j.value("dataset", "");
  cfg.schema.task = j.value("task", "binary") == "poisson" ? Task::poisson : Task::binary;
  cfg.schema.recipe = recipe_from_string(j.value("recipe", "generic"));

  for (const auto& c : j.value("columns", nlohmann::json::array())) {
    ColumnSpec spec;
    spec.name = c.at("name").get<std::string>();
    spec.role = detail::role_from_string(c.value("role", "feature"));
    spec.encoding = detail::encoding_from_string(c.value("encoding", "none"));
    if (spec.role == ColumnRole::protected_attr) {
      spec.protected_kind = detail::protected_kind_from_string(c.value("kind", "binary"));
      spec.also_feature = c.value("also_feature", false);
    }
    if (c.contains("ordinal_order"))
      spec.ordinal_order = c.at("ordinal_order").get<std::vector<std::string>>();
    cfg.schema.columns.push_back(std::move(spec));
  }
  if (j.contains("binning")) {
    const auto& b = j.at("binning");
    if (b.contains("quantiles")) cfg.schema.binning.quantiles = b.at("quantiles").get<std::vector<double>>();
    cfg.schema.binning.prediction_bins = b.value("prediction_bins", 20);
  }
  if (j.contains("split")) {
    cfg.split.test_fraction = j.at("split").value("test_fraction", 0.2);
    cfg.split.validation_fraction = j.at("split").value("validation_fraction", 0.3);
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    cfg.synthetic.n = s.value("n", cfg.synthetic.n);
    cfg.synthetic.marginal_strength =
        s.value("marginal_strength", cfg.synthetic.marginal_strength);
    cfg.synthetic.interaction_strength =
        s.value("interaction_strength", cfg.synthetic.interaction_strength);
    cfg.synthetic.proxy_noise = s.value("proxy_noise", cfg.synthetic.proxy_noise);
    cfg.synthetic.feature_weight = s.value("feature_weight", cfg.synthetic.feature_weight);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    cfg.hyper.learning_rate = m.value("learning_rate", cfg.hyper.learning_rate);
    cfg.hyper.batch_size = m.value("batch_size", cfg.hyper.batch_size);
    cfg.hyper.hidden_layers = m.value("hidden_layers", cfg.hyper.hidden_layers);
    cfg.hyper.hidden_width = m.value("hidden_width", cfg.hyper.hidden_width);
    cfg.hyper.dropout = m.value("dropout", cfg.hyper.dropout);
    cfg.hyper.hessian_power = m.value("hessian_power", cfg.hyper.hessian_power);
  }
  if (j.contains("stopping")) {
    cfg.stopping.max_epochs = j.at("stopping").value("max_epochs", cfg.stopping.max_epochs);
    cfg.stopping.patience = j.at("stopping").value("patience", cfg.stopping.patience);
  }
  cfg.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("calibrate")) {
    const auto& c = j.at("calibrate");
    cfg.calibration_seeds = c.value("seeds", cfg.calibration_seeds);
    if (c.contains("grid")) cfg.grid = c.at("grid").get<std::vector<double>>();
    if (c.contains("regularisers")) {
      cfg.regularisers.clear();
      for (const auto& r : c.at("regularisers"))
        cfg.regularisers.push_back(detail::regulariser_from_string(r.get<std::string>()));
    }
  }
  if (j.contains("train")) {
    cfg.train_lambda = j.at("train").value("lambda", 0.0);
    cfg.train_regulariser =
        detail::regulariser_from_string(j.at("train").value("regulariser", "ccdcov"));
  }
  if (j.contains("evaluate"))
    cfg.permutation_replicates = j.at("evaluate").value("permutation_replicates", std::size_t{199});
  if (j.contains("oversample")) {
    cfg.oversample = j.at("oversample").value("enabled", false);
    cfg.oversample_min = j.at("oversample").value("min_count", std::size_t{30});
  }
  cfg.figure_min_subgroup = j.value("figure_min_subgroup", std::size_t{100});
  cfg.schema.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Manifest and checksums
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checksum: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return hex;
}

class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& cfg) {
    j_["command"] = std::move(command);
    j_["config"] = cfg.config_path;
    j_["seed"] = cfg.seed;
    j_["inputs"] = nlohmann::json::array();
    j_["outputs"] = nlohmann::json::array();
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j_["timestamp_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  }

  void add_input(const std::string& path) {
    j_["inputs"].push_back({{"path", path}, {"checksum", file_checksum(path)}});
  }
  void add_output(const std::string& path) {
    j_["outputs"].push_back({{"path", path}, {"checksum", file_checksum(path)}});
  }
  void set(const std::string& key, const nlohmann::json& value) { j_[key] = value; }

  void save(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "manifest.json");
    out << j_.dump(2) << "\n";
  }

  static std::optional<nlohmann::json> load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) return std::nullopt;
    nlohmann::json j;
    in >> j;
    return j;
  }

 private:
  nlohmann::json j_;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Table select_table_rows(const Table& t, std::span<const std::size_t> idx) {
  Table out;
  out.columns = t.columns;
  out.rows.reserve(idx.size());
  for (std::size_t i : idx) out.rows.push_back(t.rows[i]);
  return out;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// prep: ingest, clean, split, fit transforms, write the bundle
// ---------------------------------------------------------------------------

inline void cmd_prep(const RunConfig& cfg, const std::string& out_dir) {
  const auto dir = detail::ensure_dir(out_dir);
  RunManifest manifest("prep", cfg);

  Table table;
  if (cfg.schema.recipe == Recipe::synthetic) {
    table = planted_bias_table(cfg.synthetic, cfg.seed);
  } else {
    if (cfg.dataset_csv.empty()) throw ConfigError("prep: config has no dataset path");
    manifest.add_input(cfg.dataset_csv);
    IngestResult ingest = ingest_csv(cfg.dataset_csv, cfg.schema.recipe,
                                     cfg.schema.response().name);
    manifest.set("rejected_lines", ingest.rejected_lines);
    manifest.set("recipe_dropped_rows", ingest.recipe_dropped);
    table = std::move(ingest.table);
  }
  for (const auto& spec : cfg.schema.columns) (void)table.col_index(spec.name);

  // Outer split: train vs held-out test.
  const auto strata = strata_labels(table, cfg.schema);
  const TwoWaySplit outer = stratified_holdout(strata, cfg.split.test_fraction, cfg.seed);
  Table train_table = detail::select_table_rows(table, outer.main);
  Table test_table = detail::select_table_rows(table, outer.holdout);

  // Inner split: subtraining vs validation, within the training side.
  const auto train_strata = strata_labels(train_table, cfg.schema);
  const TwoWaySplit inner =
      stratified_holdout(train_strata, cfg.split.validation_fraction, splitmix64(cfg.seed ^ 0x5eed));
  Table subtrain_table = detail::select_table_rows(train_table, inner.main);
  Table valid_table = detail::select_table_rows(train_table, inner.holdout);

  if (cfg.oversample) {
    // Joint subgroup keys over the raw subtraining rows, continuous
    // attributes binned by the schema quantiles.
    const FittedTransforms sub_tr = fit_transforms(subtrain_table, cfg.schema);
    const PreparedData prepared = apply_transforms(subtrain_table, cfg.schema, sub_tr);
    const auto keys = subgroup_keys(prepared.protected_specs);
    const auto augmented =
        oversample_subgroups(keys, cfg.oversample_min, splitmix64(cfg.seed ^ 0x0e5a));
    subtrain_table = detail::select_table_rows(subtrain_table, augmented);
    manifest.set("oversampled_rows", augmented.size() - keys.size());
  }

  const FittedTransforms transforms_subtrain = fit_transforms(subtrain_table, cfg.schema);
  const FittedTransforms transforms_train = fit_transforms(train_table, cfg.schema);

  const auto write_table = [&](const char* name, const Table& t) {
    const std::string path = (dir / name).string();
    write_csv(path, t);
    manifest.add_output(path);
  };
  write_table("train.csv", train_table);
  write_table("test.csv", test_table);
  write_table("subtrain.csv", subtrain_table);
  write_table("valid.csv", valid_table);

  const auto write_json = [&](const char* name, const nlohmann::json& j) {
    const std::string path = (dir / name).string();
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    manifest.add_output(path);
  };
  write_json("transforms_subtrain.json", transforms_to_json(transforms_subtrain));
  write_json("transforms_train.json", transforms_to_json(transforms_train));

  manifest.set("rows", {{"total", table.rows.size()},
                        {"train", train_table.rows.size()},
                        {"test", test_table.rows.size()},
                        {"subtrain", subtrain_table.rows.size()},
                        {"valid", valid_table.rows.size()}});
  manifest.save(dir);
}

// ---------------------------------------------------------------------------
// calibrate: lambda sweep per regulariser, CSV records + curves
// ---------------------------------------------------------------------------

namespace detail {

inline PreparedData load_prepared(const std::filesystem::path& bundle, const char* split_csv,
                                  const char* transforms_json, const DatasetSchema& schema,
                                  RunManifest& manifest) {
  const std::string csv_path = (bundle / split_csv).string();
  const std::string tr_path = (bundle / transforms_json).string();
  manifest.add_input(csv_path);
  manifest.add_input(tr_path);
  const CsvReadResult csv = read_csv(csv_path);
  std::ifstream in(tr_path);
  nlohmann::json j;
  in >> j;
  return apply_transforms(csv.table, schema, transforms_from_json(j));
}

}  // namespace detail

inline void cmd_calibrate(const RunConfig& cfg, const std::string& bundle_dir,
                          const std::string& out_dir) {
  const auto bundle = std::filesystem::path(bundle_dir);
  const auto dir = detail::ensure_dir(out_dir);
  RunManifest manifest("calibrate", cfg);

  const PreparedData sub = detail::load_prepared(bundle, "subtrain.csv",
                                                 "transforms_subtrain.json", cfg.schema, manifest);
  const PreparedData val = detail::load_prepared(bundle, "valid.csv", "transforms_subtrain.json",
                                                 cfg.schema, manifest);

  TrainingConfig base = make_training_config(cfg.hyper, sub.data.X.cols(), cfg.schema.task,
                                             cfg.stopping, cfg.seed);
  base.optimiser.hutchinson_probes = cfg.hutchinson_probes;

  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < cfg.calibration_seeds; ++s)
    seeds.push_back(splitmix64(cfg.seed ^ (0xCA11 + s)));

  // Baseline run for the lambda-scale heuristic (also reported).
  TrainingConfig baseline_cfg = base;
  baseline_cfg.seed = seeds.front();
  const TrainResult baseline = train(sub.data, val.data, baseline_cfg);
  if (baseline.diverged) throw DivergenceDetected("calibrate: baseline run diverged");
  const auto baseline_pred = baseline.model.forward(val.data.X);
  const Matrix baseline_block = Matrix::column(baseline_pred);
  const double baseline_loss = objective_value(baseline.model, val.data, baseline_cfg.objective);

  nlohmann::json scales;
  std::ofstream csv((dir / "calibration.csv").string());
  csv << "regulariser,lambda,seed,kind,diverged,rps,ccdcov,jdcov,jsd,uf,n_seeds,n_diverged\n";

  std::vector<Series> jsd_vs_lambda, jsd_vs_rps;
  for (RegulariserKind kind : cfg.regularisers) {
    const double psi = regulariser_value(kind, baseline_block, val.data.attrs);
    double scale = 0.0;
    try {
      scale = suggest_lambda_scale(baseline_loss, psi);
    } catch (const DegenerateRegulariser&) {
      scale = 0.0;
    }
    scales[to_string(kind)] = {{"baseline_psi", psi}, {"suggested_scale", scale}};

    std::vector<double> grid = cfg.grid;
    if (grid.empty()) {
      if (scale <= 0.0) throw DegenerateRegulariser("calibrate: cannot derive a lambda grid");
      grid = {0.0, 0.5 * scale, scale, 2.0 * scale, 4.0 * scale, 8.0 * scale};
    }

    const CalibrationResult result = calibrate_lambda(
        sub.data, val.data, val.protected_specs, base, grid, seeds, kind, cfg.schema.binning);

    for (const auto& rec : result.records)
      csv << to_string(kind) << "," << detail::format_double(rec.lambda) << "," << rec.seed
          << ",record," << (rec.diverged ? 1 : 0) << "," << detail::format_double(rec.rps) << ","
          << detail::format_double(rec.ccdcov) << "," << detail::format_double(rec.jdcov) << ","
          << detail::format_double(rec.jsd) << "," << detail::format_double(rec.uf) << ",,\n";
    for (const auto& agg : result.aggregates)
      csv << to_string(kind) << "," << detail::format_double(agg.lambda) << ",,aggregate,,"
          << detail::format_double(agg.mean_rps) << "," << detail::format_double(agg.mean_ccdcov)
          << "," << detail::format_double(agg.mean_jdcov) << ","
          << detail::format_double(agg.mean_jsd) << "," << detail::format_double(agg.mean_uf)
          << "," << agg.n_seeds << "," << agg.n_diverged << "\n";

    // Plot-data twin per regulariser.
    const std::string plot_csv = (dir / (std::string("plot_data_") + to_string(kind) + ".csv")).string();
    std::ofstream pd(plot_csv);
    pd << "lambda,mean_RPS,mean_JSD,mean_UF,mean_CCdCov,mean_JdCov,n_seeds,n_diverged\n";
    Series s_lambda{to_string(kind), {}, {}, false};
    Series s_rps{to_string(kind), {}, {}, false};
    for (const auto& agg : result.aggregates) {
      pd << detail::format_double(agg.lambda) << "," << detail::format_double(agg.mean_rps) << ","
         << detail::format_double(agg.mean_jsd) << "," << detail::format_double(agg.mean_uf) << ","
         << detail::format_double(agg.mean_ccdcov) << "," << detail::format_double(agg.mean_jdcov)
         << "," << agg.n_seeds << "," << agg.n_diverged << "\n";
      s_lambda.x.push_back(agg.lambda);
      s_lambda.y.push_back(agg.mean_jsd);
      s_rps.x.push_back(agg.mean_rps);
      s_rps.y.push_back(agg.mean_jsd);
    }
    pd.close();
    manifest.add_output(plot_csv);
    jsd_vs_lambda.push_back(std::move(s_lambda));
    jsd_vs_rps.push_back(std::move(s_rps));

    if (result.elbow_lambda)
      scales[to_string(kind)]["elbow_lambda"] = *result.elbow_lambda;
    scales[to_string(kind)]["n_diverged_total"] = [&result] {
      std::size_t c = 0;
      for (const auto& agg : result.aggregates) c += agg.n_diverged;
      return c;
    }();
  }
  csv.close();
  manifest.add_output((dir / "calibration.csv").string());

  write_svg_chart((dir / "jsd_vs_lambda.svg").string(), "Mean validation JSD against lambda",
                  "lambda", "mean JSD", jsd_vs_lambda);
  write_svg_chart((dir / "jsd_vs_rps.svg").string(), "Fairness-accuracy trade-off",
                  "mean RPS", "mean JSD", jsd_vs_rps);
  manifest.add_output((dir / "jsd_vs_lambda.svg").string());
  manifest.add_output((dir / "jsd_vs_rps.svg").string());
  manifest.set("baseline", {{"validation_loss", baseline_loss}});
  manifest.set("scales", scales);
  manifest.save(dir);
}

// ---------------------------------------------------------------------------
// train / evaluate / report
// ---------------------------------------------------------------------------

inline void cmd_train(const RunConfig& cfg, const std::string& bundle_dir,
                      const std::string& out_dir) {
  const auto bundle = std::filesystem::path(bundle_dir);
  const auto dir = detail::ensure_dir(out_dir);
  RunManifest manifest("train", cfg);

  // Final-stage transforms are fitted on the full training side; gradient
  // steps run on the subtraining rows with early stopping on validation.
  const PreparedData sub = detail::load_prepared(bundle, "subtrain.csv", "transforms_train.json",
                                                 cfg.schema, manifest);
  const PreparedData val = detail::load_prepared(bundle, "valid.csv", "transforms_train.json",
                                                 cfg.schema, manifest);

  TrainingConfig config = make_training_config(cfg.hyper, sub.data.X.cols(), cfg.schema.task,
                                               cfg.stopping, cfg.seed);
  config.optimiser.hutchinson_probes = cfg.hutchinson_probes;
  config.objective.regulariser =
      cfg.train_lambda > 0.0 ? cfg.train_regulariser : RegulariserKind::none;
  config.objective.lambda = cfg.train_lambda;

  const TrainResult result = train(sub.data, val.data, config);
  const std::string model_path = (dir / "model.json").string();
  save_checkpoint(model_path,
                  Checkpoint{result.model, cfg.seed,
                             "transforms_train.json:" +
                                 file_checksum((bundle / "transforms_train.json").string())});
  manifest.add_output(model_path);

  std::ofstream hist((dir / "history.csv").string());
  hist << "epoch,train_objective,validation_objective\n";
  for (const auto& rec : result.history)
    hist << rec.epoch << "," << detail::format_double(rec.train_objective) << ","
         << detail::format_double(rec.validation_objective) << "\n";
  hist.close();
  manifest.add_output((dir / "history.csv").string());

  manifest.set("diverged", result.diverged);
  manifest.set("best_epoch", result.best_epoch);
  manifest.set("lambda", cfg.train_lambda);
  manifest.set("regulariser", to_string(config.objective.regulariser));
  manifest.save(dir);
  if (result.diverged)
    throw DivergenceDetected("train: run diverged; last good checkpoint written");
}

inline FairnessReport cmd_evaluate(const RunConfig& cfg, const std::string& bundle_dir,
                                   const std::string& model_path, const std::string& out_dir,
                                   const std::string& baseline_model_path = "") {
  const auto bundle = std::filesystem::path(bundle_dir);
  const auto dir = detail::ensure_dir(out_dir);

  // Single-evaluation guard: one look at the test split per run directory.
  if (const auto existing = RunManifest::load(dir)) {
    if (existing->value("command", "") == "evaluate" && existing->value("test_read", false))
      throw ConfigError("evaluate: this run directory already evaluated the test split");
  }

  RunManifest manifest("evaluate", cfg);
  manifest.add_input(model_path);
  const PreparedData test = detail::load_prepared(bundle, "test.csv", "transforms_train.json",
                                                  cfg.schema, manifest);
  manifest.set("test_read", true);

  const Checkpoint cp = load_checkpoint(model_path);
  EvalOptions options;
  options.permutation_replicates = cfg.permutation_replicates;
  options.seed = cfg.seed;
  options.binning = cfg.schema.binning;
  FairnessReport report =
      evaluate_model(cp.model, test.data, test.protected_specs, cfg.schema.task, options);

  if (!baseline_model_path.empty()) {
    manifest.add_input(baseline_model_path);
    const Checkpoint base = load_checkpoint(baseline_model_path);
    const FairnessReport base_report =
        evaluate_model(base.model, test.data, test.protected_specs, cfg.schema.task, options);
    report.wilcoxon_vs_baseline =
        wilcoxon_one_sided({base_report.per_observation_rps, report.per_observation_rps});
  }

  const std::string report_path = (dir / "report.json").string();
  {
    std::ofstream out(report_path);
    out << report_to_json(report).dump(2) << "\n";
  }
  manifest.add_output(report_path);

  // Subgroup table keeps every subgroup, including the small ones figures
  // will later omit.
  {
    std::ofstream out((dir / "subgroup_table.csv").string());
    out << "label,count,mean_prediction\n";
    for (const auto& s : report.subgroups)
      out << s.label << "," << s.count << "," << detail::format_double(s.mean_prediction) << "\n";
  }
  manifest.add_output((dir / "subgroup_table.csv").string());

  // Per-row data for the figures stage (this file, not the raw test split,
  // is what report reads).
  {
    std::ofstream out((dir / "predictions.csv").string());
    out << "prediction,response,rps,subgroup";
    for (const auto& p : test.protected_specs) out << "," << p.name;
    out << "\n";
    std::vector<std::vector<double>> attr_values(test.protected_specs.size());
    for (std::size_t a = 0; a < test.protected_specs.size(); ++a) {
      const auto& p = test.protected_specs[a];
      attr_values[a].resize(report.predictions.size());
      if (p.kind == ProtectedKind::categorical_onehot) {
        const auto labels = subgroup_keys({p});
        for (std::size_t i = 0; i < labels.size(); ++i)
          attr_values[a][i] = static_cast<double>(labels[i].labels[0]);
      } else {
        for (std::size_t i = 0; i < report.predictions.size(); ++i)
          attr_values[a][i] = p.block(i, 0);
      }
    }
    for (std::size_t i = 0; i < report.predictions.size(); ++i) {
      out << detail::format_double(report.predictions[i]) << ","
          << detail::format_double(test.data.y[i]) << ","
          << detail::format_double(report.per_observation_rps[i]) << ","
          << report.subgroup_index[i];
      for (const auto& column : attr_values) out << "," << detail::format_double(column[i]);
      out << "\n";
    }
  }
  manifest.add_output((dir / "predictions.csv").string());
  manifest.set("metrics", {{"mean_rps", report.mean_rps},
                           {"jsd", report.jsd},
                           {"uf", report.uf},
                           {"ccdcov", report.ccdcov},
                           {"jdcov", report.jdcov}});
  manifest.save(dir);
  return report;
}

inline void cmd_report(const RunConfig& cfg, const std::string& evaluation_dir,
                       const std::string& out_dir) {
  const auto eval_dir = std::filesystem::path(evaluation_dir);
  const auto dir = detail::ensure_dir(out_dir);
  RunManifest manifest("report", cfg);

  const std::string report_path = (eval_dir / "report.json").string();
  manifest.add_input(report_path);
  nlohmann::json report_json;
  {
    std::ifstream in(report_path);
    if (!in) throw ConfigError("report: missing " + report_path);
    in >> report_json;
  }
  const FairnessReport report = report_from_json(report_json);

  const std::string pred_path = (eval_dir / "predictions.csv").string();
  manifest.add_input(pred_path);
  const Table pred = read_csv(pred_path).table;
  const std::size_t pred_col = pred.col_index("prediction");
  const std::size_t group_col = pred.col_index("subgroup");

  std::vector<std::size_t> eligible;  // subgroups large enough to draw
  for (std::size_t g = 0; g < report.subgroups.size(); ++g)
    if (report.subgroups[g].count >= cfg.figure_min_subgroup) eligible.push_back(g);

  // Prediction histogram (CSV + SVG twin).
  {
    std::vector<double> predictions;
    for (const auto& row : pred.rows)
      predictions.push_back(detail::to_number(row[pred_col], "prediction"));
    double lo = predictions[0], hi = predictions[0];
    for (double v : predictions) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const Histogram h = make_histogram(predictions, cfg.schema.binning.prediction_bins, lo,
                                       hi == lo ? lo + 1.0 : hi);
    std::ofstream out((dir / "prediction_histogram.csv").string());
    out << "bin_lo,bin_hi,mass\n";
    Series series{"all", {}, {}, true};
    const double width = (h.hi - h.lo) / static_cast<double>(h.mass.size());
    for (std::size_t b = 0; b < h.mass.size(); ++b) {
      out << detail::format_double(h.lo + width * static_cast<double>(b)) << ","
          << detail::format_double(h.lo + width * static_cast<double>(b + 1)) << ","
          << detail::format_double(h.mass[b]) << "\n";
      series.x.push_back(h.lo + width * (static_cast<double>(b) + 0.5));
      series.y.push_back(h.mass[b]);
    }
    out.close();
    write_svg_chart((dir / "prediction_histogram.svg").string(), "Prediction histogram",
                    "prediction", "mass", {series});
    manifest.add_output((dir / "prediction_histogram.csv").string());
    manifest.add_output((dir / "prediction_histogram.svg").string());
  }

  // Subgroup ECDFs: exact empirical step functions.
  {
    std::ofstream out((dir / "subgroup_ecdf.csv").string());
    out << "subgroup,value,fraction\n";
    std::vector<Series> series;
    for (std::size_t g : eligible) {
      std::vector<double> values;
      for (const auto& row : pred.rows)
        if (static_cast<std::size_t>(detail::to_number(row[group_col], "subgroup")) == g)
          values.push_back(detail::to_number(row[pred_col], "prediction"));
      if (values.empty()) continue;
      Series s{report.subgroups[g].label, {}, {}, true};
      for (const auto& p : ecdf(values)) {
        out << report.subgroups[g].label << "," << detail::format_double(p.value) << ","
            << detail::format_double(p.fraction) << "\n";
        s.x.push_back(p.value);
        s.y.push_back(p.fraction);
      }
      series.push_back(std::move(s));
    }
    out.close();
    write_svg_chart((dir / "subgroup_ecdf.svg").string(), "Subgroup prediction ECDFs",
                    "prediction", "fraction", series);
    manifest.add_output((dir / "subgroup_ecdf.csv").string());
    manifest.add_output((dir / "subgroup_ecdf.svg").string());
  }

  // Mean prediction against each continuous protected attribute, one lowess
  // curve per qualifying subgroup of the remaining attributes.
  std::size_t continuous_idx = 0;
  {
    std::size_t attr_index = 0;
    for (const auto& spec : cfg.schema.columns) {
      if (spec.role != ColumnRole::protected_attr) continue;
      const std::size_t col = 4 + attr_index;
      ++attr_index;
      if (spec.protected_kind != ProtectedKind::continuous) continue;
      ++continuous_idx;

      // Group rows by the other attributes' labels within the subgroup key.
      std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> curves;
      for (const auto& row : pred.rows) {
        const std::size_t g =
            static_cast<std::size_t>(detail::to_number(row[group_col], "subgroup"));
        if (report.subgroups[g].count < cfg.figure_min_subgroup) continue;
        std::string label;
        for (std::size_t k = 0; k < report.subgroups[g].key.labels.size(); ++k) {
          if (k == attr_index - 1) continue;  // drop the continuous attribute's own bin
          if (!label.empty()) label += "|";
          label += std::to_string(report.subgroups[g].key.labels[k]);
        }
        auto& [xs, ys] = curves[label];
        xs.push_back(detail::to_number(row[col], spec.name.c_str()));
        ys.push_back(detail::to_number(row[pred_col], "prediction"));
      }
      const std::string base_name = "mean_vs_" + spec.name;
      std::ofstream out((dir / (base_name + ".csv")).string());
      out << "subgroup," << spec.name << ",fitted\n";
      std::vector<Series> series;
      for (auto& [label, xy] : curves) {
        if (xy.first.size() < 2) continue;
        Series s{label, {}, {}, false};
        for (const auto& p : lowess(xy.first, xy.second, 1.0)) {
          out << label << "," << detail::format_double(p.x) << ","
              << detail::format_double(p.fitted) << "\n";
          s.x.push_back(p.x);
          s.y.push_back(p.fitted);
        }
        series.push_back(std::move(s));
      }
      out.close();
      write_svg_chart((dir / (base_name + ".svg")).string(),
                      "Mean prediction by " + spec.name, spec.name, "prediction", series);
      manifest.add_output((dir / (base_name + ".csv")).string());
      manifest.add_output((dir / (base_name + ".svg")).string());
    }
  }
  manifest.set("continuous_curves", continuous_idx);
  manifest.save(dir);
}

}  // namespace fairdcov
