// Model evaluation on a prepared split: accuracy metrics (RPS, plus ACC or
// Poisson deviance by task), the full fairness battery (regulariser values,
// JS divergence, UF, chi-square and permutation tests), subgroup mean tables,
// and per-subgroup ECDF data. Reports serialise to JSON losslessly.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairdcov/dcov.hpp"
#include "fairdcov/fairness.hpp"
#include "fairdcov/network.hpp"
#include "fairdcov/objective.hpp"
#include "fairdcov/preprocess.hpp"
#include "fairdcov/scoring.hpp"

namespace fairdcov {

struct EvalOptions {
  std::size_t permutation_replicates = 199;
  std::uint64_t seed = 1;
  BinningSpec binning;
};

struct SubgroupStat {
  SubgroupKey key;
  std::string label;
  std::size_t count = 0;
  double mean_prediction = 0.0;
};

struct FairnessReport {
  Task task = Task::binary;
  std::size_t n = 0;

  double mean_rps = 0.0;
  double acc = 0.0;               // binary task
  double poisson_dev = 0.0;       // poisson task

  double ccdcov = 0.0;
  double jdcov = 0.0;
  double jsd = 0.0;
  double uf = 0.0;
  bool uf_degenerate = false;

  TestResult chi2;
  TestResult perm_joint;
  TestResult perm_mutual;

  std::vector<SubgroupStat> subgroups;
  std::vector<double> predictions;          // per-row head outputs
  std::vector<double> per_observation_rps;  // for paired comparisons
  std::vector<std::size_t> subgroup_index;  // row -> index into subgroups

  std::optional<TestResult> wilcoxon_vs_baseline;
};

namespace detail {

inline std::string subgroup_label(const std::vector<ProtectedAttributeSpec>& attrs,
                                  const SubgroupKey& key) {
  std::string label;
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    if (a) label += "|";
    label += attrs[a].name + "=" + std::to_string(key.labels[a]);
  }
  return label;
}

}  // namespace detail

inline FairnessReport evaluate_model(const Network& net, const Dataset& split,
                                     const std::vector<ProtectedAttributeSpec>& protected_specs,
                                     Task task, const EvalOptions& options = {}) {
  if (split.n() == 0) throw EmptyInput("evaluate_model: empty split");
  FairnessReport report;
  report.task = task;
  report.n = split.n();
  report.predictions = net.forward(split.X);
  const Matrix pred_block = Matrix::column(report.predictions);

  // Accuracy metrics.
  report.per_observation_rps.resize(split.n());
  if (task == Task::binary) {
    for (std::size_t i = 0; i < split.n(); ++i)
      report.per_observation_rps[i] =
          rps(DiscreteForecast{{1.0 - report.predictions[i], report.predictions[i]}},
              static_cast<std::size_t>(split.y[i]));
    std::vector<int> labels(split.y.begin(), split.y.end());
    report.acc = accuracy(report.predictions, labels);
  } else {
    std::size_t cap = 0;
    for (double y : split.y) cap = std::max(cap, static_cast<std::size_t>(y));
    cap += 30;
    std::vector<double> mu(split.n());
    for (std::size_t i = 0; i < split.n(); ++i) {
      report.per_observation_rps[i] =
          rps_poisson(report.predictions[i], split.exposure[i],
                      static_cast<unsigned>(split.y[i]), cap);
      mu[i] = split.exposure[i] * report.predictions[i];
    }
    report.poisson_dev = poisson_deviance(split.y, mu);
  }
  report.mean_rps = stats::mean(report.per_observation_rps);

  // Regulariser values.
  report.ccdcov = ccdcov(pred_block, split.attrs);
  std::vector<Matrix> joint_blocks;
  joint_blocks.push_back(pred_block);
  for (const auto& a : split.attrs) joint_blocks.push_back(a);
  report.jdcov = jdcov2(joint_blocks);

  // Subgroup metrics.
  const auto keys = subgroup_keys(protected_specs);
  report.jsd = js_divergence(report.predictions, keys, options.binning);
  try {
    report.uf = uf_metric(report.predictions, keys);
  } catch (const DegenerateVariance&) {
    report.uf = 0.0;
    report.uf_degenerate = true;
  }

  std::map<SubgroupKey, std::size_t> group_of;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto [it, inserted] = group_of.try_emplace(keys[i], report.subgroups.size());
    if (inserted) {
      SubgroupStat stat;
      stat.key = keys[i];
      stat.label = detail::subgroup_label(protected_specs, keys[i]);
      report.subgroups.push_back(std::move(stat));
    }
  }
  report.subgroup_index.resize(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::size_t g = group_of.at(keys[i]);
    report.subgroup_index[i] = g;
    report.subgroups[g].count += 1;
    report.subgroups[g].mean_prediction += report.predictions[i];
  }
  for (auto& s : report.subgroups)
    if (s.count > 0) s.mean_prediction /= static_cast<double>(s.count);

  // Independence tests.
  report.chi2 = chi2_independence_test(pred_block, concat_columns(split.attrs));
  report.perm_joint = permutation_test_joint(pred_block, split.attrs,
                                             options.permutation_replicates, options.seed);
  report.perm_mutual = permutation_test_mutual(pred_block, split.attrs,
                                               options.permutation_replicates, options.seed);
  return report;
}

// ---------------------------------------------------------------------------
// Serialisation (lossless round trip)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json test_to_json(const TestResult& t) {
  return {{"statistic", t.statistic}, {"p_value", t.p_value},
          {"method", static_cast<int>(t.method)}, {"replicates", t.replicates},
          {"degenerate", t.degenerate}, {"all_zero", t.all_zero}};
}

inline TestResult test_from_json(const nlohmann::json& j) {
  TestResult t;
  t.statistic = j.at("statistic").get<double>();
  t.p_value = j.at("p_value").get<double>();
  t.method = static_cast<TestResult::Method>(j.at("method").get<int>());
  t.replicates = j.at("replicates").get<std::size_t>();
  t.degenerate = j.at("degenerate").get<bool>();
  t.all_zero = j.at("all_zero").get<bool>();
  return t;
}

}  // namespace detail

inline nlohmann::json report_to_json(const FairnessReport& r) {
  nlohmann::json j;
  j["task"] = to_string(r.task);
  j["n"] = r.n;
  j["mean_rps"] = r.mean_rps;
  j["acc"] = r.acc;
  j["poisson_deviance"] = r.poisson_dev;
  j["ccdcov"] = r.ccdcov;
  j["jdcov"] = r.jdcov;
  j["jsd"] = r.jsd;
  j["uf"] = r.uf;
  j["uf_degenerate"] = r.uf_degenerate;
  j["chi2"] = detail::test_to_json(r.chi2);
  j["perm_joint"] = detail::test_to_json(r.perm_joint);
  j["perm_mutual"] = detail::test_to_json(r.perm_mutual);
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& s : r.subgroups)
    groups.push_back({{"labels", s.key.labels}, {"label", s.label}, {"count", s.count},
                      {"mean_prediction", s.mean_prediction}});
  j["subgroups"] = std::move(groups);
  j["predictions"] = r.predictions;
  j["per_observation_rps"] = r.per_observation_rps;
  j["subgroup_index"] = r.subgroup_index;
  if (r.wilcoxon_vs_baseline) j["wilcoxon_vs_baseline"] = detail::test_to_json(*r.wilcoxon_vs_baseline);
  return j;
}

inline FairnessReport report_from_json(const nlohmann::json& j) {
  FairnessReport r;
  r.task = j.at("task").get<std::string>() == "binary" ? Task::binary : Task::poisson;
  r.n = j.at("n").get<std::size_t>();
  r.mean_rps = j.at("mean_rps").get<double>();
  r.acc = j.at("acc").get<double>();
  r.poisson_dev = j.at("poisson_deviance").get<double>();
  r.ccdcov = j.at("ccdcov").get<double>();
  r.jdcov = j.at("jdcov").get<double>();
  r.jsd = j.at("jsd").get<double>();
  r.uf = j.at("uf").get<double>();
  r.uf_degenerate = j.at("uf_degenerate").get<bool>();
  r.chi2 = detail::test_from_json(j.at("chi2"));
  r.perm_joint = detail::test_from_json(j.at("perm_joint"));
  r.perm_mutual = detail::test_from_json(j.at("perm_mutual"));
  for (const auto& g : j.at("subgroups")) {
    SubgroupStat s;
    s.key.labels = g.at("labels").get<std::vector<std::int32_t>>();
    s.label = g.at("label").get<std::string>();
    s.count = g.at("count").get<std::size_t>();
    s.mean_prediction = g.at("mean_prediction").get<double>();
    r.subgroups.push_back(std::move(s));
  }
  r.predictions = j.at("predictions").get<std::vector<double>>();
  r.per_observation_rps = j.at("per_observation_rps").get<std::vector<double>>();
  r.subgroup_index = j.at("subgroup_index").get<std::vector<std::size_t>>();
  if (j.contains("wilcoxon_vs_baseline"))
    r.wilcoxon_vs_baseline = detail::test_from_json(j.at("wilcoxon_vs_baseline"));
  return r;
}

}  // namespace fairdcov
