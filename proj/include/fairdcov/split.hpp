// Stratified splitting and subgroup oversampling. Holdout allocation uses the
// largest-remainder method per stratum, so per-stratum drift is below one
// sample and the overall fractions land exactly when they divide evenly.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairdcov/core.hpp"
#include "fairdcov/fairness.hpp"
#include "fairdcov/preprocess.hpp"

namespace fairdcov {

struct SplitPlan {
  double test_fraction = 0.2;
  double validation_fraction = 0.3;  // of the training side
  std::uint64_t seed = 1;
};

// Stratum labels from the raw table: the observed response (counts capped at
// 2 for the poisson task) crossed with every protected attribute's raw
// category (tertile bin for continuous attributes, fitted on this table).
inline std::vector<std::string> strata_labels(const Table& t, const DatasetSchema& schema) {
  const std::size_t n = t.rows.size();
  std::vector<std::string> labels(n);
  const auto& resp = schema.response();
  const std::size_t resp_col = t.col_index(resp.name);
  for (std::size_t i = 0; i < n; ++i) {
    double y = detail::to_number(t.rows[i][resp_col], resp.name.c_str());
    if (schema.task == Task::poisson) y = std::min(y, 2.0);
    labels[i] = "y=" + std::to_string(static_cast<long long>(y));
  }
  for (const auto& spec : schema.columns) {
    if (spec.role != ColumnRole::protected_attr) continue;
    const std::size_t col = t.col_index(spec.name);
    if (spec.protected_kind == ProtectedKind::continuous) {
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i)
        values[i] = detail::to_number(t.rows[i][col], spec.name.c_str());
      const auto bins = bin_continuous(values, schema.binning.quantiles);
      for (std::size_t i = 0; i < n; ++i)
        labels[i] += "|" + spec.name + "=" + std::to_string(bins[i]);
    } else {
      for (std::size_t i = 0; i < n; ++i) labels[i] += "|" + spec.name + "=" + t.rows[i][col];
    }
  }
  return labels;
}

struct TwoWaySplit {
  std::vector<std::size_t> main;
  std::vector<std::size_t> holdout;
};

// Largest-remainder stratified holdout. Singleton strata always land on the
// main side. Deterministic for a fixed seed.
inline TwoWaySplit stratified_holdout(std::span<const std::string> strata,
                                      double holdout_fraction, std::uint64_t seed) {
  if (strata.empty()) throw EmptyInput("stratified_holdout: empty input");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ConfigError("stratified_holdout: fraction must be in (0,1)");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  Rng rng(seed);
  struct Pending {
    std::vector<std::size_t>* members;
    std::size_t take = 0;
    double remainder = 0.0;
  };
  std::vector<Pending> pending;
  double total_target = 0.0;
  std::size_t taken = 0;
  for (auto& [label, members] : groups) {
    rng.shuffle(members);
    Pending p{&members};
    if (members.size() >= 2) {  // singleton strata stay on the main side
      const double target = holdout_fraction * static_cast<double>(members.size());
      p.take = std::min(static_cast<std::size_t>(std::floor(target)), members.size() - 1);
      p.remainder = target - std::floor(target);
      total_target += target;
      taken += p.take;
    }
    pending.push_back(p);
  }

  // Hand the leftover units to the largest remainders (stable order), keeping
  // at least one sample per stratum on the main side.
  const std::size_t want = static_cast<std::size_t>(std::llround(total_target));
  std::vector<std::size_t> order(pending.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pending[a].remainder > pending[b].remainder;
  });
  for (std::size_t k = 0; k < order.size() && taken < want; ++k) {
    Pending& p = pending[order[k]];
    if (p.members->size() >= 2 && p.take + 1 <= p.members->size() - 1) {
      p.take += 1;
      ++taken;
    }
  }

  TwoWaySplit out;
  for (const auto& p : pending) {
    for (std::size_t i = 0; i < p.members->size(); ++i) {
      if (i < p.take)
        out.holdout.push_back((*p.members)[i]);
      else
        out.main.push_back((*p.members)[i]);
    }
  }
  std::sort(out.main.begin(), out.main.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  return out;
}

// Stratified k-fold assignment: round-robin within each shuffled stratum.
inline std::vector<int> stratified_kfold(std::span<const std::string> strata, int k,
                                         std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: needs k >= 2");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
  std::vector<int> fold(strata.size(), 0);
  Rng rng(seed);
  int offset = 0;
  for (auto& [label, members] : groups) {
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i)
      fold[members[i]] = static_cast<int>((i + offset) % static_cast<std::size_t>(k));
    offset = (offset + static_cast<int>(members.size())) % k;
  }
  return fold;
}

// Duplicates rows of under-populated joint subgroups (sampling with
// replacement) until each non-empty subgroup holds at least `min_count`
// rows. Only existing observations are replicated.
inline std::vector<std::size_t> oversample_subgroups(std::span<const SubgroupKey> keys,
                                                     std::size_t min_count,
                                                     std::uint64_t seed) {
  std::map<SubgroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i]].push_back(i);
  std::vector<std::size_t> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = i;
  Rng rng(seed);
  for (const auto& [key, members] : groups) {
    if (members.empty() || members.size() >= min_count) continue;
    for (std::size_t need = min_count - members.size(); need > 0; --need)
      out.push_back(members[rng.below(members.size())]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fairdcov
