// Hyperparameter search (stratified 5-fold cross-validation over a pluggable
// candidate stream, random sampling by default), the loss-to-regulariser
// scale heuristic for anchoring the lambda grid, and the lambda calibration
// sweep that produces the fairness/accuracy trade-off records.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fairdcov/evaluate.hpp"
#include "fairdcov/split.hpp"
#include "fairdcov/train.hpp"

namespace fairdcov {

struct HyperParams {
  double learning_rate = 0.01;
  std::size_t batch_size = 256;
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 32;
  double dropout = 0.05;
  double hessian_power = 1.0;
};

struct SearchSpace {
  double learning_rate_min = 1e-4;
  double learning_rate_max = 3e-2;
  std::vector<std::size_t> batch_sizes{64, 128, 256};
  std::size_t layers_min = 1;
  std::size_t layers_max = 3;
  std::vector<std::size_t> widths{8, 16, 32, 64};
  double dropout_min = 0.0;
  double dropout_max = 0.3;
  std::vector<double> hessian_powers{0.5, 0.75, 1.0};
};

// Candidate stream: index within the budget plus a dedicated stream. The
// default draws uniformly (log-uniform for the learning rate); a surrogate
// strategy can be plugged in through the same signature.
using CandidateSource = std::function<HyperParams(std::size_t index, Rng& rng)>;

inline CandidateSource random_candidate_source(const SearchSpace& space) {
  return [space](std::size_t, Rng& rng) {
    HyperParams h;
    h.learning_rate = std::exp(rng.uniform(std::log(space.learning_rate_min),
                                           std::log(space.learning_rate_max)));
    h.batch_size = space.batch_sizes[rng.below(space.batch_sizes.size())];
    h.hidden_layers = space.layers_min + rng.below(space.layers_max - space.layers_min + 1);
    h.hidden_width = space.widths[rng.below(space.widths.size())];
    h.dropout = rng.uniform(space.dropout_min, space.dropout_max);
    h.hessian_power = space.hessian_powers[rng.below(space.hessian_powers.size())];
    return h;
  };
}

struct TuneTrial {
  HyperParams params;
  double mean_validation_loss = 0.0;
};

struct TuneResult {
  HyperParams best;
  double best_loss = 0.0;
  std::vector<TuneTrial> trajectory;
};

inline TrainingConfig make_training_config(const HyperParams& h, std::size_t input_dim, Task task,
                                           const EarlyStoppingPolicy& stopping,
                                           std::uint64_t seed) {
  TrainingConfig config;
  config.network.input_dim = input_dim;
  config.network.hidden_layers = h.hidden_layers;
  config.network.hidden_width = h.hidden_width;
  config.network.head = task == Task::binary ? OutputHead::sigmoid : OutputHead::exponential;
  config.network.dropout = h.dropout;
  config.objective.task = task;
  config.optimiser.learning_rate = h.learning_rate;
  config.optimiser.hessian_power = h.hessian_power;
  config.batch_size = h.batch_size;
  config.stopping = stopping;
  config.seed = seed;
  return config;
}

// Baseline (lambda = 0) hyperparameter tuning: each candidate is scored by
// the mean validation loss of 5-fold stratified cross-validation with early
// stopping inside each fold.
inline TuneResult tune_hyperparams(const Dataset& train_split, std::span<const std::string> strata,
                                   Task task, std::size_t budget, std::uint64_t seed,
                                   const EarlyStoppingPolicy& fold_stopping,
                                   CandidateSource source) {
  if (budget < 1) throw ConfigError("tune_hyperparams: budget must be >= 1");
  if (strata.size() != train_split.n())
    throw ShapeMismatch("tune_hyperparams: strata length mismatch");
  constexpr int kFolds = 5;

  Rng master(seed);
  Rng candidate_stream = master.derive(1);
  const auto folds = stratified_kfold(strata, kFolds, master.derive(2).next_u64());

  TuneResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < budget; ++i) {
    const HyperParams h = source(i, candidate_stream);
    double total = 0.0;
    int scored = 0;
    for (int k = 0; k < kFolds; ++k) {
      std::vector<std::size_t> fit_idx, val_idx;
      for (std::size_t r = 0; r < train_split.n(); ++r)
        (folds[r] == k ? val_idx : fit_idx).push_back(r);
      if (fit_idx.empty() || val_idx.empty()) continue;
      const Dataset fit = train_split.select(fit_idx);
      const Dataset val = train_split.select(val_idx);
      TrainingConfig config = make_training_config(h, train_split.X.cols(), task, fold_stopping,
                                                   splitmix64(seed ^ (i * 131 + k)));
      const TrainResult fold_result = train(fit, val, config);
      if (fold_result.diverged) {
        total = std::numeric_limits<double>::infinity();
        scored = kFolds;
        break;
      }
      total += fold_result.best_validation;
      ++scored;
    }
    const double mean_loss = scored ? total / scored : std::numeric_limits<double>::infinity();
    result.trajectory.push_back({h, mean_loss});
    if (mean_loss < result.best_loss) {
      result.best_loss = mean_loss;
      result.best = h;
    }
  }
  return result;
}

inline TuneResult tune_hyperparams(const Dataset& train_split, std::span<const std::string> strata,
                                   Task task, const SearchSpace& space, std::size_t budget,
                                   std::uint64_t seed, const EarlyStoppingPolicy& fold_stopping) {
  return tune_hyperparams(train_split, strata, task, budget, seed, fold_stopping,
                          random_candidate_source(space));
}

// Order-of-magnitude anchor for the lambda grid: baseline validation loss
// over the baseline regulariser value.
inline double suggest_lambda_scale(double baseline_val_loss, double baseline_psi) {
  if (!(baseline_psi > 1e-12))
    throw DegenerateRegulariser("suggest_lambda_scale: baseline psi is not positive");
  return baseline_val_loss / baseline_psi;
}

// ---------------------------------------------------------------------------
// Lambda calibration (validation sweep)
// ---------------------------------------------------------------------------

struct CalibrationRecord {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
  double rps = 0.0;
  double ccdcov = 0.0;
  double jdcov = 0.0;
  double jsd = 0.0;
  double uf = 0.0;
  bool uf_degenerate = false;
  double max_subgroup_gap = 0.0;  // widest spread of subgroup prediction means
};

struct CalibrationAggregate {
  double lambda = 0.0;
  std::size_t n_seeds = 0;
  std::size_t n_diverged = 0;
  double mean_rps = 0.0;
  double mean_ccdcov = 0.0;
  double mean_jdcov = 0.0;
  double mean_jsd = 0.0;
  double mean_uf = 0.0;
  double mean_max_subgroup_gap = 0.0;
};

struct CalibrationResult {
  RegulariserKind regulariser = RegulariserKind::ccdcov;
  std::vector<CalibrationRecord> records;      // one per (lambda, seed)
  std::vector<CalibrationAggregate> aggregates;  // one per lambda, ascending
  std::optional<double> elbow_lambda;          // advisory only
};

// Trains one model per (lambda, seed) on the subtraining split with early
// stopping, evaluates accuracy and fairness on the validation split, and
// aggregates means per lambda. Divergent runs are flagged and excluded from
// the means but stay visible in the records.
inline CalibrationResult calibrate_lambda(const Dataset& subtrain, const Dataset& valid,
                                          const std::vector<ProtectedAttributeSpec>& valid_protected,
                                          const TrainingConfig& base,
                                          std::span<const double> grid,
                                          std::span<const std::uint64_t> seeds,
                                          RegulariserKind regulariser,
                                          const BinningSpec& binning) {
  if (grid.empty() || seeds.empty()) throw ConfigError("calibrate_lambda: empty grid or seeds");
  bool has_zero = false;
  for (double l : grid) has_zero = has_zero || l == 0.0;
  if (!has_zero) throw ConfigError("calibrate_lambda: grid must include lambda = 0");

  std::vector<double> sorted_grid(grid.begin(), grid.end());
  std::sort(sorted_grid.begin(), sorted_grid.end());

  const auto valid_keys = subgroup_keys(valid_protected);
  CalibrationResult result;
  result.regulariser = regulariser;

  for (double lambda : sorted_grid) {
    CalibrationAggregate agg;
    agg.lambda = lambda;
    std::size_t used = 0;
    for (std::uint64_t seed : seeds) {
      TrainingConfig config = base;
      config.objective.regulariser = lambda > 0.0 ? regulariser : RegulariserKind::none;
      config.objective.lambda = lambda;
      config.seed = seed;

      CalibrationRecord rec;
      rec.lambda = lambda;
      rec.seed = seed;
      const TrainResult run = train(subtrain, valid, config);
      rec.diverged = run.diverged;
      if (!rec.diverged) {
        const auto pred = run.model.forward(valid.X);
        const Matrix pred_block = Matrix::column(pred);
        std::vector<double> obs_rps(valid.n());
        if (config.objective.task == Task::binary) {
          for (std::size_t i = 0; i < valid.n(); ++i)
            obs_rps[i] = rps(DiscreteForecast{{1.0 - pred[i], pred[i]}},
                             static_cast<std::size_t>(valid.y[i]));
        } else {
          std::size_t cap = 0;
          for (double y : valid.y) cap = std::max(cap, static_cast<std::size_t>(y));
          cap += 30;
          for (std::size_t i = 0; i < valid.n(); ++i)
            obs_rps[i] = rps_poisson(pred[i], valid.exposure[i],
                                     static_cast<unsigned>(valid.y[i]), cap);
        }
        rec.rps = stats::mean(obs_rps);
        rec.ccdcov = ccdcov(pred_block, valid.attrs);
        std::vector<Matrix> blocks;
        blocks.push_back(pred_block);
        for (const auto& a : valid.attrs) blocks.push_back(a);
        rec.jdcov = jdcov2(blocks);
        rec.jsd = js_divergence(pred, valid_keys, binning);
        try {
          rec.uf = uf_metric(pred, valid_keys);
        } catch (const DegenerateVariance&) {
          rec.uf_degenerate = true;
        }
        {
          std::map<SubgroupKey, std::pair<double, std::size_t>> groups;
          for (std::size_t i = 0; i < pred.size(); ++i) {
            auto& g = groups[valid_keys[i]];
            g.first += pred[i];
            g.second += 1;
          }
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          for (const auto& [key, g] : groups) {
            const double m = g.first / static_cast<double>(g.second);
            lo = std::min(lo, m);
            hi = std::max(hi, m);
          }
          rec.max_subgroup_gap = hi - lo;
        }
        agg.mean_rps += rec.rps;
        agg.mean_ccdcov += rec.ccdcov;
        agg.mean_jdcov += rec.jdcov;
        agg.mean_jsd += rec.jsd;
        agg.mean_uf += rec.uf;
        agg.mean_max_subgroup_gap += rec.max_subgroup_gap;
        ++used;
      } else {
        ++agg.n_diverged;
      }
      result.records.push_back(rec);
    }
    agg.n_seeds = seeds.size();
    if (used > 0) {
      agg.mean_rps /= used;
      agg.mean_ccdcov /= used;
      agg.mean_jdcov /= used;
      agg.mean_jsd /= used;
      agg.mean_uf /= used;
      agg.mean_max_subgroup_gap /= used;
    }
    result.aggregates.push_back(agg);
  }

  // Advisory elbow: smallest lambda whose next grid step improves mean JSD by
  // less than 5% relative.
  for (std::size_t i = 0; i + 1 < result.aggregates.size(); ++i) {
    const double here = result.aggregates[i].mean_jsd;
    const double next = result.aggregates[i + 1].mean_jsd;
    if (here > 0.0 && (here - next) < 0.05 * here) {
      result.elbow_lambda = result.aggregates[i].lambda;
      break;
    }
  }
  return result;
}

}  // namespace fairdcov
