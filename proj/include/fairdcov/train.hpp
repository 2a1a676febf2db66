// Mini-batch training with AdaHessian, seeded shuffling and dropout, early
// stopping on the validation objective with best-weight restoration, and a
// divergence guard that hands back the last good checkpoint.
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fairdcov/core.hpp"
#include "fairdcov/network.hpp"
#include "fairdcov/objective.hpp"
#include "fairdcov/optimizer.hpp"

namespace fairdcov {

struct EarlyStoppingPolicy {
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
};

struct OptimiserConfig {
  double learning_rate = 0.01;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double hessian_power = 1.0;
  int hutchinson_probes = 1;
};

struct TrainingConfig {
  NetworkSpec network;
  ObjectiveSpec objective;
  OptimiserConfig optimiser;
  std::size_t batch_size = 256;
  EarlyStoppingPolicy stopping;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_objective = 0.0;       // mean of minibatch objectives
  double validation_objective = 0.0;  // full-split, eval mode
};

struct TrainResult {
  Network model;
  std::vector<EpochRecord> history;
  bool diverged = false;
  std::size_t best_epoch = 0;
  double best_validation = std::numeric_limits<double>::infinity();
};

// Deterministic for a fixed seed: shuffling, initialisation, dropout masks
// and Hutchinson probes all run on streams derived from config.seed.
inline TrainResult train(const Dataset& subtrain, const Dataset& validation,
                         const TrainingConfig& config) {
  config.objective.validate();
  if (subtrain.n() == 0 || validation.n() == 0) throw EmptyInput("train: empty split");
  const bool regularised =
      config.objective.lambda > 0.0 && config.objective.regulariser != RegulariserKind::none;
  if (regularised && subtrain.n() < 4) throw BatchTooSmall("train: regulariser needs n >= 4");

  TrainResult result;
  result.model = Network::initialised(config.network, config.seed);
  Network& net = result.model;

  const auto blocks = net.tensor_blocks();
  AdaHessianState opt_state;
  opt_state.learning_rate = config.optimiser.learning_rate;
  opt_state.beta1 = config.optimiser.beta1;
  opt_state.beta2 = config.optimiser.beta2;
  opt_state.hessian_power = config.optimiser.hessian_power;

  Rng master(config.seed);
  Rng shuffle_stream = master.derive(1);
  const std::uint64_t dropout_base = master.derive(2).next_u64();
  const std::uint64_t probe_base = master.derive(3).next_u64();

  std::vector<double> best_theta = net.theta();
  std::size_t epochs_since_best = 0;
  std::uint64_t step = 0;

  std::vector<std::size_t> order(subtrain.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.stopping.max_epochs; ++epoch) {
    shuffle_stream.shuffle(order);

    // Chunk into batches; a trailing fragment too small for the regulariser
    // is merged into the previous batch.
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    const std::size_t bs = std::max<std::size_t>(config.batch_size, 1);
    for (std::size_t start = 0; start < order.size(); start += bs)
      batches.emplace_back(start, std::min(start + bs, order.size()));
    if (regularised && batches.size() > 1 &&
        batches.back().second - batches.back().first < 4) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    double epoch_loss = 0.0;
    bool blew_up = false;
    for (const auto& [start, end] : batches) {
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Dataset batch = subtrain.select(idx);
      ++step;
      const std::uint64_t dropout_seed = splitmix64(dropout_base ^ step);
      const bool use_dropout = config.network.dropout > 0.0;

      ObjectiveGradient og;
      try {
        og = objective_gradient(net, batch, config.objective,
                                use_dropout ? &dropout_seed : nullptr);
      } catch (const DivergenceDetected&) {
        blew_up = true;
        break;
      }
      if (!std::isfinite(og.value)) {
        blew_up = true;
        break;
      }
      epoch_loss += og.value;

      const auto grad_fn = [&](std::span<const double> theta) {
        Network probe_net = net;
        probe_net.theta().assign(theta.begin(), theta.end());
        return objective_gradient(probe_net, batch, config.objective,
                                  use_dropout ? &dropout_seed : nullptr)
            .grad;
      };
      std::vector<double> diag;
      try {
        diag = hutchinson_diag(grad_fn, net.theta(), config.optimiser.hutchinson_probes,
                               splitmix64(probe_base ^ step));
        const auto averaged = spatial_average(diag, blocks);
        adahessian_step(opt_state, net.theta(), og.grad, averaged);
      } catch (const DivergenceDetected&) {
        blew_up = true;
        break;
      }
    }

    double val = std::numeric_limits<double>::infinity();
    if (!blew_up) {
      val = objective_value(net, validation, config.objective);
      if (!std::isfinite(val)) blew_up = true;
    }
    if (blew_up) {
      result.diverged = true;
      break;
    }

    result.history.push_back(
        {epoch, epoch_loss / static_cast<double>(batches.size()), val});

    if (val < result.best_validation) {
      result.best_validation = val;
      result.best_epoch = epoch;
      best_theta = net.theta();
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best > config.stopping.patience) break;
    }
  }

  // Restore-best contract: never hand back weights worse than the best seen.
  net.theta() = best_theta;
  if (result.history.empty() && !result.diverged)
    throw ConfigError("train: no epochs were run");
  return result;
}

}  // namespace fairdcov
