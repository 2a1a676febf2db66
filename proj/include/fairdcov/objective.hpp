// Composite objectives: mean task loss (cross-entropy or exposure-offset
// Poisson) plus lambda times a distance-covariance regulariser evaluated on
// the same batch. Gradients are exact reverse-mode wherever differentiable,
// with the zero subgradient chosen at absolute-value and rectifier kinks.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fairdcov/core.hpp"
#include "fairdcov/dcov.hpp"
#include "fairdcov/network.hpp"

namespace fairdcov {

enum class Task { binary, poisson };

inline const char* to_string(Task t) { return t == Task::binary ? "binary" : "poisson"; }

struct ObjectiveSpec {
  Task task = Task::binary;
  RegulariserKind regulariser = RegulariserKind::none;
  double lambda = 0.0;
  std::vector<double> weights;  // separate_sum only; defaults to all-ones

  void validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0)
      throw ConfigError("objective: lambda must be finite and >= 0");
    for (double w : weights)
      if (!(w >= 0.0)) throw InvalidWeight("objective: separate_sum weights must be >= 0");
  }
};

// One variable's worth of supervised data plus the protected blocks the
// regulariser sees.
struct Dataset {
  Matrix X;
  std::vector<double> y;
  std::vector<double> exposure;  // required by the poisson task
  std::vector<Matrix> attrs;

  std::size_t n() const { return X.rows(); }

  Dataset select(std::span<const std::size_t> idx) const {
    Dataset out;
    out.X = X.select_rows(idx);
    out.y.reserve(idx.size());
    for (std::size_t i : idx) out.y.push_back(y[i]);
    if (!exposure.empty()) {
      out.exposure.reserve(idx.size());
      for (std::size_t i : idx) out.exposure.push_back(exposure[i]);
    }
    for (const auto& a : attrs) out.attrs.push_back(a.select_rows(idx));
    return out;
  }
};

namespace detail {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline void check_objective_inputs(const Network& net, const Dataset& data,
                                   const ObjectiveSpec& spec) {
  spec.validate();
  if (data.y.size() != data.n()) throw ShapeMismatch("objective: response length mismatch");
  if (spec.task == Task::poisson && data.exposure.size() != data.n())
    throw ShapeMismatch("objective: poisson task requires exposure per row");
  if (spec.task == Task::binary && net.spec().head != OutputHead::sigmoid)
    throw ConfigError("objective: binary task requires the sigmoid head");
  if (spec.task == Task::poisson && net.spec().head != OutputHead::exponential)
    throw ConfigError("objective: poisson task requires the exponential head");
  if (spec.lambda > 0.0 && spec.regulariser != RegulariserKind::none) {
    if (data.n() < 4) throw BatchTooSmall("objective: regulariser needs batch n >= 4");
    if (data.attrs.empty()) throw ArityError("objective: regulariser needs protected blocks");
  }
}

// Mean task loss computed from output pre-activations for numerical
// stability.
inline double task_loss_mean(Task task, std::span<const double> out_pre,
                             std::span<const double> y, std::span<const double> exposure) {
  const std::size_t n = out_pre.size();
  std::vector<double> losses(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (task == Task::binary) {
      losses[i] = softplus(out_pre[i]) - y[i] * out_pre[i];
    } else {
      losses[i] = exposure[i] * std::exp(out_pre[i]) - y[i] * out_pre[i];
    }
  }
  return pairwise_sum(losses) / static_cast<double>(n);
}

}  // namespace detail

// Mean task loss + lambda * psi, evaluated without dropout.
inline double objective_value(const Network& net, const Dataset& data, const ObjectiveSpec& spec) {
  detail::check_objective_inputs(net, data, spec);
  const auto cache = net.forward_cached(data.X);
  const double task = detail::task_loss_mean(spec.task, cache.out_pre, data.y, data.exposure);
  if (spec.lambda == 0.0 || spec.regulariser == RegulariserKind::none) return task;
  const double psi =
      regulariser_value(spec.regulariser, Matrix::column(cache.out), data.attrs, spec.weights);
  return task + spec.lambda * psi;
}

struct ObjectiveGradient {
  double value = 0.0;
  std::vector<double> grad;
};

// Value and parameter gradient in one pass. When `dropout_seed` is supplied
// the forward pass draws inverted-dropout masks from that seed, so repeated
// calls with the same seed see the same stochastic objective (this is what
// makes finite-difference Hessian-vector products well defined).
inline ObjectiveGradient objective_gradient(const Network& net, const Dataset& data,
                                            const ObjectiveSpec& spec,
                                            const std::uint64_t* dropout_seed = nullptr) {
  detail::check_objective_inputs(net, data, spec);
  const std::size_t n = data.n();
  Rng dropout_rng(dropout_seed ? *dropout_seed : 0);
  const auto cache = net.forward_cached(data.X, dropout_seed ? &dropout_rng : nullptr);

  ObjectiveGradient out;
  out.value = detail::task_loss_mean(spec.task, cache.out_pre, data.y, data.exposure);

  std::vector<double> dout(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.task == Task::binary) {
      dout[i] = inv_n * (cache.out[i] - data.y[i]);
    } else {
      dout[i] = inv_n * (data.exposure[i] * cache.out[i] - data.y[i]);
    }
  }

  if (spec.lambda > 0.0 && spec.regulariser != RegulariserKind::none) {
    std::vector<double> weights = spec.weights;
    if (spec.regulariser == RegulariserKind::separate_sum && weights.empty())
      weights.assign(data.attrs.size(), 1.0);
    const auto rg = regulariser_with_gradient(spec.regulariser, cache.out, data.attrs, weights);
    out.value += spec.lambda * rg.value;
    for (std::size_t i = 0; i < n; ++i)
      dout[i] += spec.lambda * rg.dpred[i] * net.head_derivative(cache.out[i]);
  }

  out.grad = net.backward(data.X, cache, dout);
  return out;
}

}  // namespace fairdcov
