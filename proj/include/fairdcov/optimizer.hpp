// Second-order optimisation pieces: a Rademacher-probe Hutchinson estimate of
// the Hessian diagonal through forward-difference Hessian-vector products,
// per-tensor spatial averaging, and the AdaHessian update with bias-corrected
// moments and a tunable Hessian power.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fairdcov/core.hpp"

namespace fairdcov {

// Rademacher-probe estimate of diag(H) for a gradient oracle g(theta). The
// Hessian-vector product is approximated by (g(theta + h z) - g(theta)) / h
// with h = 1e-6 * (1 + |theta|); this is a documented approximation whose
// error is bounded by the quadratic-oracle acceptance test.
template <typename GradFn>
std::vector<double> hutchinson_diag(GradFn&& grad_fn, std::span<const double> theta, int probes,
                                    std::uint64_t seed) {
  if (probes < 1) throw ConfigError("hutchinson_diag: needs probes >= 1");
  const std::size_t m = theta.size();
  double norm_sq = 0.0;
  for (double t : theta) norm_sq += t * t;
  const double h = 1e-6 * (1.0 + std::sqrt(norm_sq));

  const std::vector<double> g0 = grad_fn(theta);
  std::vector<double> estimate(m, 0.0);
  std::vector<double> shifted(theta.begin(), theta.end());
  std::vector<double> z(m);
  Rng rng(seed);
  for (int p = 0; p < probes; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = rng.rademacher();
      shifted[i] = theta[i] + h * z[i];
    }
    const std::vector<double> g1 = grad_fn(shifted);
    for (std::size_t i = 0; i < m; ++i) estimate[i] += z[i] * (g1[i] - g0[i]) / h;
  }
  for (double& e : estimate) e /= static_cast<double>(probes);
  return estimate;
}

// Mean within each (offset, size) block, broadcast back.
inline std::vector<double> spatial_average(std::span<const double> diag,
                                           std::span<const std::pair<std::size_t, std::size_t>> blocks) {
  std::vector<double> out(diag.begin(), diag.end());
  for (const auto& [offset, size] : blocks) {
    if (size == 0) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < size; ++i) sum += diag[offset + i];
    const double mean = sum / static_cast<double>(size);
    for (std::size_t i = 0; i < size; ++i) out[offset + i] = mean;
  }
  return out;
}

struct AdaHessianState {
  double learning_rate = 0.01;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double hessian_power = 1.0;  // k in (0, 1]
  double epsilon = 1e-8;

  std::size_t step_count = 0;
  std::vector<double> m;  // first-moment EMA, uncorrected
  std::vector<double> v;  // EMA of squared spatially-averaged diagonal, uncorrected
};

// One update: exponential averages with bias correction, denominator
// |v_t|^k + epsilon. Throws on non-finite gradient entries before touching
// the state.
inline void adahessian_step(AdaHessianState& state, std::span<double> theta,
                            std::span<const double> grad, std::span<const double> diag) {
  const std::size_t m = theta.size();
  if (grad.size() != m || diag.size() != m)
    throw ShapeMismatch("adahessian_step: dimension mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw DivergenceDetected("adahessian_step: non-finite gradient");
  if (state.m.empty()) {
    state.m.assign(m, 0.0);
    state.v.assign(m, 0.0);
  }
  if (state.m.size() != m) throw ShapeMismatch("adahessian_step: state dimension mismatch");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < m; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * diag[i] * diag[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = std::sqrt(state.v[i] / bc2);
    theta[i] -= state.learning_rate * m_hat / (std::pow(v_hat, state.hessian_power) + state.epsilon);
  }
}

}  // namespace fairdcov
