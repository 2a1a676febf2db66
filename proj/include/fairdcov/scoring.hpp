// Accuracy metrics: ranked probability score for ordered discrete forecasts
// (with a truncated-Poisson variant), classification accuracy, Poisson
// deviance, and the one-sided Wilcoxon signed-rank test for paired
// accuracy-degradation comparisons.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fairdcov/core.hpp"
#include "fairdcov/fairness.hpp"

namespace fairdcov {

// Probabilities over K >= 2 ordered categories summing to 1.
struct DiscreteForecast {
  std::vector<double> probs;

  void validate() const {
    if (probs.size() < 2) throw InvalidForecast("forecast needs K >= 2 categories");
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidForecast("forecast probability outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidForecast("forecast does not sum to 1");
  }
};

// Sum of squared differences between predicted and observed cumulative
// probabilities across the K categories.
inline double rps(const DiscreteForecast& forecast, std::size_t observed) {
  forecast.validate();
  if (observed >= forecast.probs.size())
    throw InvalidForecast("observed category outside forecast support");
  double cum_pred = 0.0;
  double score = 0.0;
  for (std::size_t k = 0; k < forecast.probs.size(); ++k) {
    cum_pred += forecast.probs[k];
    const double cum_obs = (k >= observed) ? 1.0 : 0.0;
    score += (cum_pred - cum_obs) * (cum_pred - cum_obs);
  }
  return score;
}

// RPS of a truncated-and-renormalised Poisson forecast with mean
// exposure * rate. The cap auto-extends until the discarded tail mass is
// below 1e-6.
inline double rps_poisson(double rate, double exposure, unsigned observed,
                          std::size_t k_cap) {
  if (!(rate >= 0.0)) throw InvalidRate("rps_poisson: rate must be >= 0");
  if (!(exposure > 0.0)) throw InvalidRate("rps_poisson: exposure must be > 0");
  if (observed > k_cap) throw CapTooSmall("rps_poisson: observed count beyond cap");
  const double mu = exposure * rate;

  std::vector<double> pmf;
  pmf.reserve(k_cap + 1);
  pmf.push_back(std::exp(-mu));
  double mass = pmf[0];
  for (std::size_t k = 1; k <= k_cap || 1.0 - mass >= 1e-6; ++k) {
    pmf.push_back(pmf.back() * mu / static_cast<double>(k));
    mass += pmf.back();
    if (k > k_cap + 4096) break;  // pathological means: cap the extension
  }
  DiscreteForecast f{std::move(pmf)};
  const double total = std::accumulate(f.probs.begin(), f.probs.end(), 0.0);
  for (double& p : f.probs) p /= total;
  return rps(f, observed);
}

// (TP+TN)/n with a probability exactly at the threshold classifying positive.
inline double accuracy(std::span<const double> probs, std::span<const int> labels,
                       double threshold = 0.5) {
  if (probs.size() != labels.size()) throw ShapeMismatch("accuracy: sizes differ");
  if (probs.empty()) throw EmptyInput("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int predicted = probs[i] >= threshold ? 1 : 0;
    if (predicted == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

// Mean of 2[y log(y/mu) - (y - mu)], with y log(y/mu) = 0 when y = 0.
inline double poisson_deviance(std::span<const double> counts, std::span<const double> mu) {
  if (counts.size() != mu.size()) throw ShapeMismatch("poisson_deviance: sizes differ");
  if (counts.empty()) throw EmptyInput("poisson_deviance: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(mu[i] > 0.0)) throw InvalidRate("poisson_deviance: mu must be > 0");
    const double y = counts[i];
    const double log_term = (y > 0.0) ? y * std::log(y / mu[i]) : 0.0;
    sum += 2.0 * (log_term - (y - mu[i]));
  }
  return sum / static_cast<double>(counts.size());
}

// Two equal-length sequences of per-observation scores (baseline,
// regularised).
struct PairedScores {
  std::vector<double> baseline;
  std::vector<double> regularised;
};

// One-sided Wilcoxon signed-rank test of whether the regularised scores are
// larger. Zero differences are dropped, ties get average ranks, and the
// normal approximation carries the -0.5 continuity correction.
inline TestResult wilcoxon_one_sided(const PairedScores& scores) {
  if (scores.baseline.size() != scores.regularised.size())
    throw ShapeMismatch("wilcoxon_one_sided: paired lengths differ");
  if (scores.baseline.empty()) throw EmptyInput("wilcoxon_one_sided: empty input");

  std::vector<double> diffs;
  diffs.reserve(scores.baseline.size());
  for (std::size_t i = 0; i < scores.baseline.size(); ++i) {
    const double d = scores.regularised[i] - scores.baseline[i];
    if (d != 0.0) diffs.push_back(d);
  }
  TestResult out;
  out.method = TestResult::Method::wilcoxon;
  if (diffs.empty()) {
    out.all_zero = true;
    out.p_value = 1.0;
    return out;
  }

  std::vector<std::size_t> idx(diffs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<double> rank(diffs.size(), 0.0);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && std::abs(diffs[idx[j + 1]]) == std::abs(diffs[idx[i]])) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }

  double w_plus = 0.0;
  for (std::size_t k = 0; k < diffs.size(); ++k)
    if (diffs[k] > 0.0) w_plus += rank[k];

  const double n = static_cast<double>(diffs.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double sd = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0);
  const double z = (w_plus - mean - 0.5) / sd;
  out.statistic = w_plus;
  out.p_value = std::clamp(stats::normal_upper_tail(z), 1e-300, 1.0);
  return out;
}

}  // namespace fairdcov
