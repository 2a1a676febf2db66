// Subgroup fairness quantification and independence tests: the unfairness
// ratio UF, histogram Jensen-Shannon divergence across intersectional
// subgroups, the distance-correlation chi-square test, and the two
// permutation tests (joint and mutual).
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairdcov/core.hpp"
#include "fairdcov/dcov.hpp"

namespace fairdcov {

// ---------------------------------------------------------------------------
// Subgroup keys and binning
// ---------------------------------------------------------------------------

// Per-attribute labels: category index, or bin index for continuous
// attributes. Deterministic function of the raw attribute row and the
// binning spec.
struct SubgroupKey {
  std::vector<std::int32_t> labels;
  auto operator<=>(const SubgroupKey&) const = default;
};

struct BinningSpec {
  std::vector<double> quantiles{1.0 / 3.0, 2.0 / 3.0};  // continuous-attribute cuts
  int prediction_bins = 20;                              // prediction histogram granularity
};

// Cut points fitted on the training split and frozen for reuse downstream.
struct FittedBins {
  std::vector<double> cuts;

  // Count of cut points <= value: a value exactly at a cut lands in the
  // upper bin.
  int label_of(double v) const {
    int label = 0;
    for (double c : cuts)
      if (c <= v) ++label;
    return label;
  }
};

inline FittedBins fit_quantile_bins(std::span<const double> training_values,
                                    std::span<const double> quantiles) {
  if (training_values.empty()) throw EmptyInput("fit_quantile_bins: empty input");
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0))
      throw ConfigError("fit_quantile_bins: quantiles must lie in (0,1)");
    if (i > 0 && !(quantiles[i] > quantiles[i - 1]))
      throw ConfigError("fit_quantile_bins: quantiles must be strictly increasing");
  }
  std::vector<double> sorted(training_values.begin(), training_values.end());
  std::sort(sorted.begin(), sorted.end());
  FittedBins out;
  if (sorted.front() == sorted.back()) return out;  // constant sample: no usable cuts
  for (double q : quantiles) {
    const double cut = stats::quantile_sorted(sorted, q);
    if (out.cuts.empty() || cut > out.cuts.back()) out.cuts.push_back(cut);
  }
  return out;
}

// Fit-and-apply convenience: cuts are fitted on `values` themselves.
inline std::vector<int> bin_continuous(std::span<const double> values,
                                       std::span<const double> quantiles) {
  const FittedBins bins = fit_quantile_bins(values, quantiles);
  std::vector<int> labels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) labels[i] = bins.label_of(values[i]);
  return labels;
}

// ---------------------------------------------------------------------------
// Protected attributes
// ---------------------------------------------------------------------------

enum class ProtectedKind { binary, categorical_onehot, continuous };

struct ProtectedAttributeSpec {
  std::string name;
  ProtectedKind kind = ProtectedKind::binary;
  Matrix block;     // n x p sample of this attribute (p > 1 only for one-hot)
  FittedBins bins;  // continuous attributes only
};

// Joint subgroup key per row: binary -> 0/1, one-hot -> argmax index,
// continuous -> frozen bin label.
inline std::vector<SubgroupKey> subgroup_keys(const std::vector<ProtectedAttributeSpec>& attrs) {
  if (attrs.empty()) throw EmptyInput("subgroup_keys: no protected attributes");
  const std::size_t n = attrs.front().block.rows();
  std::vector<SubgroupKey> keys(n);
  for (auto& k : keys) k.labels.reserve(attrs.size());
  for (const auto& a : attrs) {
    if (a.block.rows() != n) throw ShapeMismatch("subgroup_keys: sample counts differ");
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t label = 0;
      switch (a.kind) {
        case ProtectedKind::binary:
          label = a.block(i, 0) > 0.5 ? 1 : 0;
          break;
        case ProtectedKind::categorical_onehot: {
          std::size_t best = 0;
          for (std::size_t j = 1; j < a.block.cols(); ++j)
            if (a.block(i, j) > a.block(i, best)) best = j;
          label = static_cast<std::int32_t>(best);
          break;
        }
        case ProtectedKind::continuous:
          label = a.bins.label_of(a.block(i, 0));
          break;
      }
      keys[i].labels.push_back(label);
    }
  }
  return keys;
}

// ---------------------------------------------------------------------------
// UF: between-subgroup variance of prediction means over total variance
// ---------------------------------------------------------------------------

inline double uf_metric(std::span<const double> yhat, std::span<const SubgroupKey> keys) {
  if (yhat.size() != keys.size()) throw ShapeMismatch("uf_metric: sizes differ");
  if (yhat.size() < 2) throw SampleTooSmall("uf_metric: needs n >= 2");
  const double total_var = stats::variance(yhat);
  if (total_var <= 1e-12) throw DegenerateVariance("uf_metric: prediction variance is ~0");
  const double grand_mean = stats::mean(yhat);

  struct Acc {
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::map<SubgroupKey, Acc> groups;
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    auto& g = groups[keys[i]];
    g.sum += yhat[i];
    g.count += 1;
  }
  // Population variance of subgroup means, weighted by subgroup proportions:
  // the law of total variance then bounds the ratio by 1.
  double between = 0.0;
  const double n = static_cast<double>(yhat.size());
  for (const auto& [key, g] : groups) {
    const double m = g.sum / static_cast<double>(g.count);
    between += (static_cast<double>(g.count) / n) * (m - grand_mean) * (m - grand_mean);
  }
  return between / total_var;
}

// ---------------------------------------------------------------------------
// Histograms, KL and JS divergence
// ---------------------------------------------------------------------------

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> mass;  // normalised to 1 when non-empty

  bool same_bins(const Histogram& o) const {
    return lo == o.lo && hi == o.hi && mass.size() == o.mass.size();
  }
};

inline Histogram make_histogram(std::span<const double> values, int bins, double lo, double hi) {
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.mass.assign(static_cast<std::size_t>(bins), 0.0);
  if (values.empty()) return h;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0.0) {
      const double pos = (v - lo) / width;
      b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins) - 1.0));
      if (b >= h.mass.size()) b = h.mass.size() - 1;
    }
    h.mass[b] += 1.0;
  }
  for (double& m : h.mass) m /= static_cast<double>(values.size());
  return h;
}

inline constexpr double kHistogramSmoothing = 1e-10;

// KL(p || q) with natural log; empty bins of p contribute nothing, and q is
// guarded by additive smoothing where p has mass.
inline double kl_divergence(const Histogram& p, const Histogram& q) {
  if (!p.same_bins(q)) throw ShapeMismatch("kl_divergence: bin edges differ");
  double kl = 0.0;
  for (std::size_t b = 0; b < p.mass.size(); ++b) {
    if (p.mass[b] <= 0.0) continue;
    kl += p.mass[b] * std::log(p.mass[b] / std::max(q.mass[b], kHistogramSmoothing));
  }
  return kl;
}

// Subgroup-proportion-weighted KL of each conditional prediction histogram
// against the pooled histogram. Identical predictions collapse to a single
// bin and return 0; empty subgroups contribute 0.
inline double js_divergence(std::span<const double> yhat, std::span<const SubgroupKey> keys,
                            const BinningSpec& spec) {
  if (yhat.size() != keys.size()) throw ShapeMismatch("js_divergence: sizes differ");
  if (yhat.empty()) throw EmptyInput("js_divergence: empty input");
  if (spec.prediction_bins < 2) throw ConfigError("js_divergence: needs >= 2 bins");
  double lo = yhat[0], hi = yhat[0];
  for (double v : yhat) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) return 0.0;

  const Histogram pooled = make_histogram(yhat, spec.prediction_bins, lo, hi);
  std::map<SubgroupKey, std::vector<double>> groups;
  for (std::size_t i = 0; i < yhat.size(); ++i) groups[keys[i]].push_back(yhat[i]);

  double jsd = 0.0;
  const double n = static_cast<double>(yhat.size());
  for (const auto& [key, values] : groups) {
    const double pi = static_cast<double>(values.size()) / n;
    const Histogram cond = make_histogram(values, spec.prediction_bins, lo, hi);
    jsd += pi * kl_divergence(cond, pooled);
  }
  return jsd;
}

// ---------------------------------------------------------------------------
// Independence tests
// ---------------------------------------------------------------------------

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  enum class Method { chi2, perm_joint, perm_mutual, wilcoxon } method = Method::chi2;
  std::size_t replicates = 0;  // permutation tests only
  bool degenerate = false;     // chi2 with a degenerate dcorr denominator
  bool all_zero = false;       // wilcoxon with no nonzero differences
};

// Distance correlation chi-square test: statistic n * dcorr2, upper tail of
// chi-square with one degree of freedom.
inline TestResult chi2_independence_test(const Matrix& yhat, const Matrix& attrs_concat) {
  detail::check_pair(yhat, attrs_concat, "chi2_independence_test");
  TestResult r;
  r.method = TestResult::Method::chi2;
  const double dxx = dcov2_unbiased(yhat, yhat);
  const double dyy = dcov2_unbiased(attrs_concat, attrs_concat);
  if (!(dxx > 0.0) || !(dyy > 0.0)) {
    r.degenerate = true;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double corr = dcov2_unbiased(yhat, attrs_concat) / std::sqrt(dxx * dyy);
  r.statistic = static_cast<double>(yhat.rows()) * corr;
  r.p_value = std::max(stats::chi_square_1df_upper_tail(r.statistic), 1e-300);
  return r;
}

namespace detail {

// Permuted U-centred inner product: U-centring is equivariant under a
// simultaneous row/column permutation, so the replicate statistic is the
// inner product of the fixed prediction matrix against the permuted-index
// view of the attribute matrix.
inline double permuted_inner(const Matrix& uy, const Matrix& us,
                             std::span<const std::size_t> perm) {
  const std::size_t n = uy.rows();
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* yi = uy.row(i);
    const double* si = us.row(perm[i]);
    for (std::size_t j = 0; j < n; ++j) s += yi[j] * si[perm[j]];
    partials[i] = s;
  }
  return pairwise_sum(partials);
}

}  // namespace detail

// Joint test: rows of all protected attributes are permuted as one unit,
// preserving inter-attribute dependence. p-value per the add-one rule with
// strict exceedances; reproducible for a fixed seed.
inline TestResult permutation_test_joint(const Matrix& yhat, const std::vector<Matrix>& attrs,
                                         std::size_t replicates, std::uint64_t seed) {
  if (replicates < 1) throw ConfigError("permutation_test_joint: needs R >= 1");
  const Matrix cat = concat_columns(attrs);
  detail::check_pair(yhat, cat, "permutation_test_joint");
  const std::size_t n = yhat.rows();
  const double nn = static_cast<double>(n);
  const double scale = 1.0 / (nn * (nn - 3.0));
  const Matrix uy = u_centre(pairwise_distance_matrix(yhat));
  const Matrix us = u_centre(pairwise_distance_matrix(cat));
  const double t0 = detail::centred_inner_product(uy, us) * scale;

  Rng rng(seed);
  std::size_t exceed = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto perm = rng.permutation(n);
    if (detail::permuted_inner(uy, us, perm) * scale > t0) ++exceed;
  }
  TestResult out;
  out.method = TestResult::Method::perm_joint;
  out.statistic = t0;
  out.replicates = replicates;
  out.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(replicates));
  return out;
}

// Mutual test: the statistic is the joint estimator over all blocks, and each
// protected attribute is permuted with an independent stream derived from the
// master seed.
inline TestResult permutation_test_mutual(const Matrix& yhat, const std::vector<Matrix>& attrs,
                                          std::size_t replicates, std::uint64_t seed) {
  if (replicates < 1) throw ConfigError("permutation_test_mutual: needs R >= 1");
  if (attrs.empty()) throw ArityError("permutation_test_mutual: no attribute blocks");
  for (const auto& a : attrs) detail::check_pair(yhat, a, "permutation_test_mutual");
  const std::size_t n = yhat.rows();
  const std::size_t b = attrs.size() + 1;
  const double nn = static_cast<double>(n);

  std::vector<Matrix> centred;
  centred.reserve(b);
  centred.push_back(u_centre(pairwise_distance_matrix(yhat)));
  for (const auto& a : attrs) centred.push_back(u_centre(pairwise_distance_matrix(a)));

  // Statistic via the product expansion; equal to the decomposition sum.
  const auto statistic = [&](const std::vector<std::vector<std::size_t>>& perms) {
    std::vector<double> partials(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        double prod = centred[0](i, j) + 1.0;
        for (std::size_t m = 1; m < b; ++m)
          prod *= centred[m](perms[m - 1][i], perms[m - 1][j]) + 1.0;
        s += prod;
      }
      partials[i] = 2.0 * s;
    }
    return (pairwise_sum(partials) + nn) / (nn * (nn - 3.0)) - nn / (nn - 3.0);
  };

  std::vector<std::vector<std::size_t>> identity(attrs.size());
  for (auto& p : identity) {
    p.resize(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
  }
  const double t0 = statistic(identity);

  Rng master(seed);
  std::vector<Rng> streams;
  for (std::size_t k = 0; k < attrs.size(); ++k) streams.push_back(master.derive(k));
  std::size_t exceed = 0;
  std::vector<std::vector<std::size_t>> perms(attrs.size());
  for (std::size_t r = 0; r < replicates; ++r) {
    for (std::size_t k = 0; k < attrs.size(); ++k) perms[k] = streams[k].permutation(n);
    if (statistic(perms) > t0) ++exceed;
  }
  TestResult out;
  out.method = TestResult::Method::perm_mutual;
  out.statistic = t0;
  out.replicates = replicates;
  out.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(replicates));
  return out;
}

}  // namespace fairdcov
