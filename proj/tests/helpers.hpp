// Shared generators and reference implementations for the test suite. The
// reference evaluators here are deliberately naive textbook translations,
// independent of the library's computation paths.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fairdcov/core.hpp"

namespace testing_helpers {

using fairdcov::Matrix;
using fairdcov::Rng;

inline Matrix random_block(Rng& rng, std::size_t n, std::size_t p) {
  Matrix m(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) m(i, j) = rng.normal();
  return m;
}

// One-hot block with k categories drawn uniformly.
inline Matrix random_onehot(Rng& rng, std::size_t n, std::size_t k) {
  Matrix m(n, k);
  for (std::size_t i = 0; i < n; ++i) m(i, rng.below(k)) = 1.0;
  return m;
}

// Naive U-centring straight from the definition: plain loops, no cascade
// summation, no shortcuts.
inline Matrix naive_u_centre(const Matrix& d) {
  const std::size_t n = d.rows();
  const double nn = static_cast<double>(n);
  std::vector<double> row(n, 0.0), col(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row[i] += d(i, j);
      col[j] += d(i, j);
      total += d(i, j);
    }
  Matrix u(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      u(i, j) = d(i, j) - row[i] / (nn - 2.0) - col[j] / (nn - 2.0) +
                total / ((nn - 1.0) * (nn - 2.0));
    }
  return u;
}

inline double naive_distance(const Matrix& m, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double diff = m(i, c) - m(j, c);
    s += diff * diff;
  }
  return std::sqrt(s);
}

inline Matrix naive_distance_matrix(const Matrix& m) {
  Matrix d(m.rows(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.rows(); ++j) d(i, j) = naive_distance(m, i, j);
  return d;
}

// Textbook unbiased estimator: U-centre both distance matrices and take the
// normalised inner product.
inline double naive_dcov2(const Matrix& x, const Matrix& y) {
  const std::size_t n = x.rows();
  const double nn = static_cast<double>(n);
  const Matrix ux = naive_u_centre(naive_distance_matrix(x));
  const Matrix uy = naive_u_centre(naive_distance_matrix(y));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += ux(i, j) * uy(i, j);
  return s / (nn * (nn - 3.0));
}

// Spearman rank correlation with average ranks on ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size(), 0.0);
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = fairdcov::stats::mean(ra);
  const double mb = fairdcov::stats::mean(rb);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace testing_helpers
