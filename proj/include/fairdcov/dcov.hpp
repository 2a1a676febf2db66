// Distance-covariance family estimators: pairwise distance matrices,
// U-centring, the unbiased estimator and its expanded (triple-sum) form,
// distance correlation, the joint estimator over several blocks, the
// concatenated-attributes estimator, and the decompositions that separate
// marginal from higher-order dependence.
//
// Two computation routes are kept deliberately distinct so they can serve
// as cross-checks: the U-centred inner product and the expanded sum-of-
// products form, and likewise the joint estimator's decomposition sum and
// its product form.
//
// Small samples go through explicit n×n matrices; above kMatrixPathMaxN the
// same quantities are accumulated in two streaming passes with O(n) memory.
// Accumulation uses cascade summation over per-row partials.
#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "fairdcov/core.hpp"

namespace fairdcov {

inline constexpr std::size_t kMatrixPathMaxN = 2048;

namespace detail {

inline void check_block(const Matrix& b, const char* what) {
  if (b.rows() == 0) throw EmptyInput(std::string(what) + ": empty block");
  if (!b.all_finite()) throw InvalidSample(std::string(what) + ": non-finite entries");
}

inline void check_pair(const Matrix& x, const Matrix& y, const char* what) {
  check_block(x, what);
  check_block(y, what);
  if (x.rows() != y.rows())
    throw ShapeMismatch(std::string(what) + ": sample counts differ");
  if (x.rows() < 4) throw SampleTooSmall(std::string(what) + ": needs n >= 4");
}

// Row sums and grand total of the pairwise distance matrix, computed without
// materialising it.
struct DistanceProfile {
  std::vector<double> row_sums;
  double total = 0.0;
};

inline DistanceProfile distance_profile(const Matrix& b) {
  const std::size_t n = b.rows(), p = b.cols();
  DistanceProfile prof;
  prof.row_sums.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = b.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = euclidean(ri, b.row(j), p);
      prof.row_sums[i] += d;
      prof.row_sums[j] += d;
    }
  }
  prof.total = pairwise_sum(prof.row_sums);
  return prof;
}

// U-centred entry reconstructed from the profile, i != j.
inline double u_entry(double dist, const DistanceProfile& prof, std::size_t i, std::size_t j,
                      double n) {
  return dist - (prof.row_sums[i] + prof.row_sums[j]) / (n - 2.0) +
         prof.total / ((n - 1.0) * (n - 2.0));
}

// Centring combination applied to the off-diagonal entries of a symmetric
// matrix; the diagonal is ignored on input and zero on output. This is both
// the U-centring map for distance matrices and its adjoint for gradient
// propagation.
inline Matrix centre_offdiag(const Matrix& m) {
  const std::size_t n = m.rows();
  const double nn = static_cast<double>(n);
  std::vector<double> row_sums(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) row_sums[i] += m(i, j);
  std::vector<double> col_sums(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) col_sums[j] += m(i, j);
  const double total = pairwise_sum(row_sums);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      out(i, j) = m(i, j) - row_sums[i] / (nn - 2.0) - col_sums[j] / (nn - 2.0) +
                  total / ((nn - 1.0) * (nn - 2.0));
    }
  return out;
}

// <U_x, U_y> over off-diagonal entries, cascade-summed across rows.
inline double centred_inner_product(const Matrix& ux, const Matrix& uy) {
  const std::size_t n = ux.rows();
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* xi = ux.row(i);
    const double* yi = uy.row(i);
    for (std::size_t j = 0; j < n; ++j) s += xi[j] * yi[j];
    partials[i] = s;
  }
  return pairwise_sum(partials);
}

inline double dcov2_streaming(const Matrix& x, const Matrix& y) {
  const std::size_t n = x.rows();
  const double nn = static_cast<double>(n);
  const DistanceProfile px = distance_profile(x);
  const DistanceProfile py = distance_profile(y);
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* xi = x.row(i);
    const double* yi = y.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ux = u_entry(euclidean(xi, x.row(j), x.cols()), px, i, j, nn);
      const double uy = u_entry(euclidean(yi, y.row(j), y.cols()), py, i, j, nn);
      s += ux * uy;
    }
    partials[i] = 2.0 * s;
  }
  return pairwise_sum(partials) / (nn * (nn - 3.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Distance matrices and U-centring
// ---------------------------------------------------------------------------

inline Matrix pairwise_distance_matrix(const Matrix& block) {
  detail::check_block(block, "pairwise_distance_matrix");
  const std::size_t n = block.rows(), p = block.cols();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = euclidean(block.row(i), block.row(j), p);
  return d;
}

inline Matrix u_centre(const Matrix& dist) {
  if (dist.rows() != dist.cols()) throw ShapeMismatch("u_centre: matrix not square");
  if (dist.rows() < 4) throw SampleTooSmall("u_centre: needs n >= 4");
  return detail::centre_offdiag(dist);
}

// ---------------------------------------------------------------------------
// Pairwise estimators
// ---------------------------------------------------------------------------

// Unbiased distance-covariance estimator. May be slightly negative; never
// clamped.
inline double dcov2_unbiased(const Matrix& x, const Matrix& y) {
  detail::check_pair(x, y, "dcov2_unbiased");
  if (x.constant_rows() || y.constant_rows()) return 0.0;
  const std::size_t n = x.rows();
  if (n > kMatrixPathMaxN) return detail::dcov2_streaming(x, y);
  const Matrix ux = u_centre(pairwise_distance_matrix(x));
  const Matrix uy = u_centre(pairwise_distance_matrix(y));
  const double nn = static_cast<double>(n);
  return detail::centred_inner_product(ux, uy) / (nn * (nn - 3.0));
}

// Equivalent expanded form; serves as the independent oracle for
// dcov2_unbiased.
inline double dcov2_expanded(const Matrix& x, const Matrix& y) {
  detail::check_pair(x, y, "dcov2_expanded");
  if (x.constant_rows() || y.constant_rows()) return 0.0;
  const std::size_t n = x.rows();
  const double nn = static_cast<double>(n);
  const detail::DistanceProfile px = detail::distance_profile(x);
  const detail::DistanceProfile py = detail::distance_profile(y);
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j)
      s += euclidean(x.row(i), x.row(j), x.cols()) * euclidean(y.row(i), y.row(j), y.cols());
    partials[i] = 2.0 * s;
  }
  const double s1 = pairwise_sum(partials);
  std::vector<double> cross(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) cross[i] = px.row_sums[i] * py.row_sums[i];
  const double s3 = pairwise_sum(cross);
  return (s1 + px.total * py.total / ((nn - 1.0) * (nn - 2.0)) - 2.0 / (nn - 2.0) * s3) /
         (nn * (nn - 3.0));
}

// Standardised estimator in [-1, 1]; 0 when the denominator is not a positive
// real number (either block degenerate).
inline double dcorr2(const Matrix& x, const Matrix& y) {
  detail::check_pair(x, y, "dcorr2");
  const double dxx = dcov2_unbiased(x, x);
  const double dyy = dcov2_unbiased(y, y);
  if (!(dxx > 0.0) || !(dyy > 0.0)) return 0.0;
  return dcov2_unbiased(x, y) / std::sqrt(dxx * dyy);
}

// ---------------------------------------------------------------------------
// Multi-attribute estimators
// ---------------------------------------------------------------------------

inline Matrix concat_columns(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) throw ArityError("concat_columns: no blocks");
  const std::size_t n = blocks.front().rows();
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.rows() != n) throw ShapeMismatch("concat_columns: sample counts differ");
    total += b.cols();
  }
  Matrix out(n, total);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.row(i);
    for (const auto& b : blocks) {
      const double* src = b.row(i);
      dst = std::copy(src, src + b.cols(), dst);
    }
  }
  return out;
}

// Weighted sum of pairwise estimators against each attribute separately.
inline double separate_sum(const Matrix& yhat, const std::vector<Matrix>& attrs,
                           std::span<const double> weights) {
  if (weights.size() != attrs.size())
    throw ShapeMismatch("separate_sum: one weight per attribute required");
  for (double w : weights)
    if (!(w >= 0.0)) throw InvalidWeight("separate_sum: negative weight");
  double s = 0.0;
  for (std::size_t k = 0; k < attrs.size(); ++k)
    s += weights[k] * dcov2_unbiased(yhat, attrs[k]);
  return s;
}

// Distance covariance between predictions and the column-concatenation of all
// protected attributes.
inline double ccdcov(const Matrix& yhat, const std::vector<Matrix>& attrs) {
  return dcov2_unbiased(yhat, concat_columns(attrs));
}

struct CCdCovDecomposition {
  std::vector<double> marginal_terms;
  double eta = 0.0;
  double total = 0.0;
};

// Splits the concatenated estimator into per-attribute marginal terms and the
// joint correction eta. The correction is built from the exact difference
// xi(i,j) = |s_i - s_j| - sum_k |s_{i,k} - s_{j,k}|, and `total` is computed
// through the independent dcov2_unbiased route so the identity
// total = sum(marginals) + eta is a genuine cross-check.
inline CCdCovDecomposition ccdcov_decompose(const Matrix& yhat, const std::vector<Matrix>& attrs) {
  if (attrs.empty()) throw ArityError("ccdcov_decompose: no attribute blocks");
  const Matrix cat = concat_columns(attrs);
  detail::check_pair(yhat, cat, "ccdcov_decompose");

  CCdCovDecomposition out;
  for (const auto& a : attrs) out.marginal_terms.push_back(dcov2_unbiased(yhat, a));
  out.total = dcov2_unbiased(yhat, cat);

  const std::size_t n = yhat.rows();
  const double nn = static_cast<double>(n);
  if (attrs.size() == 1 || yhat.constant_rows()) {
    // xi is identically zero for a single block; a constant prediction block
    // makes every eta term vanish.
    out.eta = 0.0;
    return out;
  }

  std::vector<double> a_row(n, 0.0), xi_row(n, 0.0), a_xi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = euclidean(yhat.row(i), yhat.row(j), yhat.cols());
      double marg = 0.0;
      for (const auto& b : attrs) marg += euclidean(b.row(i), b.row(j), b.cols());
      const double xi = euclidean(cat.row(i), cat.row(j), cat.cols()) - marg;
      a_row[i] += a;
      a_row[j] += a;
      xi_row[i] += xi;
      xi_row[j] += xi;
      s += a * xi;
    }
    a_xi[i] = 2.0 * s;
  }
  const double sum_a_xi = pairwise_sum(a_xi);
  const double total_a = pairwise_sum(a_row);
  const double total_xi = pairwise_sum(xi_row);
  std::vector<double> cross(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) cross[i] = a_row[i] * xi_row[i];
  const double sum_cross = pairwise_sum(cross);
  out.eta = (sum_a_xi + total_a * total_xi / ((nn - 1.0) * (nn - 2.0)) -
             2.0 / (nn - 2.0) * sum_cross) /
            (nn * (nn - 3.0));
  return out;
}

namespace detail {

// Subset masks over `b` blocks with at least `min_size` members.
inline std::vector<std::uint32_t> subset_masks(std::size_t b, int min_size) {
  std::vector<std::uint32_t> masks;
  for (std::uint32_t m = 0; m < (1u << b); ++m)
    if (std::popcount(m) >= min_size) masks.push_back(m);
  return masks;
}

inline void check_joint_blocks(const std::vector<Matrix>& blocks, const char* what) {
  if (blocks.size() < 2) throw ArityError(std::string(what) + ": needs at least 2 blocks");
  if (blocks.size() > 16) throw ArityError(std::string(what) + ": too many blocks");
  const std::size_t n = blocks.front().rows();
  for (const auto& b : blocks) {
    check_block(b, what);
    if (b.rows() != n) throw ShapeMismatch(std::string(what) + ": sample counts differ");
  }
  if (n < 4) throw SampleTooSmall(std::string(what) + ": needs n >= 4");
}

// zeta: all subset-product terms of order >= 3 from expanding prod(U_i + 1),
// accumulated by explicit subset enumeration.
inline double joint_zeta(const std::vector<Matrix>& blocks) {
  const std::size_t b = blocks.size();
  if (b < 3) return 0.0;
  const std::size_t n = blocks.front().rows();
  const double nn = static_cast<double>(n);
  const auto masks = subset_masks(b, 3);
  std::vector<DistanceProfile> profs;
  profs.reserve(b);
  for (const auto& blk : blocks) profs.push_back(distance_profile(blk));
  std::vector<double> u(b, 0.0);
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t m = 0; m < b; ++m)
        u[m] = u_entry(euclidean(blocks[m].row(i), blocks[m].row(j), blocks[m].cols()), profs[m],
                       i, j, nn);
      for (std::uint32_t mask : masks) {
        double prod = 1.0;
        for (std::size_t m = 0; m < b; ++m)
          if (mask & (1u << m)) prod *= u[m];
        s += prod;
      }
    }
    partials[i] = 2.0 * s;
  }
  return pairwise_sum(partials) / (nn * (nn - 3.0));
}

}  // namespace detail

// Joint estimator over d+1 blocks (prediction block first by convention).
// Normative form: sum of all pairwise estimators plus the order->=3 term.
inline double jdcov2(const std::vector<Matrix>& blocks) {
  detail::check_joint_blocks(blocks, "jdcov2");
  double s = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    for (std::size_t j = i + 1; j < blocks.size(); ++j)
      s += dcov2_unbiased(blocks[i], blocks[j]);
  return s + detail::joint_zeta(blocks);
}

// Product-form cross-check. The subtracted constant is n/(n-3): expanding
// prod(U_i + 1) over the full double sum leaves an n^2 constant term, so
// n^2/(n(n-3)) must come out for the product form to match the decomposition.
inline double jdcov2_product_form(const std::vector<Matrix>& blocks) {
  detail::check_joint_blocks(blocks, "jdcov2_product_form");
  const std::size_t b = blocks.size();
  const std::size_t n = blocks.front().rows();
  const double nn = static_cast<double>(n);
  std::vector<detail::DistanceProfile> profs;
  profs.reserve(b);
  for (const auto& blk : blocks) profs.push_back(detail::distance_profile(blk));
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double prod = 1.0;
      for (std::size_t m = 0; m < b; ++m)
        prod *= detail::u_entry(
                    euclidean(blocks[m].row(i), blocks[m].row(j), blocks[m].cols()), profs[m], i,
                    j, nn) +
                1.0;
      s += prod;
    }
    partials[i] = 2.0 * s;
  }
  const double full_sum = pairwise_sum(partials) + nn;  // diagonal products are all 1
  return full_sum / (nn * (nn - 3.0)) - nn / (nn - 3.0);
}

struct JdCovDecomposition {
  std::vector<double> pred_attr_terms;
  std::vector<double> attr_attr_terms;
  double zeta = 0.0;
  double total = 0.0;
};

// First block is the prediction; the rest are protected attributes.
inline JdCovDecomposition jdcov_decompose(const std::vector<Matrix>& blocks) {
  detail::check_joint_blocks(blocks, "jdcov_decompose");
  JdCovDecomposition out;
  for (std::size_t k = 1; k < blocks.size(); ++k)
    out.pred_attr_terms.push_back(dcov2_unbiased(blocks[0], blocks[k]));
  for (std::size_t k = 1; k < blocks.size(); ++k)
    for (std::size_t l = k + 1; l < blocks.size(); ++l)
      out.attr_attr_terms.push_back(dcov2_unbiased(blocks[k], blocks[l]));
  out.zeta = detail::joint_zeta(blocks);
  out.total = 0.0;
  for (double v : out.pred_attr_terms) out.total += v;
  for (double v : out.attr_attr_terms) out.total += v;
  out.total += out.zeta;
  return out;
}

// ---------------------------------------------------------------------------
// Regulariser value + gradient with respect to (scalar) predictions
// ---------------------------------------------------------------------------

enum class RegulariserKind { none, separate_sum, jdcov, ccdcov };

inline const char* to_string(RegulariserKind k) {
  switch (k) {
    case RegulariserKind::none: return "none";
    case RegulariserKind::separate_sum: return "separate";
    case RegulariserKind::jdcov: return "jdcov";
    case RegulariserKind::ccdcov: return "ccdcov";
  }
  return "?";
}

struct RegulariserGrad {
  double value = 0.0;
  std::vector<double> dpred;  // d psi / d yhat_i
};

namespace detail {

// Gradient of <|yhat_i - yhat_j|, G> style terms with respect to yhat: a
// symmetric multiplier matrix G contracts against sign(yhat_k - yhat_j).
// Subgradient 0 is used at the |.| kink.
inline std::vector<double> contract_sign(std::span<const double> yhat, const Matrix& g,
                                         double scale) {
  const std::size_t n = yhat.size();
  std::vector<double> grad(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    const double* gk = g.row(k);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      const double diff = yhat[k] - yhat[j];
      if (diff > 0.0)
        s += gk[j];
      else if (diff < 0.0)
        s -= gk[j];
    }
    grad[k] = 2.0 * scale * s;
  }
  return grad;
}

// Value of <a, M> over off-diagonal entries where a_ij = |yhat_i - yhat_j|.
inline double abs_diff_inner(std::span<const double> yhat, const Matrix& m) {
  const std::size_t n = yhat.size();
  std::vector<double> partials(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* mi = m.row(i);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) s += std::abs(yhat[i] - yhat[j]) * mi[j];
    partials[i] = s;
  }
  return pairwise_sum(partials);
}

}  // namespace detail

// Evaluates psi and d psi / d yhat for a batch of scalar predictions. Used in
// training; batch sizes are expected to stay within the matrix path.
inline RegulariserGrad regulariser_with_gradient(RegulariserKind kind,
                                                 std::span<const double> yhat,
                                                 const std::vector<Matrix>& attrs,
                                                 std::span<const double> weights = {}) {
  const std::size_t n = yhat.size();
  RegulariserGrad out;
  out.dpred.assign(n, 0.0);
  if (kind == RegulariserKind::none) return out;
  if (n < 4) throw SampleTooSmall("regulariser_with_gradient: needs n >= 4");
  if (attrs.empty()) throw ArityError("regulariser_with_gradient: no attribute blocks");
  for (const auto& a : attrs)
    if (a.rows() != n) throw ShapeMismatch("regulariser_with_gradient: sample counts differ");

  bool const_pred = true;
  for (std::size_t i = 1; i < n && const_pred; ++i) const_pred = (yhat[i] == yhat[0]);
  if (const_pred) return out;  // psi and its gradient vanish at a constant block

  const double nn = static_cast<double>(n);
  const double scale = 1.0 / (nn * (nn - 3.0));

  if (kind == RegulariserKind::ccdcov || kind == RegulariserKind::separate_sum) {
    Matrix m;
    if (kind == RegulariserKind::ccdcov) {
      m = u_centre(pairwise_distance_matrix(concat_columns(attrs)));
    } else {
      if (weights.size() != attrs.size())
        throw ShapeMismatch("separate_sum: one weight per attribute required");
      for (double w : weights)
        if (!(w >= 0.0)) throw InvalidWeight("separate_sum: negative weight");
      m = Matrix(n, n);
      for (std::size_t k = 0; k < attrs.size(); ++k) {
        if (weights[k] == 0.0 || attrs[k].constant_rows()) continue;
        const Matrix uk = u_centre(pairwise_distance_matrix(attrs[k]));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) m(i, j) += weights[k] * uk(i, j);
      }
    }
    // M is U-centred, so <C(a), M> = <a, M>: no centring of the prediction
    // distances is needed for either the value or the gradient.
    out.value = scale * detail::abs_diff_inner(yhat, m);
    out.dpred = detail::contract_sign(yhat, m, scale);
    return out;
  }

  // jdcov: value from the decomposition sum, gradient through the product
  // structure (identical functions of the predictions).
  std::vector<Matrix> blocks;
  blocks.reserve(attrs.size() + 1);
  blocks.push_back(Matrix::column(yhat));
  for (const auto& a : attrs) blocks.push_back(a);
  out.value = jdcov2(blocks);

  Matrix prod(n, n, 1.0);
  for (const auto& a : attrs) {
    const Matrix ua = u_centre(pairwise_distance_matrix(a));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) prod(i, j) *= ua(i, j) + 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) prod(i, i) = 0.0;
  const Matrix g = detail::centre_offdiag(prod);  // adjoint of the U-centring map
  out.dpred = detail::contract_sign(yhat, g, scale);
  return out;
}

// Value-only convenience used for reporting.
inline double regulariser_value(RegulariserKind kind, const Matrix& yhat,
                                const std::vector<Matrix>& attrs,
                                std::span<const double> weights = {}) {
  switch (kind) {
    case RegulariserKind::none: return 0.0;
    case RegulariserKind::ccdcov: return ccdcov(yhat, attrs);
    case RegulariserKind::separate_sum: {
      if (weights.empty()) {
        std::vector<double> ones(attrs.size(), 1.0);
        return separate_sum(yhat, attrs, ones);
      }
      return separate_sum(yhat, attrs, weights);
    }
    case RegulariserKind::jdcov: {
      std::vector<Matrix> blocks;
      blocks.reserve(attrs.size() + 1);
      blocks.push_back(yhat);
      for (const auto& a : attrs) blocks.push_back(a);
      return jdcov2(blocks);
    }
  }
  return 0.0;
}

}  // namespace fairdcov
