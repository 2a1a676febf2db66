#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "fairdcov/dcov.hpp"
#include "helpers.hpp"

using namespace fairdcov;
using testing_helpers::naive_dcov2;
using testing_helpers::random_block;
using testing_helpers::random_onehot;

namespace {

// Z = sgn(X*Y) with X, Y standard normal: Z is marginally independent of each
// of X and Y but determined by their joint values.
struct SgnData {
  Matrix x, y, z;
};

SgnData make_sgn_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SgnData d{Matrix(n, 1), Matrix(n, 1), Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double y = rng.normal();
    d.x(i, 0) = x;
    d.y(i, 0) = y;
    d.z(i, 0) = (x * y >= 0.0) ? 1.0 : -1.0;
  }
  return d;
}

}  // namespace

TEST_CASE("pairwise_distance_matrix matches hand Euclidean arithmetic") {
  const Matrix b = Matrix::from_rows({{0.0}, {3.0}, {4.0}});
  const Matrix d = pairwise_distance_matrix(b);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(0, 1) == 3.0);
  CHECK(d(0, 2) == 4.0);
  CHECK(d(1, 2) == 1.0);
  CHECK(d(2, 1) == 1.0);

  SECTION("identical rows give the zero matrix") {
    const Matrix c = Matrix::from_rows({{1.5, -2.0}, {1.5, -2.0}, {1.5, -2.0}, {1.5, -2.0}});
    const Matrix dc = pairwise_distance_matrix(c);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(dc(i, j) == 0.0);
  }

  SECTION("one-hot rows are sqrt(2) apart") {
    const Matrix oh = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    CHECK(pairwise_distance_matrix(oh)(0, 1) == Approx(std::sqrt(2.0)).epsilon(1e-15));
  }

  SECTION("non-finite input is rejected") {
    Matrix bad = Matrix::from_rows({{0.0}, {std::nan("")}});
    CHECK_THROWS_AS(pairwise_distance_matrix(bad), InvalidSample);
  }
}

TEST_CASE("u_centre") {
  SECTION("all-zero distances stay zero") {
    const Matrix u = u_centre(Matrix(5, 5));
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(u(i, j) == 0.0);
  }

  SECTION("rows of the centred matrix sum to zero") {
    const Matrix b = Matrix::from_rows({{0.0}, {3.0}, {4.0}, {9.0}});
    const Matrix u = u_centre(pairwise_distance_matrix(b));
    for (std::size_t i = 0; i < 4; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 4; ++j) row += u(i, j);
      CHECK(std::abs(row) < 1e-12);
    }
  }

  SECTION("random n=10: symmetry, zero diagonal, vanishing row/column sums") {
    Rng rng(7);
    const Matrix b = random_block(rng, 10, 3);
    const Matrix u = u_centre(pairwise_distance_matrix(b));
    double max_abs = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) max_abs = std::max(max_abs, std::abs(u(i, j)));
    const double tol = 1e-9 * 10.0 * max_abs;
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(u(i, i) == 0.0);
      double row = 0.0, col = 0.0;
      for (std::size_t j = 0; j < 10; ++j) {
        CHECK(u(i, j) == Approx(u(j, i)).margin(1e-14));
        row += u(i, j);
        col += u(j, i);
      }
      CHECK(std::abs(row) < tol);
      CHECK(std::abs(col) < tol);
    }
  }

  SECTION("n < 4 is rejected") {
    CHECK_THROWS_AS(u_centre(Matrix(3, 3)), SampleTooSmall);
  }
}

TEST_CASE("dcov2_unbiased basics") {
  Rng rng(11);

  SECTION("constant block gives exactly zero") {
    const Matrix x(6, 1, 2.5);
    const Matrix y = random_block(rng, 6, 2);
    CHECK(dcov2_unbiased(x, y) == 0.0);
  }

  SECTION("symmetry in the arguments is exact") {
    const Matrix x = random_block(rng, 12, 2);
    const Matrix y = random_block(rng, 12, 1);
    CHECK(dcov2_unbiased(x, y) == dcov2_unbiased(y, x));
  }

  SECTION("matches the naive textbook evaluation") {
    const Matrix x = random_block(rng, 9, 1);
    const Matrix y = random_block(rng, 9, 3);
    CHECK(dcov2_unbiased(x, y) == Approx(naive_dcov2(x, y)).margin(1e-14));
  }

  SECTION("mismatched sample counts / tiny samples are rejected") {
    CHECK_THROWS_AS(dcov2_unbiased(Matrix(5, 1, 1.0), Matrix(6, 1, 1.0)), ShapeMismatch);
    CHECK_THROWS_AS(dcov2_unbiased(random_block(rng, 3, 1), random_block(rng, 3, 1)),
                    SampleTooSmall);
  }
}

TEST_CASE("dcov2_expanded agrees with the U-centred path") {
  Rng rng(13);

  SECTION("constant block gives zero") {
    CHECK(dcov2_expanded(Matrix(5, 2, 1.0), random_block(rng, 5, 1)) == 0.0);
  }

  SECTION("x = y = [1,2,3,4] is strictly positive on both routes") {
    const Matrix x = Matrix::from_rows({{1.0}, {2.0}, {3.0}, {4.0}});
    const double a = dcov2_unbiased(x, x);
    const double b = dcov2_expanded(x, x);
    CHECK(a > 0.0);
    CHECK(b == Approx(a).epsilon(1e-12));
    CHECK(b == Approx(naive_dcov2(x, x)).epsilon(1e-12));
  }

  SECTION("random instances agree within 1e-10 relative") {
    for (int rep = 0; rep < 40; ++rep) {
      const std::size_t n = 5 + rng.below(46);
      const std::size_t px = 1 + rng.below(3);
      const Matrix x = (rep % 3 == 0) ? random_onehot(rng, n, 3) : random_block(rng, n, px);
      const Matrix y = random_block(rng, n, 1 + rng.below(2));
      const double a = dcov2_unbiased(x, y);
      const double b = dcov2_expanded(x, y);
      CHECK(std::abs(a - b) <= 1e-10 * std::max({std::abs(a), std::abs(b), 1e-12}));
    }
  }
}

TEST_CASE("streaming path matches the matrix path above the size threshold") {
  // Exercise the n > kMatrixPathMaxN branch against the expanded form.
  Rng rng(17);
  const std::size_t n = kMatrixPathMaxN + 8;
  const Matrix x = random_block(rng, n, 1);
  const Matrix y = random_block(rng, n, 2);
  const double a = dcov2_unbiased(x, y);
  const double b = dcov2_expanded(x, y);
  CHECK(std::abs(a - b) <= 1e-10 * std::max({std::abs(a), std::abs(b), 1e-12}));
}

TEST_CASE("dcov2_unbiased is unbiased under independence and goes negative") {
  Rng rng(19);
  const int reps = 2000;
  std::vector<double> values(reps);
  int negatives = 0;
  for (int r = 0; r < reps; ++r) {
    const Matrix x = random_block(rng, 20, 1);
    const Matrix y = random_block(rng, 20, 1);
    values[r] = dcov2_unbiased(x, y);
    if (values[r] < 0.0) ++negatives;
  }
  const double m = stats::mean(values);
  const double se = std::sqrt(stats::variance(values) / reps);
  CHECK(std::abs(m) <= 3.0 * se);
  CHECK(negatives > 0);
}

TEST_CASE("dcorr2") {
  Rng rng(23);

  SECTION("self-correlation of a non-constant block is 1") {
    const Matrix x = random_block(rng, 15, 1);
    CHECK(dcorr2(x, x) == Approx(1.0).epsilon(1e-12));
  }

  SECTION("degenerate denominator returns 0") {
    const Matrix c(8, 1, 3.0);
    CHECK(dcorr2(c, random_block(rng, 8, 1)) == 0.0);
  }

  SECTION("independent samples at n=2000 give |dcorr2| < 0.02") {
    const Matrix x = random_block(rng, 2000, 1);
    const Matrix y = random_block(rng, 2000, 1);
    CHECK(std::abs(dcorr2(x, y)) < 0.02);
  }
}

TEST_CASE("jdcov2") {
  Rng rng(29);

  SECTION("two blocks reduce exactly to the pairwise estimator") {
    const Matrix x = random_block(rng, 10, 1);
    const Matrix y = random_block(rng, 10, 2);
    CHECK(jdcov2({x, y}) == dcov2_unbiased(x, y));
  }

  SECTION("fewer than two blocks is an arity error") {
    CHECK_THROWS_AS(jdcov2({random_block(rng, 6, 1)}), ArityError);
  }

  SECTION("mutually independent blocks at n=2000 give |jdcov2| < 0.02") {
    const Matrix a = random_block(rng, 2000, 1);
    const Matrix b = random_block(rng, 2000, 1);
    const Matrix c = random_block(rng, 2000, 1);
    CHECK(std::abs(jdcov2({a, b, c})) < 0.02);
  }

  SECTION("decomposition sum equals the reconciled product form") {
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t n = 8 + rng.below(30);
      std::vector<Matrix> blocks;
      const std::size_t d = 2 + rng.below(2);
      for (std::size_t k = 0; k <= d; ++k)
        blocks.push_back(k % 2 == 0 ? random_block(rng, n, 1) : random_onehot(rng, n, 3));
      const double sum_form = jdcov2(blocks);
      const double prod_form = jdcov2_product_form(blocks);
      CHECK(sum_form == Approx(prod_form).margin(1e-10));
    }
  }
}

TEST_CASE("jdcov_decompose") {
  Rng rng(31);

  SECTION("term counts for two attributes plus prediction") {
    const Matrix yhat = random_block(rng, 12, 1);
    const Matrix s1 = random_onehot(rng, 12, 2);
    const Matrix s2 = random_block(rng, 12, 1);
    const auto dec = jdcov_decompose({yhat, s1, s2});
    CHECK(dec.pred_attr_terms.size() == 2);
    CHECK(dec.attr_attr_terms.size() == 1);
    CHECK(dec.total == Approx(jdcov2({yhat, s1, s2})).margin(1e-12));
  }

  SECTION("independent blocks drive every field towards zero") {
    const std::size_t n = 1500;
    const Matrix yhat = random_block(rng, n, 1);
    const Matrix s1 = random_block(rng, n, 1);
    const Matrix s2 = random_block(rng, n, 1);
    const auto dec = jdcov_decompose({yhat, s1, s2});
    for (double v : dec.pred_attr_terms) CHECK(std::abs(v) < 0.02);
    for (double v : dec.attr_attr_terms) CHECK(std::abs(v) < 0.02);
    CHECK(std::abs(dec.zeta) < 0.02);
  }

  SECTION("sgn(XY) data: zeta dominates the pairwise prediction terms") {
    // The pairwise terms are blind to the joint dependence; only zeta reacts.
    // With a single binary block among the three, the U-centred entries of
    // that block are close to -z_k*z_l, so zeta picks the dependence up with
    // a negative sign here.
    const auto d = make_sgn_data(1000, 101);
    const auto dec = jdcov_decompose({d.z, d.x, d.y});
    const double marginal_sum = std::abs(dec.pred_attr_terms[0] + dec.pred_attr_terms[1]);
    CHECK(std::abs(dec.zeta) > 10.0 * marginal_sum);
    CHECK(std::abs(dec.total - (dec.total - dec.zeta)) > 0.03);
  }
}

TEST_CASE("ccdcov and its decomposition") {
  Rng rng(37);

  SECTION("a single attribute reduces to the pairwise estimator") {
    const Matrix yhat = random_block(rng, 10, 1);
    const Matrix s = random_block(rng, 10, 2);
    CHECK(ccdcov(yhat, {s}) == dcov2_unbiased(yhat, s));
    const auto dec = ccdcov_decompose(yhat, {s});
    CHECK(dec.eta == 0.0);
    CHECK(dec.total == dec.marginal_terms[0]);
  }

  SECTION("decomposition identity on random mixed data") {
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t n = 50;
      const Matrix yhat = random_block(rng, n, 1);
      std::vector<Matrix> attrs;
      const std::size_t d = 1 + rng.below(3);
      for (std::size_t k = 0; k < d; ++k)
        attrs.push_back(k % 2 == 0 ? random_block(rng, n, 1) : random_onehot(rng, n, 4));
      const auto dec = ccdcov_decompose(yhat, attrs);
      double sum = dec.eta;
      for (double v : dec.marginal_terms) sum += v;
      CHECK(std::abs(dec.total - sum) < 1e-8);
    }
  }

  SECTION("sgn(XY): marginals stay negligible, eta carries the dependence") {
    const auto d = make_sgn_data(1000, 211);
    const auto dec = ccdcov_decompose(d.z, {d.x, d.y});
    CHECK(std::abs(dec.marginal_terms[0]) < 0.005);
    CHECK(std::abs(dec.marginal_terms[1]) < 0.005);
    CHECK(dec.total > 0.03);
    CHECK(dec.eta > 0.03);
  }

  SECTION("correlated attributes with an independent prediction keep ccdcov near zero") {
    const std::size_t n = 1000;
    Rng g(503);
    Matrix x(n, 1), y(n, 1), z(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = g.normal();
      const double v = g.normal();
      x(i, 0) = u;
      y(i, 0) = 0.8 * u + std::sqrt(1.0 - 0.64) * v;
      z(i, 0) = g.normal();
    }
    CHECK(std::abs(ccdcov(z, {x, y})) < 0.005);
  }

  SECTION("ccdcov total is invariant under reordering the attribute blocks") {
    const Matrix yhat = random_block(rng, 40, 1);
    const Matrix s1 = random_block(rng, 40, 2);
    const Matrix s2 = random_onehot(rng, 40, 3);
    const Matrix s3 = random_block(rng, 40, 1);
    const double a = ccdcov(yhat, {s1, s2, s3});
    const double b = ccdcov(yhat, {s3, s1, s2});
    CHECK(a == Approx(b).margin(1e-12));
  }
}

TEST_CASE("separate_sum") {
  Rng rng(41);
  const Matrix yhat = random_block(rng, 20, 1);
  const Matrix s1 = random_block(rng, 20, 1);
  const Matrix s2 = random_block(rng, 20, 2);

  SECTION("zero weights give zero") {
    const std::vector<double> w{0.0, 0.0};
    CHECK(separate_sum(yhat, {s1, s2}, w) == 0.0);
  }

  SECTION("single attribute with unit weight is the plain estimator") {
    const std::vector<double> w{1.0};
    CHECK(separate_sum(yhat, {s1}, w) == dcov2_unbiased(yhat, s1));
  }

  SECTION("negative weights are rejected") {
    const std::vector<double> w{1.0, -0.5};
    CHECK_THROWS_AS(separate_sum(yhat, {s1, s2}, w), InvalidWeight);
  }

  SECTION("sgn(XY) gap: separate sum misses what ccdcov captures") {
    const auto d = make_sgn_data(1000, 307);
    const std::vector<double> w{1.0, 1.0};
    CHECK(std::abs(separate_sum(d.z, {d.x, d.y}, w)) < 0.01);
    CHECK(ccdcov(d.z, {d.x, d.y}) > 0.03);
  }
}

TEST_CASE("regulariser_with_gradient matches value routes and finite differences") {
  Rng rng(43);
  const std::size_t n = 12;
  std::vector<double> yhat(n);
  for (auto& v : yhat) v = rng.uniform(0.05, 0.95);
  const Matrix s1 = random_block(rng, n, 1);
  const Matrix s2 = testing_helpers::random_onehot(rng, n, 3);
  const std::vector<Matrix> attrs{s1, s2};
  const std::vector<double> w{1.0, 1.0};

  const auto eval_value = [&](RegulariserKind kind, std::span<const double> pred) {
    return regulariser_value(kind, Matrix::column(pred), attrs, w);
  };

  for (RegulariserKind kind :
       {RegulariserKind::separate_sum, RegulariserKind::ccdcov, RegulariserKind::jdcov}) {
    const auto rg = regulariser_with_gradient(kind, yhat, attrs, w);
    CHECK(rg.value == Approx(eval_value(kind, yhat)).margin(1e-12));

    const double h = 1e-6;
    for (std::size_t k = 0; k < n; k += 3) {
      auto up = yhat, dn = yhat;
      up[k] += h;
      dn[k] -= h;
      const double fd = (eval_value(kind, up) - eval_value(kind, dn)) / (2.0 * h);
      CHECK(rg.dpred[k] == Approx(fd).margin(1e-6));
    }
  }

  SECTION("constant predictions short-circuit to zero value and gradient") {
    std::vector<double> flat(n, 0.4);
    const auto rg = regulariser_with_gradient(RegulariserKind::ccdcov, flat, attrs);
    CHECK(rg.value == 0.0);
    for (double g : rg.dpred) CHECK(g == 0.0);
  }
}
