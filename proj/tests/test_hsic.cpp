#include "dualhsic/hsic.hpp"

#include <cmath>

#include "doctest.h"
#include "test_support.hpp"

using namespace dualhsic;
using dualhsic::testing::finite_diff;
using dualhsic::testing::random_gaussian;
using dualhsic::testing::rel_error;

namespace {

const KernelConfig kGauss5{5.0, KernelKind::gaussian};

Matrix constant_rows(Index n, Index d, double v) {
  return Matrix::Constant(n, d, v);
}

}  // namespace

TEST_CASE("gaussian kernel on identical rows is all ones") {
  Matrix x = constant_rows(4, 3, 0.7);
  Matrix k = kernel_matrix(x, kGauss5);
  CHECK((k - Matrix::Ones(4, 4)).norm() == 0.0);
}

TEST_CASE("gaussian kernel matches the closed form on a 3-4-5 pair") {
  Matrix x(2, 2);
  x << 0, 0, 3, 4;
  Matrix k = kernel_matrix(x, kGauss5);
  CHECK(k(0, 0) == 1.0);
  CHECK(k(1, 1) == 1.0);
  CHECK(k(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));  // exp(-25/50)
}

TEST_CASE("linear kernel of orthonormal rows is the identity") {
  Matrix x = Matrix::Identity(3, 3);
  Matrix k = kernel_matrix(x, KernelConfig{1.0, KernelKind::linear});
  CHECK((k - Matrix::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("kernel_matrix rejects non-positive sigma") {
  Matrix x = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(kernel_matrix(x, KernelConfig{0.0, KernelKind::gaussian}), ConfigError);
  CHECK_THROWS_AS(kernel_matrix(x, KernelConfig{-1.0, KernelKind::gaussian}), ConfigError);
}

TEST_CASE("hsic of a constant batch is exactly zero") {
  RngState rng(1);
  Matrix x = random_gaussian(rng, 6, 3);
  Matrix y = constant_rows(6, 2, 1.25);
  CHECK(empirical_hsic(x, y, kGauss5, kGauss5).value == 0.0);
}

TEST_CASE("hsic errors on degenerate or mismatched batches") {
  Matrix one = Matrix::Zero(1, 2);
  CHECK_THROWS_AS(empirical_hsic(one, one, kGauss5, kGauss5), DegenerateBatchError);
  CHECK_THROWS_AS(empirical_hsic(Matrix::Zero(3, 2), Matrix::Zero(4, 2), kGauss5, kGauss5),
                  ShapeError);
}

// For n=2 the estimator collapses to (1-a)(1-b) where a, b are the Gaussian
// off-diagonals; verified here by evaluating both routes.
TEST_CASE("hsic n=2 closed form") {
  RngState rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = random_gaussian(rng, 2, 3);
    Matrix y = random_gaussian(rng, 2, 2);
    const double a = kernel_matrix(x, kGauss5)(0, 1);
    const double b = kernel_matrix(y, kGauss5)(0, 1);
    const double expected = (1.0 - a) * (1.0 - b);
    CHECK(empirical_hsic(x, y, kGauss5, kGauss5).value ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  Matrix x(2, 1);
  x << 0, 1;
  const double h = empirical_hsic(x, x, kGauss5, kGauss5).value;
  const double e = 1.0 - std::exp(-1.0 / 50.0);  // off-diagonal at distance 1, sigma 5
  CHECK(h == doctest::Approx(e * e).epsilon(1e-9));
  CHECK(h == doctest::Approx(3.92093e-4).epsilon(1e-4));
}

TEST_CASE("hsic symmetry, non-negativity, permutation invariance") {
  RngState rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 4 + static_cast<Index>(rng.uniform_index(8));
    Matrix x = random_gaussian(rng, n, 3);
    Matrix y = random_gaussian(rng, n, 2);
    const KernelConfig ky = (trial % 3 == 0) ? KernelConfig{1.0, KernelKind::linear} : kGauss5;

    const double xy = empirical_hsic(x, y, kGauss5, ky).value;
    const double yx = empirical_hsic(y, x, ky, kGauss5).value;
    CHECK(std::abs(xy - yx) < 1e-12);
    CHECK(xy >= -1e-9);

    RngState perm_rng = rng.split(trial);
    std::vector<Index> perm = random_permutation(n, perm_rng);
    Matrix xp(n, x.cols());
    Matrix yp(n, y.cols());
    for (Index i = 0; i < n; ++i) {
      xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
      yp.row(i) = y.row(perm[static_cast<std::size_t>(i)]);
    }
    CHECK(std::abs(empirical_hsic(xp, yp, kGauss5, ky).value - xy) < 1e-12);
  }
}

TEST_CASE("hsic gradient is zero for constant batches") {
  Matrix x = constant_rows(5, 3, 0.4);
  RngState rng(4);
  Matrix y = random_gaussian(rng, 5, 2);
  CHECK(hsic_gradient_wrt_first(x, y, kGauss5, kGauss5).norm() == 0.0);

  Matrix x2 = random_gaussian(rng, 5, 3);
  Matrix y2 = constant_rows(5, 2, -1.0);
  CHECK(hsic_gradient_wrt_first(x2, y2, kGauss5, kGauss5).norm() == 0.0);
}

TEST_CASE("hsic gradient requires a gaussian kernel on the first argument") {
  Matrix x = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(
      hsic_gradient_wrt_first(x, x, KernelConfig{1.0, KernelKind::linear}, kGauss5),
      ConfigError);
}

TEST_CASE("hsic gradient matches finite differences on the spec instance") {
  RngState rng(5);
  Matrix x = random_gaussian(rng, 8, 3);
  Matrix y = one_hot({0, 1, 0, 1, 1, 0, 1, 0}, 2);
  Matrix analytic = hsic_gradient_wrt_first(x, y, kGauss5, kGauss5);
  Matrix numeric = finite_diff(
      [&](const Matrix& xv) { return empirical_hsic(xv, y, kGauss5, kGauss5).value; }, x, 1e-5);
  CHECK(rel_error(analytic, numeric) < 1e-5);
}

TEST_CASE("hsic gradient matches finite differences across sizes") {
  RngState rng(6);
  int checked = 0;
  for (Index n : {4, 8, 16}) {
    for (Index d : {1, 2, 5}) {
      for (int rep = 0; rep < 3; ++rep) {
        Matrix x = random_gaussian(rng, n, d);
        Matrix y = random_gaussian(rng, n, 2);
        Matrix analytic = hsic_gradient_wrt_first(x, y, kGauss5, kGauss5);
        Matrix numeric = finite_diff(
            [&](const Matrix& xv) { return empirical_hsic(xv, y, kGauss5, kGauss5).value; }, x,
            1e-5);
        CHECK(rel_error(analytic, numeric) < 1e-4);
        ++checked;
      }
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("permutation null quantile of a constant y is zero") {
  RngState rng(7);
  Matrix x = random_gaussian(rng, 16, 2);
  Matrix y = constant_rows(16, 1, 3.0);
  for (double q : {0.5, 0.95, 0.99}) {
    CHECK(permutation_null_quantile(x, y, kGauss5, kGauss5, 100, q, RngState(1)) == 0.0);
  }
}

TEST_CASE("permutation null quantile validates its arguments") {
  Matrix x = Matrix::Zero(4, 1);
  CHECK_THROWS_AS(permutation_null_quantile(x, x, kGauss5, kGauss5, 50, 0.95, RngState(0)),
                  ConfigError);
  CHECK_THROWS_AS(permutation_null_quantile(x, x, kGauss5, kGauss5, 100, 1.0, RngState(0)),
                  ConfigError);
}

TEST_CASE("dependent pair exceeds the 0.95 null quantile at n=64") {
  RngState rng(8);
  Matrix x = random_gaussian(rng, 64, 2);
  Matrix y(64, 1);
  for (Index i = 0; i < 64; ++i) y(i, 0) = x(i, 0) + 0.1 * x(i, 1);

  const double observed = empirical_hsic(x, y, kGauss5, kGauss5).value;
  const double null95 =
      permutation_null_quantile(x, y, kGauss5, kGauss5, 200, 0.95, RngState(99));
  CHECK(observed > null95);
}

TEST_CASE("independent pair stays below the 0.99 null quantile") {
  RngState rng(9);
  Matrix x = random_gaussian(rng, 64, 2);
  Matrix y = random_gaussian(rng, 64, 2);
  const double observed = empirical_hsic(x, y, kGauss5, kGauss5).value;
  const double null99 =
      permutation_null_quantile(x, y, kGauss5, kGauss5, 200, 0.99, RngState(100));
  CHECK(observed < null99);
}
