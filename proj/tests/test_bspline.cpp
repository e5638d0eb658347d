#include <doctest.h>

#include "sae/bspline.hpp"

using namespace sae;

TEST_CASE("linear basis is a partition of unity with hat interpolation") {
  std::vector<double> knots = {0, 1, 10, 20, 40, 70, 99};
  MatrixXd B = linear_bspline_basis(knots, 100);
  REQUIRE(B.rows() == 100);
  REQUIRE(B.cols() == 7);
  for (int x = 0; x < 100; ++x) {
    CHECK(B.row(x).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(B.row(x).minCoeff() >= 0.0);
  }
  // at each knot age exactly one basis function is active
  for (size_t k = 0; k < knots.size(); ++k) {
    const int age = static_cast<int>(knots[k]);
    CHECK(B(age, static_cast<int>(k)) == doctest::Approx(1.0));
    CHECK(B.row(age).sum() - B(age, static_cast<int>(k)) == doctest::Approx(0.0));
  }
  // linear interpolation midway between knots 20 and 40
  CHECK(B(30, 3) == doctest::Approx(0.5));
  CHECK(B(30, 4) == doctest::Approx(0.5));
}

TEST_CASE("cubic basis has 23 columns at 5-year spacing and sums to one") {
  MatrixXd S = cubic_bspline_basis(100, 5.0);
  REQUIRE(S.rows() == 100);
  REQUIRE(S.cols() == 23);
  for (int x = 0; x < 100; ++x) {
    CHECK(S.row(x).sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(S.row(x).minCoeff() >= 0.0);
  }
}

TEST_CASE("generic bspline basis reproduces polynomials up to its degree") {
  VectorXd x(60);
  for (int i = 0; i < 60; ++i) x(i) = i;
  MatrixXd B = bspline_basis(x, 0.0, 59.0, 10, 3);
  REQUIRE(B.rows() == 60);
  REQUIRE(B.cols() == 13);
  // least-squares projection of a cubic onto the basis is exact
  VectorXd y(60);
  for (int i = 0; i < 60; ++i) y(i) = 1.0 + 0.5 * x(i) - 0.01 * x(i) * x(i) + 2e-4 * x(i) * x(i) * x(i);
  VectorXd theta = (B.transpose() * B).ldlt().solve(B.transpose() * y);
  CHECK((B * theta - y).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("difference matrices annihilate their null spaces") {
  const int n = 23;
  MatrixXd D1 = difference_matrix(1, n);
  MatrixXd D2 = difference_matrix(2, n);
  REQUIRE(D1.rows() == n - 1);
  REQUIRE(D2.rows() == n - 2);

  VectorXd ones = VectorXd::Ones(n);
  CHECK((D1 * ones).lpNorm<Eigen::Infinity>() == 0.0);

  VectorXd lin(n);
  for (int i = 0; i < n; ++i) lin(i) = 3.0 - 0.7 * i;
  CHECK((D2 * lin).lpNorm<Eigen::Infinity>() < 1e-12);

  // composition: D2 equals first differences applied twice
  MatrixXd composed = difference_matrix(1, n - 1) * D1;
  CHECK((composed - D2).lpNorm<Eigen::Infinity>() == 0.0);
}
