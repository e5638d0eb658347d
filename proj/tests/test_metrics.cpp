#include <doctest.h>

#include <cmath>

#include "sae/metrics.hpp"
#include "sae/rng.hpp"

using namespace sae;

TEST_CASE("rmse decomposes into bias and empirical SE") {
  Rng rng(555);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform(0.0, 48.0));
    const double truth = rng.uniform(-4.0, 4.0);
    VectorXd est(n);
    for (int i = 0; i < n; ++i) est(i) = truth + rng.normal() * rng.uniform(0.1, 2.0);
    const double b = bias(est, truth);
    const double se = emp_se(est);
    const double r = rmse(est, truth);
    const double lhs = r * r;
    const double rhs = b * b + (static_cast<double>(n - 1) / n) * se * se;
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("coverage is a proportion and counts closed intervals") {
  VectorXd lo(4), hi(4);
  lo << 0.0, 0.0, 2.0, -1.0;
  hi << 1.0, 0.5, 3.0, 1.0;
  CHECK(coverage(lo, hi, 0.75) == doctest::Approx(0.5));
  CHECK(coverage(lo, hi, 1.0) == doctest::Approx(0.5));  // endpoints included
  CHECK(coverage(lo, hi, 10.0) == doctest::Approx(0.0));
  Rng rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    VectorXd l(5), u(5);
    for (int i = 0; i < 5; ++i) {
      l(i) = rng.normal();
      u(i) = l(i) + rng.uniform(0.0, 2.0);
    }
    const double c = coverage(l, u, rng.normal());
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("width averages interval lengths") {
  VectorXd lo(3), hi(3);
  lo << 0.0, -2.0, 1.0;
  hi << 1.0, 0.0, 1.5;
  CHECK(width(lo, hi) == doctest::Approx((1.0 + 2.0 + 0.5) / 3.0));
}

TEST_CASE("type-7 quantile matches hand-computed values") {
  VectorXd v(5);
  v << 10.0, 20.0, 30.0, 40.0, 50.0;
  CHECK(quantile(v, 0.0) == doctest::Approx(10.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(50.0));
  CHECK(quantile(v, 0.5) == doctest::Approx(30.0));
  CHECK(quantile(v, 0.25) == doctest::Approx(20.0));
  CHECK(quantile(v, 0.1) == doctest::Approx(14.0));  // 1 + 0.4 between 10 and 20
  VectorXd shuffled(5);
  shuffled << 50.0, 10.0, 40.0, 20.0, 30.0;  // order must not matter
  CHECK(quantile(shuffled, 0.5) == doctest::Approx(30.0));
}

TEST_CASE("e0 summary carries the five numbers and the truth") {
  VectorXd e0(7);
  e0 << 70.0, 71.0, 72.0, 73.0, 74.0, 75.0, 76.0;
  BoxSummary s = summarize_e0(e0, 72.5);
  CHECK(s.n == 7);
  CHECK(s.min == doctest::Approx(70.0));
  CHECK(s.max == doctest::Approx(76.0));
  CHECK(s.median == doctest::Approx(73.0));
  CHECK(s.q1 == doctest::Approx(71.5));
  CHECK(s.q3 == doctest::Approx(74.5));
  CHECK(s.truth == doctest::Approx(72.5));
  CHECK(s.iqr() == doctest::Approx(3.0));
}
