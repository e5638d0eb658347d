#include <doctest.h>

#include <cmath>

#include "sae/pspline.hpp"
#include "sae/rng.hpp"
#include "sae/synthetic.hpp"

using namespace sae;

TEST_CASE("value smoother with huge lambda collapses to a straight line") {
  Rng rng(2024);
  VectorXd y(100);
  for (int i = 0; i < 100; ++i) y(i) = -5.0 + 0.03 * i + 0.3 * rng.normal();
  VectorXd s = smooth_values(y, 1e12);
  // second differences of the smooth vanish: order-2 penalty null space
  for (int i = 2; i < 100; ++i)
    CHECK(std::abs(s(i) - 2.0 * s(i - 1) + s(i - 2)) < 1e-4);
  // and the line tracks the data trend
  CHECK(std::abs(s.mean() - y.mean()) < 0.2);
}

TEST_CASE("value smoother reproduces inputs already in the basis") {
  VectorXd y(100);
  for (int i = 0; i < 100; ++i) y(i) = 1.5 - 0.02 * i;  // linear: penalty-free
  VectorXd s = smooth_values(y, 10.0);
  CHECK((s - y).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("poisson smoother recovers a smooth schedule from rich data") {
  VectorXd truth = synthetic_base_log_rates(Sex::male).head(kScheduleAges);
  VectorXd n = VectorXd::Constant(kScheduleAges, 1e7);
  VectorXd d = (truth.array().exp() * n.array()).matrix();  // expected counts
  SmoothFitInfo info;
  MortalitySchedule sched = smooth_schedule(d, n, SmootherConfig::defaults(), &info);
  REQUIRE(sched.log_rates.size() == kScheduleAges);
  CHECK(info.converged);
  CHECK(info.lambda > 0.0);
  // the 5-year-knot basis rounds the sharp childhood kink, so the tight
  // bound applies from adolescence on and a loose one everywhere
  CHECK((sched.log_rates - truth).cwiseAbs().mean() < 0.03);
  CHECK((sched.log_rates.tail(85) - truth.tail(85)).lpNorm<Eigen::Infinity>() < 0.05);
  CHECK((sched.log_rates - truth).lpNorm<Eigen::Infinity>() < 0.25);
}

TEST_CASE("poisson smoother respects a fixed lambda") {
  VectorXd truth = synthetic_base_log_rates(Sex::female).head(kScheduleAges);
  VectorXd n = VectorXd::Constant(kScheduleAges, 1e6);
  VectorXd d = (truth.array().exp() * n.array()).matrix();
  SmootherConfig cfg = SmootherConfig::defaults();
  cfg.selection = LambdaSelection::fixed_lambda;
  cfg.fixed_lambda = 123.0;
  SmoothFitInfo info;
  smooth_schedule(d, n, cfg, &info);
  CHECK(info.lambda == 123.0);
  CHECK(info.converged);
}
