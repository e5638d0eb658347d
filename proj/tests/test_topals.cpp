#include <doctest.h>

#include <cmath>

#include "sae/lifetable.hpp"
#include "sae/rng.hpp"
#include "sae/synthetic.hpp"
#include "sae/topals.hpp"

using namespace sae;

namespace {

StandardSchedule test_standard() {
  StandardSchedule s;
  s.log_rates = synthetic_base_log_rates(Sex::male).head(kScheduleAges);
  s.provenance = "test";
  return s;
}

// penalized Poisson log-likelihood, written independently of the fitter
double objective(const VectorXd& alpha, const VectorXd& d, const VectorXd& n,
                 const StandardSchedule& std, const TopalsBasis& basis) {
  VectorXd eta = std.log_rates + basis.B * alpha;
  double ll = 0.0;
  for (int x = 0; x < kScheduleAges; ++x) ll += d(x) * eta(x) - n(x) * std::exp(eta(x));
  return ll - 0.5 * basis.kappa * alpha.dot(basis.P * alpha);
}

VectorXd analytic_gradient(const VectorXd& alpha, const VectorXd& d, const VectorXd& n,
                           const StandardSchedule& std, const TopalsBasis& basis) {
  VectorXd eta = std.log_rates + basis.B * alpha;
  VectorXd mu = (eta.array().exp() * n.array()).matrix();
  return basis.B.transpose() * (d - mu) - basis.kappa * (basis.P * alpha);
}

void random_problem(std::uint64_t seed, VectorXd& d, VectorXd& n) {
  Rng rng(seed);
  VectorXd truth = synthetic_base_log_rates(Sex::male).head(kScheduleAges);
  d.resize(kScheduleAges);
  n.resize(kScheduleAges);
  for (int x = 0; x < kScheduleAges; ++x) {
    n(x) = rng.uniform(200.0, 2000.0);
    const double m = std::exp(truth(x) + rng.uniform(-0.5, 0.5));
    d(x) = static_cast<double>(rng.poisson(m * n(x)));
  }
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
  TopalsBasis basis = TopalsBasis::make();
  StandardSchedule std = test_standard();
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    VectorXd d, n;
    random_problem(seed, d, n);
    Rng rng(seed + 1000);
    VectorXd alpha(basis.B.cols());
    for (int i = 0; i < alpha.size(); ++i) alpha(i) = 0.3 * rng.normal();
    VectorXd g = analytic_gradient(alpha, d, n, std, basis);
    const double h = 1e-6;
    // relative to the gradient scale: central differences on an objective of
    // magnitude ~1e5 cannot resolve components much below |f| * eps / h
    const double scale = g.lpNorm<Eigen::Infinity>() + 1.0;
    for (int i = 0; i < alpha.size(); ++i) {
      VectorXd ap = alpha, am = alpha;
      ap(i) += h;
      am(i) -= h;
      const double fd = (objective(ap, d, n, std, basis) - objective(am, d, n, std, basis)) /
                        (2.0 * h);
      CHECK(std::abs(fd - g(i)) < 1e-6 * scale);
    }
  }
}

TEST_CASE("single-year fit converges to a stationary maximum") {
  TopalsBasis basis = TopalsBasis::make();
  StandardSchedule std = test_standard();
  VectorXd d, n;
  random_problem(42, d, n);
  TopalsFit fit = fit_topals_single(d, n, std, basis);
  CHECK(fit.converged);
  CHECK(fit.iterations < 100);
  VectorXd g = analytic_gradient(fit.alpha, d, n, std, basis);
  // stationarity relative to the count scale of the objective
  CHECK(g.lpNorm<Eigen::Infinity>() < 1e-7 * (1.0 + d.sum()));
  // perturbations in every basis direction only lower the objective
  const double q = objective(fit.alpha, d, n, std, basis);
  Rng rng(4242);
  for (int k = 0; k < 20; ++k) {
    VectorXd dir(fit.alpha.size());
    for (int i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
    CHECK(objective(fit.alpha + 0.05 * dir, d, n, std, basis) <= q + 1e-12);
  }
  // interval structure
  CHECK((fit.upper - fit.lower).minCoeff() > 0.0);
  CHECK((fit.log_rates - (std.log_rates + basis.B * fit.alpha)).lpNorm<Eigen::Infinity>() <
        1e-12);
}

TEST_CASE("grouped fit agrees with the single-year fit on aggregated data") {
  TopalsBasis basis = TopalsBasis::make();
  StandardSchedule std = test_standard();
  VectorXd d, n;
  random_problem(7, d, n);
  auto scheme = canonical_grouping();
  auto [dg, ng] = aggregate_counts(d, n, scheme);
  TopalsFit fit = fit_topals_grouped(dg, ng, std, basis, scheme);
  CHECK(fit.converged);
  CHECK(fit.log_rates.size() == kScheduleAges);
  // grouped output still resembles the underlying truth
  TopalsFit single = fit_topals_single(d, n, std, basis);
  CHECK((fit.log_rates - single.log_rates).lpNorm<Eigen::Infinity>() < 0.5);
}

TEST_CASE("uncertainty shrinks when exposure grows") {
  TopalsBasis basis = TopalsBasis::make();
  StandardSchedule std = test_standard();
  VectorXd truth = std.log_rates;
  VectorXd n_small = VectorXd::Constant(kScheduleAges, 500.0);
  VectorXd n_big = VectorXd::Constant(kScheduleAges, 500000.0);
  VectorXd d_small = (truth.array().exp() * n_small.array()).matrix();
  VectorXd d_big = (truth.array().exp() * n_big.array()).matrix();
  TopalsFit small = fit_topals_single(d_small, n_small, std, basis);
  TopalsFit big = fit_topals_single(d_big, n_big, std, basis);
  CHECK(small.se.mean() > big.se.mean());
}

TEST_CASE("input validation") {
  TopalsBasis basis = TopalsBasis::make();
  StandardSchedule std = test_standard();
  VectorXd d = VectorXd::Constant(kScheduleAges, 1.0);
  VectorXd n = VectorXd::Constant(kScheduleAges, 100.0);
  VectorXd bad_n = n;
  bad_n(10) = 0.0;
  CHECK_THROWS(fit_topals_single(d, bad_n, std, basis));
  VectorXd bad_d = d;
  bad_d(3) = -1.0;
  CHECK_THROWS(fit_topals_single(bad_d, n, std, basis));
  CHECK_THROWS(fit_topals_single(d.head(50), n.head(50), std, basis));
}
