#include <doctest.h>

#include <cmath>

#include "sae/rng.hpp"
#include "sae/svd_model.hpp"

using namespace sae;

namespace {

std::vector<AgeGroup> quarter_scheme() {
  return {{"0-24", 0, 24}, {"25-49", 25, 49}, {"50-74", 50, 74}, {"75-99", 75, 99}};
}

GroupedPanel tiny_panel(int A = 2, int T = 3) {
  GroupedPanel panel;
  panel.scheme = quarter_scheme();
  for (int t = 0; t < T; ++t) panel.years.push_back(2000 + t);
  const int G = panel.n_groups();
  for (int a = 0; a < A; ++a) {
    MatrixXd d(G, T), n(G, T);
    for (int g = 0; g < G; ++g)
      for (int t = 0; t < T; ++t) {
        n(g, t) = 800.0 + 100.0 * g + 10.0 * a + t;
        d(g, t) = static_cast<double>(3 + 2 * g + a + t);
      }
    panel.deaths.push_back(d);
    panel.exposure.push_back(n);
  }
  return panel;
}

PCBasis tiny_basis(int G, std::uint64_t seed = 17) {
  Rng rng(seed);
  MatrixXd raw(G, 3);
  for (int g = 0; g < G; ++g)
    for (int p = 0; p < 3; ++p) raw(g, p) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(raw);
  PCBasis basis;
  basis.V = qr.householderQ() * MatrixXd::Identity(G, 3);
  if (basis.V(0, 0) > 0.0) basis.V.col(0) = -basis.V.col(0);
  basis.singular_values = VectorXd::LinSpaced(3, 3.0, 1.0);
  return basis;
}

SvdModelState zero_state(const GroupedPanel& panel) {
  const int A = panel.n_regions(), G = panel.n_groups(), T = panel.n_years();
  SvdModelState st;
  st.beta.assign(3, MatrixXd::Zero(A, T));
  st.mu = MatrixXd::Zero(3, T);
  st.sigma_beta = MatrixXd::Ones(3, T);
  st.sigma_mu = Eigen::Vector3d::Ones();
  st.u.assign(A, MatrixXd::Zero(G, T));
  st.sigma_g = VectorXd::Constant(G, 0.25);
  return st;
}

}  // namespace

TEST_CASE("likelihood at the zero state is the closed-form Poisson sum") {
  GroupedPanel panel = tiny_panel();
  PCBasis basis = tiny_basis(panel.n_groups());
  SvdModelState st = zero_state(panel);
  // eta = 0 for every cell, so rate = 1 and mean = N
  double expected = 0.0;
  for (int a = 0; a < panel.n_regions(); ++a)
    for (int g = 0; g < panel.n_groups(); ++g)
      for (int t = 0; t < panel.n_years(); ++t) {
        const double d = panel.deaths[a](g, t);
        const double n = panel.exposure[a](g, t);
        expected += d * std::log(n) - n - std::lgamma(d + 1.0);
      }
  CHECK(svd_log_likelihood(st, panel, basis) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("likelihood is invariant under a compensated basis sign flip") {
  GroupedPanel panel = tiny_panel();
  PCBasis basis = tiny_basis(panel.n_groups());
  SvdModelState st = zero_state(panel);
  Rng rng(5);
  for (int p = 0; p < 3; ++p)
    for (int a = 0; a < panel.n_regions(); ++a)
      for (int t = 0; t < panel.n_years(); ++t) st.beta[p](a, t) = 0.3 * rng.normal();
  const double before = svd_log_likelihood(st, panel, basis);
  PCBasis flipped = basis;
  flipped.V.col(1) = -flipped.V.col(1);
  SvdModelState st2 = st;
  st2.beta[1] = -st2.beta[1];
  CHECK(svd_log_likelihood(st2, panel, flipped) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("pooling prior matches the hand-computed normal density") {
  GroupedPanel panel = tiny_panel();
  SvdModelState st = zero_state(panel);
  const int A = panel.n_regions(), T = panel.n_years();
  st.sigma_beta.setConstant(2.0);
  st.beta[0](0, 0) = 1.0;  // the only nonzero residual
  // every (p, a, t) contributes -log 2; one cell adds -0.5 * (1/4)
  const double expected = -3.0 * A * T * std::log(2.0) - 0.5 * 0.25;
  CHECK(svd_log_pooling_prior(st) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("time prior treats linear trends as drift-free") {
  GroupedPanel panel = tiny_panel();
  SvdModelState st = zero_state(panel);
  const int T = panel.n_years();
  // all-zero means: first two years diffuse, later years exact
  double expected = -6.0 * std::log(10.0);
  CHECK(svd_log_time_prior(st) == doctest::Approx(expected).epsilon(1e-12));
  // a straight line has zero second differences, so only the diffuse
  // initialization terms change
  const double c = 0.7;
  for (int t = 0; t < T; ++t) st.mu(1, t) = c * t;
  expected += -0.5 * (c * 1.0) * (c * 1.0) / 100.0;  // t = 1 term; t = 0 is zero
  CHECK(svd_log_time_prior(st) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("hyperpriors match term-by-term hand sums") {
  GroupedPanel panel = tiny_panel();
  SvdModelState st = zero_state(panel);
  const int A = panel.n_regions(), G = panel.n_groups(), T = panel.n_years();
  // sigma_mu = 1: each LogNormal(-1.5, 0.5) term is -0.5 * 1.5^2 / 0.25
  double expected = 3.0 * (-0.5 * 2.25 / 0.25);
  // sigma_beta = 1 everywhere: HalfNormal(0,1) kernel
  expected += -0.5 * 3.0 * T;
  // sigma_g = 0.25: HalfNormal(0, 0.25) kernel
  expected += -0.5 * G * 0.0625 / 0.0625;
  // u = 0: only the normalization -log sigma_g per cell
  expected += -std::log(0.25) * A * G * T;
  CHECK(svd_log_hyperpriors(st) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(log_posterior(st, panel, tiny_basis(G)) ==
        doctest::Approx(svd_log_likelihood(st, panel, tiny_basis(G)) +
                        svd_log_pooling_prior(st) + svd_log_time_prior(st) +
                        svd_log_hyperpriors(st))
            .epsilon(1e-12));
}

TEST_CASE("state and panel validation reject malformed inputs") {
  GroupedPanel panel = tiny_panel();
  CHECK_NOTHROW(panel.validate());

  GroupedPanel neg = panel;
  neg.deaths[0](1, 1) = -2.0;
  CHECK_THROWS(neg.validate());

  GroupedPanel zero_exp = panel;
  zero_exp.exposure[1](0, 0) = 0.0;
  CHECK_THROWS(zero_exp.validate());

  GroupedPanel short_t = panel;
  short_t.years = {2000, 2001};
  for (auto& m : short_t.deaths) m.conservativeResize(Eigen::NoChange, 2);
  for (auto& m : short_t.exposure) m.conservativeResize(Eigen::NoChange, 2);
  CHECK_THROWS(short_t.validate());

  SvdModelState st = zero_state(panel);
  SvdModelState bad = st;
  bad.sigma_g(0) = 0.0;
  CHECK_THROWS(bad.validate(panel.n_regions(), panel.n_groups(), panel.n_years()));
  bad = st;
  bad.beta.pop_back();
  CHECK_THROWS(bad.validate(panel.n_regions(), panel.n_groups(), panel.n_years()));
  bad = st;
  bad.mu.conservativeResize(3, panel.n_years() + 1);
  CHECK_THROWS(bad.validate(panel.n_regions(), panel.n_groups(), panel.n_years()));
}

TEST_CASE("short sampler runs are reproducible and seed-sensitive") {
  GroupedPanel panel = tiny_panel(3, 4);
  PCBasis basis = tiny_basis(panel.n_groups());
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 400;
  cfg.warmup = 200;
  cfg.max_recorded = 100;
  cfg.seed = 314;

  PosteriorSummary s1 = sample_posterior(panel, basis, cfg);
  PosteriorSummary s2 = sample_posterior(panel, basis, cfg);
  REQUIRE(s1.median.size() == static_cast<size_t>(panel.n_regions()));
  for (int a = 0; a < panel.n_regions(); ++a) {
    CHECK(s1.median[a] == s2.median[a]);
    CHECK(s1.lower[a] == s2.lower[a]);
    CHECK(s1.upper[a] == s2.upper[a]);
  }
  CHECK(s1.rhat == s2.rhat);

  SamplerConfig other = cfg;
  other.seed = 315;
  PosteriorSummary s3 = sample_posterior(panel, basis, other);
  bool any_diff = false;
  for (int a = 0; a < panel.n_regions(); ++a)
    if (s1.median[a] != s3.median[a]) any_diff = true;
  CHECK(any_diff);

  // structural bookkeeping
  CHECK(s1.manifest.seed == 314);
  CHECK(s1.manifest.chains == 2);
  CHECK(s1.manifest.recorded_per_chain <= cfg.max_recorded);
  CHECK(s1.monitored.size() > 0);
  CHECK(static_cast<int>(s1.monitored.size()) == s1.rhat.size());
  for (int a = 0; a < panel.n_regions(); ++a) {
    CHECK(s1.median[a].allFinite());
    CHECK(((s1.upper[a] - s1.lower[a]).array() >= 0.0).all());
    CHECK(((s1.median[a] - s1.lower[a]).array() >= -1e-12).all());
    CHECK(((s1.upper[a] - s1.median[a]).array() >= -1e-12).all());
  }
  // quantile accessor agrees with the stored medians
  CHECK(s1.cell_quantile(0, 0, 0, 0.5) == doctest::Approx(s1.median[0](0, 0)));

  // diagnostics report has internally consistent flags
  DiagnosticsReport rep = run_checks(s1, cfg);
  CHECK(rep.passed == (rep.rhat_ok && rep.bulk_ess_ok && rep.tail_ess_ok && rep.sampler_ok));
  CHECK(rep.worst_rhat >= 1.0 - 1e-9);
}

TEST_CASE("sampler rejects a basis that does not match the panel") {
  GroupedPanel panel = tiny_panel();
  PCBasis wrong = tiny_basis(panel.n_groups() + 1);
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 10;
  cfg.warmup = 5;
  CHECK_THROWS(sample_posterior(panel, wrong, cfg));
}
