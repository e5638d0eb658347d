#include <doctest.h>

#include <cmath>

#include "sae/hmd.hpp"
#include "sae/synthetic.hpp"

using namespace sae;

TEST_CASE("default inventory has the reference first and 25 codes") {
  auto codes = SyntheticConfig::default_codes();
  CHECK(codes.size() == 25);
  CHECK(codes.front() == "SYNREF");
  CHECK(codes.back() == "SYN25");
}

TEST_CASE("library construction is deterministic and complete") {
  SyntheticConfig cfg;
  cfg.codes = {"SYNREF", "SYNB"};
  cfg.year_from = 1998;
  cfg.year_to = 2002;
  SourceLibrary a = build_synthetic_library(cfg);
  SourceLibrary b = build_synthetic_library(cfg);
  CHECK(a.sources.size() == 4);  // 2 codes x 2 sexes
  for (size_t i = 0; i < a.sources.size(); ++i) {
    CHECK(a.sources[i].population_code == b.sources[i].population_code);
    CHECK(a.sources[i].deaths.values == b.sources[i].deaths.values);
    CHECK(a.sources[i].exposure.values == b.sources[i].exposure.values);
  }
  const Source& ref = a.find("SYNREF", Sex::male);
  CHECK(ref.deaths.ages.front() == 0);
  CHECK(ref.deaths.ages.back() == 110);
  CHECK(ref.deaths.open_ended);
  CHECK(ref.deaths.years == std::vector<int>({1998, 1999, 2000, 2001, 2002}));
  CHECK_THROWS(a.find("NOPE", Sex::male));
}

TEST_CASE("exposure columns sum to the configured total") {
  SyntheticConfig cfg;
  cfg.codes = {"SYNREF"};
  cfg.year_from = 2000;
  cfg.year_to = 2001;
  cfg.total_exposure = 123456.0;
  SourceLibrary lib = build_synthetic_library(cfg);
  const Source& src = lib.find("SYNREF", Sex::female);
  for (int t = 0; t < 2; ++t)
    CHECK(src.exposure.values.col(t).sum() == doctest::Approx(123456.0).epsilon(1e-9));
}

TEST_CASE("deaths are the expected counts at the underlying rates") {
  SyntheticConfig cfg;
  cfg.codes = {"SYNREF", "SYNC"};
  cfg.year_from = 2000;
  cfg.year_to = 2000;
  SourceLibrary lib = build_synthetic_library(cfg);
  const Source& src = lib.find("SYNC", Sex::male);
  RateMatrix r = to_rates(src.deaths, src.exposure);
  // implied rates are positive, finite, and have a plausible magnitude
  CHECK(r.log_rates.allFinite());
  CHECK(r.log_rates.minCoeff() > -12.0);
  CHECK(r.log_rates.maxCoeff() < 1.0);
  // old-age mortality exceeds young-adult mortality
  CHECK(r.log_rates(100, 0) > r.log_rates(35, 0));
}

TEST_CASE("the reference schedule is close to the parametric baseline") {
  SyntheticConfig cfg;
  cfg.codes = {"SYNREF"};
  cfg.year_from = 1985;
  cfg.year_to = 1985;  // no secular decline at the pivot year
  SourceLibrary lib = build_synthetic_library(cfg);
  const Source& src = lib.find("SYNREF", Sex::male);
  RateMatrix r = to_rates(src.deaths, src.exposure);
  VectorXd base = synthetic_base_log_rates(Sex::male);
  for (int x = 0; x <= 110; ++x)
    CHECK(std::abs(r.log_rates(x, 0) - base(x)) < 0.1);  // noise only
}

TEST_CASE("female mortality sits below male mortality") {
  SyntheticConfig cfg;
  cfg.codes = {"SYNREF"};
  cfg.year_from = 2000;
  cfg.year_to = 2000;
  SourceLibrary lib = build_synthetic_library(cfg);
  RateMatrix m = to_rates(lib.find("SYNREF", Sex::male).deaths,
                          lib.find("SYNREF", Sex::male).exposure);
  RateMatrix f = to_rates(lib.find("SYNREF", Sex::female).deaths,
                          lib.find("SYNREF", Sex::female).exposure);
  int below = 0;
  for (int x = 0; x <= 110; ++x)
    if (f.log_rates(x, 0) < m.log_rates(x, 0)) ++below;
  CHECK(below > 95);  // noise can flip a few ages
}
