#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sae/knowledge.hpp"
#include "sae/rng.hpp"
#include "sae/synthetic.hpp"

using namespace sae;

namespace {

MatrixXd random_log_rate_db(int L, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd base = synthetic_base_log_rates(Sex::male).head(kScheduleAges);
  MatrixXd M(kScheduleAges, L);
  for (int j = 0; j < L; ++j) {
    const double level = rng.uniform(-0.3, 0.3);
    const double slope = rng.uniform(-0.2, 0.2);
    for (int x = 0; x < kScheduleAges; ++x)
      M(x, j) = base(x) + level + slope * (x / 100.0 - 0.5) + 0.02 * rng.normal();
  }
  return M;
}

}  // namespace

TEST_CASE("regularized inverse matches the plain inverse when well conditioned") {
  MatrixXd A(3, 3);
  A << 4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0;
  MatrixXd inv = regularized_inverse(A);
  CHECK((A * inv - MatrixXd::Identity(3, 3)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("regularized inverse adds the trace ridge on rank deficiency") {
  VectorXd v(3);
  v << 1.0, 2.0, 3.0;
  MatrixXd A = v * v.transpose();  // rank one
  MatrixXd inv = regularized_inverse(A);
  const double eps = 1e-8 * A.trace() / 3.0;
  MatrixXd expected = (A + eps * MatrixXd::Identity(3, 3)).ldlt().solve(MatrixXd::Identity(3, 3));
  CHECK((inv - expected).lpNorm<Eigen::Infinity>() < 1e-6 * expected.lpNorm<Eigen::Infinity>());
  CHECK(inv.allFinite());
  CHECK_THROWS(regularized_inverse(-MatrixXd::Identity(2, 2)));
}

TEST_CASE("difference calibrations store the residual machinery") {
  MatrixXd M = random_log_rate_db(12, 31);
  for (DsplineKind kind : {DsplineKind::D1, DsplineKind::D2}) {
    DsplineCalibration cal = build_dspline_calibration(M, kind, false);
    const int omega = kScheduleAges;
    const int expect_rows = kind == DsplineKind::D1 ? omega - 1 : omega - 2;
    CHECK(cal.D.rows() == expect_rows);
    // unsmoothed target is the mean residual pattern
    CHECK((cal.c - cal.D * M.rowwise().mean()).lpNorm<Eigen::Infinity>() < 1e-12);
    // V matches the brute-force covariance of residuals about the mean
    MatrixXd R = cal.D * M;
    VectorXd rbar = R.rowwise().mean();
    MatrixXd V = MatrixXd::Zero(expect_rows, expect_rows);
    for (int j = 0; j < M.cols(); ++j) {
      VectorXd e = R.col(j) - rbar;
      V += e * e.transpose();
    }
    V /= static_cast<double>(M.cols() - 1);
    CHECK((V - cal.V).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("the Lee-Carter projection is idempotent and kills the deviation") {
  MatrixXd M = random_log_rate_db(15, 77);
  DsplineCalibration cal = build_dspline_calibration(M, DsplineKind::DLC);
  CHECK(cal.D.rows() == kScheduleAges);
  CHECK((cal.D * cal.D - cal.D).norm() < 1e-10);          // projection
  CHECK((cal.D * cal.lc_deviation).norm() < 1e-10);       // annihilates b
  CHECK((cal.D - cal.D.transpose()).norm() < 1e-10);      // orthogonal projection
  // the smoothed target stays inside the projection's range
  CHECK((cal.D * cal.c - cal.c).lpNorm<Eigen::Infinity>() < 1e-10);
  // baseline is the database row mean
  CHECK((cal.lc_baseline - M.rowwise().mean()).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("pc basis columns are orthonormal with the sign convention") {
  MatrixXd schedules = random_log_rate_db(30, 5).transpose();  // F x G layout
  PCBasis basis = build_pc_basis(schedules);
  CHECK(basis.V.rows() == kScheduleAges);
  CHECK(basis.V.cols() == 3);
  CHECK((basis.V.transpose() * basis.V - MatrixXd::Identity(3, 3)).lpNorm<Eigen::Infinity>() <
        1e-10);
  CHECK(basis.V(0, 0) < 0.0);
  CHECK(basis.singular_values(0) >= basis.singular_values(1));
  CHECK(basis.singular_values(1) >= basis.singular_values(2));
}

TEST_CASE("excluded populations cannot be requested as standards") {
  SyntheticConfig cfg;
  cfg.codes = {"SYNREF", "SYNB", "SYNC", "SYND"};
  cfg.year_from = 1995;
  cfg.year_to = 2005;
  SourceLibrary lib = build_synthetic_library(cfg);

  DkRecipe recipe;
  recipe.method = MethodFamily::topals;
  recipe.standard_code = "SYNB";
  recipe.standard_year = 2000;
  recipe.excluded_codes = {"SYNB"};
  CHECK_THROWS(assemble_dk(recipe, lib, SmootherConfig::defaults()));

  // database scans silently skip excluded sources instead of failing
  DkRecipe db;
  db.method = MethodFamily::dsplines;
  db.standard_code.clear();
  db.year_from = 1995;
  db.year_to = 2005;
  db.year_step = 5;
  db.estimator = DsplineKind::D1;
  db.excluded_codes = {"SYNREF"};
  auto dk = assemble_dk(db, lib, SmootherConfig::defaults());
  CHECK(std::holds_alternative<DsplineCalibration>(dk));
}

TEST_CASE("knowledge artifacts survive a save/load round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dk_roundtrip_test";
  fs::remove_all(dir);

  StandardSchedule std_in;
  std_in.log_rates = synthetic_base_log_rates(Sex::male).head(kScheduleAges);
  std_in.provenance = "unit test standard";
  save_knowledge(std_in, (dir / "standard").string());
  auto std_back = load_knowledge((dir / "standard").string());
  REQUIRE(std::holds_alternative<StandardSchedule>(std_back));
  CHECK((std::get<StandardSchedule>(std_back).log_rates - std_in.log_rates)
            .lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(std::get<StandardSchedule>(std_back).provenance == "unit test standard");

  MatrixXd M = random_log_rate_db(10, 3);
  for (DsplineKind kind : {DsplineKind::D1, DsplineKind::D2, DsplineKind::DLC}) {
    DsplineCalibration cal = build_dspline_calibration(M, kind);
    const std::string sub = (dir / to_string(kind)).string();
    save_knowledge(cal, sub);
    auto back = load_knowledge(sub);
    REQUIRE(std::holds_alternative<DsplineCalibration>(back));
    const auto& cb = std::get<DsplineCalibration>(back);
    CHECK(cb.kind == kind);
    CHECK((cb.D - cal.D).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((cb.c - cal.c).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((cb.V - cal.V).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((cb.V_inv - cal.V_inv).lpNorm<Eigen::Infinity>() < 1e-12);
    if (kind == DsplineKind::DLC) {
      CHECK((cb.lc_baseline - cal.lc_baseline).lpNorm<Eigen::Infinity>() < 1e-12);
      CHECK((cb.lc_deviation - cal.lc_deviation).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }

  PCBasis pc = build_pc_basis(random_log_rate_db(30, 5).transpose());
  save_knowledge(pc, (dir / "pc").string());
  auto pc_back = load_knowledge((dir / "pc").string());
  REQUIRE(std::holds_alternative<PCBasis>(pc_back));
  CHECK((std::get<PCBasis>(pc_back).V - pc.V).lpNorm<Eigen::Infinity>() < 1e-12);

  fs::remove_all(dir);
}
