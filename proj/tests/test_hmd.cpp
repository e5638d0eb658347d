#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sae/hmd.hpp"

using namespace sae;

namespace {

AgeYearTable small_table(Measure measure, Sex sex, double scale) {
  AgeYearTable t;
  t.ages = {0, 1, 2};
  t.years = {2000, 2001};
  t.values.resize(3, 2);
  t.values << 1.5 * scale, 2.0 * scale, 0.0, 3.25 * scale, 4.0 * scale, 5.5 * scale;
  t.missing.setZero(3, 2);
  t.open_ended = true;
  t.measure = measure;
  t.sex = sex;
  t.population_code = "TST";
  t.validate();
  return t;
}

}  // namespace

TEST_CASE("parsing a hand-written HMD block") {
  std::istringstream in(
      "Testland, Deaths (period 1x1), Last modified: 01 Jan 2020\n"
      "\n"
      "  Year          Age             Female            Male           Total\n"
      "  1999            0             10.25            12.75           23.00\n"
      "  1999            1              1.00             2.00            3.00\n"
      "  1999           2+              0.50                .            0.50\n"
      "  2000            0              9.00            11.00           20.00\n"
      "  2000            1              2.00             1.00            3.00\n"
      "  2000           2+              0.00             1.00            1.00\n");
  AgeYearTable t = parse_hmd_table(in, Measure::deaths, Sex::male, "TST");
  CHECK(t.ages == std::vector<int>{0, 1, 2});
  CHECK(t.years == std::vector<int>{1999, 2000});
  CHECK(t.open_ended);
  CHECK(t.value(0, 1999) == doctest::Approx(12.75));
  CHECK(t.value(1, 2000) == doctest::Approx(1.0));
  CHECK(t.missing(t.age_index(2), t.year_index(1999)) == 1);  // "." marker
  CHECK(t.any_missing());

  std::istringstream in2(in.str());
  AgeYearTable f = parse_hmd_table(in2, Measure::deaths, Sex::female, "TST");
  CHECK(f.value(2, 1999) == doctest::Approx(0.5));
  CHECK_FALSE(f.any_missing());

  // rows out of age order / with gaps are rejected
  std::istringstream gap(
      "X\n  Year Age Female Male Total\n"
      "  1999 0 1 1 2\n  1999 2 1 1 2\n");
  CHECK_THROWS(parse_hmd_table(gap, Measure::deaths, Sex::male, "TST"));
}

TEST_CASE("write and reparse an HMD table round trips") {
  AgeYearTable female = small_table(Measure::deaths, Sex::female, 1.0);
  AgeYearTable male = small_table(Measure::deaths, Sex::male, 2.0);
  AgeYearTable total = small_table(Measure::deaths, Sex::total, 3.0);
  std::ostringstream out;
  write_hmd_table(out, female, male, total);
  std::istringstream in(out.str());
  AgeYearTable back = parse_hmd_table(in, Measure::deaths, Sex::male, "TST");
  CHECK(back.ages == male.ages);
  CHECK(back.years == male.years);
  CHECK((back.values - male.values).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("rates are log(deaths over exposure) with zero-death flags") {
  AgeYearTable d = small_table(Measure::deaths, Sex::male, 1.0);
  AgeYearTable n = small_table(Measure::exposure, Sex::male, 1000.0);
  n.values.setConstant(1500.0);  // all-positive exposure
  RateMatrix r = to_rates(d, n);
  CHECK(r.log_rates(0, 0) == doctest::Approx(std::log(1.5 / 1500.0)));
  CHECK(r.zero_deaths(1, 0) == 1);  // the zero-death cell is flagged, not used
  CHECK(r.zero_deaths(0, 0) == 0);

  // zero exposure is an error, not a flag
  AgeYearTable n_zero = n;
  n_zero.values(2, 1) = 0.0;
  CHECK_THROWS(to_rates(d, n_zero));

  // grids must match
  AgeYearTable n2 = n;
  n2.years = {2000, 2002};
  CHECK_THROWS(to_rates(d, n2));
}

TEST_CASE("table validation catches inconsistent grids") {
  AgeYearTable t = small_table(Measure::deaths, Sex::male, 1.0);
  t.values.resize(2, 2);
  CHECK_THROWS(t.validate());
  t = small_table(Measure::deaths, Sex::male, 1.0);
  t.ages = {0, 1, 3};  // not contiguous
  CHECK_THROWS(t.validate());
  t = small_table(Measure::deaths, Sex::male, 1.0);
  t.values(0, 0) = -1.0;
  CHECK_THROWS(t.validate());
}

TEST_CASE("long-format csv export has one row per cell") {
  AgeYearTable t = small_table(Measure::deaths, Sex::male, 1.0);
  std::ostringstream out;
  write_table_csv(out, t);
  std::istringstream check(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(check, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + 3 * 2);  // header + cells
}
