#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace sae {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Measure { deaths, exposure };
enum class Sex { female, male, total };

std::string to_string(Measure m);
std::string to_string(Sex s);
Sex sex_from_string(const std::string& s);

/// Age-by-year matrix of deaths or exposures for one population and sex.
/// Ages are contiguous single years; only the last age may be an open
/// interval. Cells carrying the HMD missing marker are flagged, never imputed.
struct AgeYearTable {
  std::vector<int> ages;
  std::vector<int> years;
  MatrixXd values;  // |ages| x |years|
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> missing;
  bool open_ended = false;  // final age is an open interval ("110+")
  Measure measure = Measure::deaths;
  Sex sex = Sex::total;
  std::string population_code;

  int age_index(int age) const;
  int year_index(int year) const;
  double value(int age, int year) const { return values(age_index(age), year_index(year)); }
  bool any_missing() const { return missing.size() > 0 && missing.any(); }
  void validate() const;
};

/// Log mortality rates on the same grid as the tables they came from.
/// Zero-death cells have no finite log rate and are flagged instead.
struct RateMatrix {
  std::vector<int> ages;
  std::vector<int> years;
  MatrixXd log_rates;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> zero_deaths;
  std::string population_code;
  Sex sex = Sex::total;

  int age_index(int age) const;
  int year_index(int year) const;
  /// Single-year column for ages 0..99; throws if the slice is absent or
  /// contains flagged cells.
  VectorXd year_slice(int year, int max_age = 99) const;
};

/// A log mortality schedule on single-year ages 0..99.
struct MortalitySchedule {
  VectorXd log_rates;  // length 100
  std::string provenance;
};

inline constexpr int kScheduleAges = 100;  // ages 0..99

}  // namespace sae
