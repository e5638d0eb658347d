#pragma once

#include <iosfwd>

#include "sae/types.hpp"

namespace sae {

/// Parse an HMD 1x1 table (Deaths or Exposure to risk).
///
/// Layout: free header lines, then a column header starting with "Year",
/// then whitespace-separated rows Year Age Female Male Total. The age token
/// "110+" marks the open interval and "." a missing value.
AgeYearTable parse_hmd_table(std::istream& in, Measure measure, Sex sex,
                             const std::string& population_code = "");

/// Write the three sex columns back out in the HMD 1x1 layout.
/// The tables must share one age/year grid.
void write_hmd_table(std::ostream& out, const AgeYearTable& female,
                     const AgeYearTable& male, const AgeYearTable& total);

/// Internal long-format CSV: population_code, sex, year, age, value.
void write_table_csv(std::ostream& out, const AgeYearTable& table);

/// log_rates[a, t] = log(deaths / exposure); zero-death cells flagged.
/// Grids must match exactly and exposures must be strictly positive.
RateMatrix to_rates(const AgeYearTable& deaths, const AgeYearTable& exposure);

}  // namespace sae
