#pragma once

#include "sae/types.hpp"

namespace sae {

struct AgeGroup {
  std::string label;
  int lower;
  int upper;  // inclusive
  int width() const { return upper - lower + 1; }
};

/// <1, 1-4, 5-9, ..., 95-99: the 21-group scheme used throughout.
std::vector<AgeGroup> canonical_grouping();

/// Throws unless the groups partition [0, 99] without gaps or overlaps.
void validate_grouping(const std::vector<AgeGroup>& scheme);

/// Survivorship l_x for x = 0..100 with radix l_0 = 1.
struct Survivorship {
  VectorXd l;  // length 101
};

/// l_{x+1} = l_x * exp(-m_x), piecewise-constant hazard within single years.
Survivorship rates_to_survivorship(const VectorXd& m);

/// m_x = -log(l_{x+1} / l_x). Exact inverse of rates_to_survivorship.
VectorXd survivorship_to_rates(const Survivorship& s);

/// Partial life expectancy between exact ages 0 and 100, no open interval.
/// L_x = l_x * (1 - exp(-m_x)) / m_x, with the m -> 0 limit L_x = l_x.
double partial_e0(const VectorXd& m);

/// Unweighted mean of single-year rates within each group.
VectorXd group_rates(const VectorXd& m, const std::vector<AgeGroup>& scheme);

/// Sums of deaths and exposures within each group; totals are conserved.
std::pair<VectorXd, VectorXd> aggregate_counts(const VectorXd& d, const VectorXd& n,
                                               const std::vector<AgeGroup>& scheme);

}  // namespace sae
