#pragma once

#include "sae/lifetable.hpp"
#include "sae/rng.hpp"
#include "sae/types.hpp"

namespace sae {

/// Brass relational-model parameters for the 20 artificial regions,
/// fixed over time.
struct BrassParams {
  VectorXd a;  // intercepts, one per region
  VectorXd b;  // slopes, one per region
  int n_regions() const { return static_cast<int>(a.size()); }
};

/// The published 20-region parameter set. Regions 2, 8, and 9 are the
/// high / low / medium mortality settings and carry 3-decimal values.
BrassParams default_brass_params();

/// Fresh draws a_i ~ U(-0.75, 0.75), b_i ~ U(0.7, 1.3).
BrassParams draw_brass_params(int n_regions, std::uint64_t seed);

inline constexpr int kHighRegion = 1;    // 0-based index of region 2
inline constexpr int kLowRegion = 7;     // region 8
inline constexpr int kMediumRegion = 8;  // region 9

/// Half-logits of 1 - l_x for ages 1..100: Y_x = 0.5 * log((1 - l_x) / l_x).
VectorXd brass_logit(const Survivorship& s);

/// Elementwise a + b * Y.
VectorXd apply_brass(const VectorXd& y_ref, double a, double b);

/// Invert the half-logit back to survivorship, pinning l_0 = 1.
Survivorship logit_to_survivorship(const VectorXd& y);

/// Scale a reference exposure age profile to the scenario total.
VectorXd reweight_exposure(double total, const VectorXd& reference_exposure);

/// Deterministic truth for the study: reference and regional single-year log
/// rates over the year window plus the exposure age shares per year.
/// Exposure totals enter later; grouped truths depend only on the shares.
struct TrueWorld {
  std::vector<int> years;
  MatrixXd ref_log_rates;                   // 100 x T
  std::vector<MatrixXd> region_log_rates;   // per region, 100 x T
  MatrixXd exposure_share;                  // 100 x T, columns sum to 1
  BrassParams params;

  int n_regions() const { return static_cast<int>(region_log_rates.size()); }
  int n_years() const { return static_cast<int>(years.size()); }
  int year_index(int year) const;

  /// N_x^t for one year at the given scenario total.
  VectorXd single_year_exposure(double total, int year) const;
  /// N_g^t for one year.
  VectorXd grouped_exposure(double total, int year) const;
  /// Exposure-weighted grouped truth m_g^{it} (independent of the total).
  VectorXd grouped_truth_rates(int region, int year) const;
};

/// Builds the world: smooth reference rates per year, Brass transform per
/// region, exposure shares from the reference exposures truncated to 0..99.
TrueWorld build_true_world(const RateMatrix& reference_rates, const AgeYearTable& reference_exposure,
                           const std::vector<int>& years, const BrassParams& params);

/// Poisson death counts for one scenario (one exposure total, one replicate).
struct SimulatedDataset {
  std::uint64_t seed = 0;
  double total_exposure = 0.0;
  // [region](age or group, year)
  std::vector<MatrixXd> deaths_single;   // 100 x T
  std::vector<MatrixXd> deaths_grouped;  // 21 x T
};

/// Independent Poisson draws per (age, region, year); each (region, year)
/// vector is redrawn in full until it carries at least two deaths.
SimulatedDataset simulate_single_year(const TrueWorld& world, double total_exposure,
                                      std::uint64_t seed);

/// As simulate_single_year but over the grouped truths (deterministic
/// single-year deaths, aggregated, then Poisson on the grouped scale).
SimulatedDataset simulate_grouped(const TrueWorld& world, double total_exposure,
                                  std::uint64_t seed);

/// CSV export: replicate, region, year, age (or group label), deaths,
/// exposure, true_log_rate.
void write_dataset_csv(std::ostream& out, const TrueWorld& world, const SimulatedDataset& data,
                       int replicate, bool grouped);

}  // namespace sae
