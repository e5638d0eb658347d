#pragma once

#include <cstdint>

#include "sae/knowledge.hpp"
#include "sae/types.hpp"

namespace sae {

/// Deterministic synthetic national populations used as the data backbone:
/// a reference country ("SYNREF") plus companion countries, both sexes, with
/// country/sex/period variation rich enough to calibrate the estimators.
struct SyntheticConfig {
  // empty -> default inventory of 25 populations (reference "SYNREF" first)
  std::vector<std::string> codes;
  int year_from = 1900;
  int year_to = 2019;
  double total_exposure = 500000.0;
  // per-age-year log-rate jitter; keeps calibration covariances full rank,
  // like the sampling noise in real national rate series
  double noise_sd = 0.02;
  std::uint64_t seed = 911003ULL;

  static std::vector<std::string> default_codes();
};

/// Parametric baseline log schedule (infant decline + young-adult hump +
/// senescent increase) on ages 0..110.
VectorXd synthetic_base_log_rates(Sex sex);

/// Full library of deaths/exposure tables in HMD layout semantics
/// (ages 0..110+, expected deaths at the synthetic true rates).
SourceLibrary build_synthetic_library(const SyntheticConfig& cfg = SyntheticConfig());

}  // namespace sae
