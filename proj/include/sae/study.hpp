#pragma once

#include <cstdint>

#include "sae/brass.hpp"
#include "sae/dspline.hpp"
#include "sae/knowledge.hpp"
#include "sae/metrics.hpp"
#include "sae/svd_model.hpp"
#include "sae/synthetic.hpp"
#include "sae/topals.hpp"

namespace sae {

/// One estimator in the study grid: the family, its estimator variant,
/// which knowledge artifact it gets, and which simulated input it consumes.
struct MethodSpec {
  MethodFamily family = MethodFamily::topals;
  DsplineKind estimator = DsplineKind::D1;  // D-splines only
  DkKind dk = DkKind::dk1;
  InputKind input = InputKind::single_year;  // TOPALS/D-splines only

  std::string name() const;
};

struct StudyConfig {
  std::vector<double> exposures = {1000.0, 50000.0, 1000000.0};
  int n_sim = 200;
  std::vector<MethodSpec> methods;  // empty -> desk-scale default set
  int target_year = 2000;
  std::vector<int> regions = {kLowRegion, kMediumRegion, kHighRegion};
  std::vector<int> years;  // empty -> 1995..2005
  std::uint64_t master_seed = 20250101ULL;
  std::string output_dir = "study_out";
  int threads = 1;
  SmootherConfig smoother = SmootherConfig::defaults();
  bool sampler_per_exposure = true;  // SVD iterations follow the exposure size
  SamplerConfig sampler;             // used when sampler_per_exposure is false

  /// TOPALS + D1/D2/DLC on dk1, single-year inputs.
  static std::vector<MethodSpec> default_methods();
  void finalize();  // fills defaulted members, validates
};

/// Knowledge recipes for every (family, dk) pairing against the synthetic
/// library; the reference population is excluded from calibration databases.
DkRecipe study_recipe(MethodFamily family, DkKind dk, DsplineKind estimator,
                      const std::string& reference_code = "SYNREF");

struct MethodCell {
  MethodSpec spec;
  int n_included = 0;
  int n_excluded = 0;
  std::vector<std::string> target_labels;  // single-year ages or group labels
  VectorXd truth;                          // log rates per target
  VectorXd bias_v, emp_se_v, rmse_v, cov_v, wid_v;
  VectorXd e0;  // included replicates
  BoxSummary e0_box;
};

struct RegionCell {
  int region = 0;
  double truth_e0 = 0.0;
  std::vector<MethodCell> methods;
  VectorXd raw_e0;
  BoxSummary raw_e0_box;
};

struct ExposureCell {
  double exposure = 0.0;
  std::vector<RegionCell> regions;
};

struct StudyResult {
  StudyConfig config;
  TrueWorld world;
  std::vector<ExposureCell> cells;
};

StudyResult run_study(const StudyConfig& config, const SourceLibrary& library);

/// metrics.csv (long format), e0.csv, and study_manifest.json.
void write_study_outputs(const StudyResult& result);
/// Figure-analogue files: performance-vs-age panels and e0 boxplot panels.
void emit_plot_data(const StudyResult& result, const std::string& directory);

}  // namespace sae
