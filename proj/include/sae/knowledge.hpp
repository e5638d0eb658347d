#pragma once

#include <variant>

#include "sae/pspline.hpp"
#include "sae/types.hpp"

namespace sae {

/// TOPALS standard: one representative log mortality schedule.
struct StandardSchedule {
  VectorXd log_rates;  // ages 0..99
  std::string provenance;
};

enum class DsplineKind { D1, D2, DLC };
std::string to_string(DsplineKind k);
DsplineKind dspline_kind_from_string(const std::string& s);

/// Precalibrated D-spline penalty: residual map D, target c, empirical
/// covariance V with its regularized inverse.
struct DsplineCalibration {
  DsplineKind kind = DsplineKind::D1;
  MatrixXd D;      // (omega-1) x omega, (omega-2) x omega, or omega x omega
  VectorXd c;
  MatrixXd V;
  MatrixXd V_inv;
  VectorXd lc_baseline;   // DLC only: a
  VectorXd lc_deviation;  // DLC only: b
  std::string provenance;
};

/// First three right-singular vectors of the grouped log-rate matrix.
struct PCBasis {
  MatrixXd V;  // G x 3, orthonormal columns
  Eigen::Vector3d singular_values;
  std::string provenance;
};

using DemographicKnowledge = std::variant<StandardSchedule, DsplineCalibration, PCBasis>;

/// Ridge-regularized inverse: adds eps*I with eps = 1e-8 * trace(V)/dim when
/// the smallest eigenvalue is below 1e-10 times the largest.
MatrixXd regularized_inverse(const MatrixXd& V);

/// Smoothed log schedule for one year, truncated to ages 0..99.
StandardSchedule build_standard(const AgeYearTable& deaths, const AgeYearTable& exposure, int year,
                                const SmootherConfig& smoother);

/// Calibration from a database M (omega x L of log rates). The target c is
/// smoothed over its index with a fixed moderate penalty.
DsplineCalibration build_dspline_calibration(const MatrixXd& M, DsplineKind kind,
                                             bool smooth_target = true);

/// PC basis from F schedules over G age groups; V_1 sign-fixed so its age-0
/// entry is negative.
PCBasis build_pc_basis(const MatrixXd& schedules);

enum class MethodFamily { topals, dsplines, svd };
enum class DkKind { dk1, dk2, dk3 };
std::string to_string(DkKind k);

/// One mortality data source with its provenance.
struct Source {
  std::string population_code;
  Sex sex = Sex::male;
  AgeYearTable deaths;
  AgeYearTable exposure;
};

/// The configured schedule inventory the knowledge artifacts are built from.
struct SourceLibrary {
  std::vector<Source> sources;
  const Source& find(const std::string& code, Sex sex) const;
};

struct DkRecipe {
  MethodFamily method = MethodFamily::topals;
  DkKind kind = DkKind::dk1;
  // TOPALS: one (code, sex, year). D-splines/SVD: codes + year range + sex.
  std::string standard_code;
  Sex sex = Sex::male;
  int standard_year = 2000;
  int year_from = 1970;
  int year_to = 2019;
  int year_step = 10;                     // D-spline database sampling interval
  DsplineKind estimator = DsplineKind::D1;
  std::vector<std::string> excluded_codes = {"DEUTNP", "DEUTW", "DEUTE"};
};

/// Build the method-appropriate artifact from the library, enforcing the
/// source exclusions. Throws if an excluded population would enter the build.
DemographicKnowledge assemble_dk(const DkRecipe& recipe, const SourceLibrary& library,
                                 const SmootherConfig& smoother);

/// Versioned CSV bundle with a manifest; fits stay reproducible without the
/// original sources.
void save_knowledge(const DemographicKnowledge& dk, const std::string& directory);
DemographicKnowledge load_knowledge(const std::string& directory);

}  // namespace sae
