#pragma once

#include "sae/knowledge.hpp"
#include "sae/lifetable.hpp"
#include "sae/types.hpp"

namespace sae {

enum class InputKind { single_year, grouped };

/// Cubic B-spline basis for the D-spline fits (5-year knots, K = 23).
struct DsplineBasis {
  MatrixXd S;  // 100 x K
  static DsplineBasis make(double knot_spacing = 5.0);
};

struct DsplineFit {
  DsplineKind kind = DsplineKind::D1;
  VectorXd theta;
  VectorXd log_rates;  // 100
  VectorXd se;
  VectorXd lower;
  VectorXd upper;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Penalized Poisson ML: Q(theta) = logL - 0.5 * eps' V^-1 eps with
/// eps = D S theta - c. Grouped input uses the same group-mean rate mapping
/// as TOPALS; output is always a single-year schedule.
DsplineFit fit_dspline(const VectorXd& deaths, const VectorXd& exposure,
                       const DsplineCalibration& calib, const DsplineBasis& basis,
                       InputKind input_kind,
                       const std::vector<AgeGroup>& scheme = canonical_grouping());

/// Fan-out over the three estimators; per-fit failures surface as
/// converged = false, never as exceptions.
std::vector<DsplineFit> compare_estimators(const VectorXd& deaths, const VectorXd& exposure,
                                           const std::vector<DsplineCalibration>& calibs,
                                           const DsplineBasis& basis, InputKind input_kind);

}  // namespace sae
