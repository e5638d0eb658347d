#pragma once

#include "sae/knowledge.hpp"
#include "sae/lifetable.hpp"
#include "sae/types.hpp"

namespace sae {

/// Linear B-spline offset basis with a first-difference penalty on the
/// spline coefficients.
struct TopalsBasis {
  std::vector<double> knot_ages = {0, 1, 10, 20, 40, 70, 99};
  double kappa = 1.0;  // penalty weight
  MatrixXd B;          // 100 x S
  MatrixXd P;          // penalty D1' D1, S x S

  static TopalsBasis make(std::vector<double> knot_ages = {0, 1, 10, 20, 40, 70, 99},
                          double kappa = 1.0);
};

struct TopalsFit {
  VectorXd alpha;
  VectorXd log_rates;  // 100
  VectorXd se;
  VectorXd lower;      // 95% pointwise
  VectorXd upper;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // accepted steps only
};

/// Penalized Poisson ML for log m = std + B alpha on single-year counts.
TopalsFit fit_topals_single(const VectorXd& deaths, const VectorXd& exposure,
                            const StandardSchedule& standard, const TopalsBasis& basis);

/// Grouped likelihood D_g ~ Poisson(m_g N_g) with m_g the unweighted mean of
/// exp(std + B alpha) within each group; output stays single-year.
TopalsFit fit_topals_grouped(const VectorXd& deaths_g, const VectorXd& exposure_g,
                             const StandardSchedule& standard, const TopalsBasis& basis,
                             const std::vector<AgeGroup>& scheme);

/// CSV rows: region, year, age, point, se, lower, upper, converged, iterations.
void write_fit_csv(std::ostream& out, const TopalsFit& fit, int region, int year,
                   const std::string& method_label);

}  // namespace sae
