#pragma once

#include "sae/types.hpp"

namespace sae {

enum class LambdaSelection { BIC, fixed_lambda };

struct SmootherConfig {
  double basis_knot_spacing = 5.0;
  int spline_degree = 3;
  int penalty_order = 2;
  std::vector<double> lambda_grid;  // default: log-spaced 1e-2 .. 1e8
  LambdaSelection selection = LambdaSelection::BIC;
  double fixed_lambda = 10.0;
  int max_iterations = 50;
  double gradient_tol = 1e-8;

  static SmootherConfig defaults();
};

struct SmoothFitInfo {
  double lambda = 0.0;
  double bic = 0.0;
  int iterations = 0;
  bool converged = false;
  VectorXd coefficients;
};

/// Poisson P-spline smoother over ages 0..99: maximizes the Poisson
/// log-likelihood minus (lambda/2)*||D2 theta||^2 over cubic B-spline
/// coefficients; lambda picked by BIC over the grid unless fixed.
MortalitySchedule smooth_schedule(const VectorXd& deaths, const VectorXd& exposure,
                                  const SmootherConfig& cfg, SmoothFitInfo* info = nullptr);

/// Gaussian analogue for smoothing plain value sequences (penalized least
/// squares with the same basis and penalty).
VectorXd smooth_values(const VectorXd& y, double lambda, double knot_spacing = 5.0,
                       int penalty_order = 2);

}  // namespace sae
