#pragma once

#include "sae/types.hpp"

namespace sae {

double bias(const VectorXd& estimates, double truth);
double emp_se(const VectorXd& estimates);
double rmse(const VectorXd& estimates, double truth);
/// Fraction of closed intervals [lower, upper] containing the truth.
double coverage(const VectorXd& lowers, const VectorXd& uppers, double truth);
/// Mean |upper - lower|; bounds are already on the log-rate scale.
double width(const VectorXd& lowers, const VectorXd& uppers);

/// Five-number summary plus the truth, for the e0 boxplots.
struct BoxSummary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double truth = 0;
  int n = 0;
  double iqr() const { return q3 - q1; }
};

BoxSummary summarize_e0(const VectorXd& e0_estimates, double truth);

/// Type-7 (linear interpolation) sample quantile of a copy of v.
double quantile(VectorXd v, double p);

}  // namespace sae
