#pragma once

#include "sae/types.hpp"

namespace sae {

/// Rank-normalized split-Rhat over a draws matrix (rows = iterations,
/// columns = chains). Returns 1.0 for constant sequences.
double split_rhat(const MatrixXd& draws);

/// Bulk effective sample size: ESS of the rank-normalized split chains,
/// using Geyer's initial monotone sequence estimator.
double bulk_ess(const MatrixXd& draws);

/// Tail effective sample size: the smaller ESS of the 5% and 95% quantile
/// indicator sequences.
double tail_ess(const MatrixXd& draws);

/// Inverse standard normal CDF (Acklam's rational approximation).
double inverse_normal_cdf(double p);

}  // namespace sae
