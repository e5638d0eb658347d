#pragma once

#include "sae/types.hpp"

namespace sae {

/// Linear B-spline (hat function) basis on the given knot ages, evaluated at
/// integer ages 0..n_ages-1. One column per knot; rows sum to 1 between the
/// boundary knots.
MatrixXd linear_bspline_basis(const std::vector<double>& knots, int n_ages);

/// Cubic B-spline basis on [0, n_ages-1] with uniform knots roughly every
/// knot_spacing years, evaluated at integer ages. For n_ages = 100 and
/// spacing 5 this gives K = 23 columns.
MatrixXd cubic_bspline_basis(int n_ages, double knot_spacing);

/// Uniform B-spline basis of the given degree over [lo, hi] split into
/// n_segments equal knot intervals, padded by `degree` knots on each side.
/// Returns an |x| x (n_segments + degree) matrix; rows sum to 1 on [lo, hi].
MatrixXd bspline_basis(const VectorXd& x, double lo, double hi, int n_segments, int degree);

/// Forward difference matrix of the given order: (n - order) x n.
MatrixXd difference_matrix(int order, int n);

}  // namespace sae
