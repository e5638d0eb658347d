#include "sae/bspline.hpp"

#include <algorithm>
#include <cmath>

namespace sae {

MatrixXd linear_bspline_basis(const std::vector<double>& knots, int n_ages) {
  if (knots.size() < 2) throw std::invalid_argument("need at least two knots");
  if (!std::is_sorted(knots.begin(), knots.end()))
    throw std::invalid_argument("knots must be increasing");
  const int S = static_cast<int>(knots.size());
  MatrixXd B = MatrixXd::Zero(n_ages, S);
  for (int x = 0; x < n_ages; ++x) {
    const double xv = static_cast<double>(x);
    for (int j = 0; j < S; ++j) {
      double v = 0.0;
      if (j == 0 && xv <= knots[0]) {
        v = 1.0;
      } else if (j == S - 1 && xv >= knots[S - 1]) {
        v = 1.0;
      } else if (j > 0 && xv >= knots[j - 1] && xv <= knots[j]) {
        v = (xv - knots[j - 1]) / (knots[j] - knots[j - 1]);
      } else if (j + 1 < S && xv >= knots[j] && xv <= knots[j + 1]) {
        v = (knots[j + 1] - xv) / (knots[j + 1] - knots[j]);
      }
      if (v != 0.0) B(x, j) = v;
    }
  }
  return B;
}

MatrixXd bspline_basis(const VectorXd& x, double lo, double hi, int n_segments, int degree) {
  if (n_segments < 1 || hi <= lo) throw std::invalid_argument("bad B-spline domain");
  const double h = (hi - lo) / n_segments;
  // uniform knots padded by `degree` on both sides (Eilers-Marx convention)
  const int n_knots = n_segments + 2 * degree + 1;
  std::vector<double> t(n_knots);
  for (int i = 0; i < n_knots; ++i) t[i] = lo + (i - degree) * h;
  const int K = n_segments + degree;
  MatrixXd B = MatrixXd::Zero(x.size(), K);
  std::vector<double> N(n_knots, 0.0);
  for (Eigen::Index r = 0; r < x.size(); ++r) {
    const double xv = x(r);
    if (xv < lo - 1e-12 || xv > hi + 1e-12)
      throw std::invalid_argument("evaluation point outside basis domain");
    std::fill(N.begin(), N.end(), 0.0);
    for (int j = 0; j + 1 < n_knots; ++j)
      N[j] = (xv >= t[j] && xv < t[j + 1]) ? 1.0 : 0.0;
    if (xv >= t[n_knots - 1]) N[n_knots - 2] = 1.0;  // right boundary
    for (int d = 1; d <= degree; ++d) {
      for (int j = 0; j + d + 1 < n_knots; ++j) {
        double a = (xv - t[j]) / (t[j + d] - t[j]) * N[j];
        double b = (t[j + d + 1] - xv) / (t[j + d + 1] - t[j + 1]) * N[j + 1];
        N[j] = a + b;
      }
    }
    for (int j = 0; j < K; ++j) B(r, j) = N[j];
  }
  return B;
}

MatrixXd cubic_bspline_basis(int n_ages, double knot_spacing) {
  if (knot_spacing <= 0.0) throw std::invalid_argument("knot spacing must be positive");
  const double hi = static_cast<double>(n_ages - 1);
  const int n_segments = std::max(1, static_cast<int>(std::ceil(hi / knot_spacing)));
  VectorXd x(n_ages);
  for (int i = 0; i < n_ages; ++i) x(i) = static_cast<double>(i);
  return bspline_basis(x, 0.0, hi, n_segments, 3);
}

MatrixXd difference_matrix(int order, int n) {
  if (order < 1 || n <= order) throw std::invalid_argument("invalid difference matrix shape");
  MatrixXd D = MatrixXd::Zero(n - 1, n);
  for (int i = 0; i < n - 1; ++i) {
    D(i, i) = -1.0;
    D(i, i + 1) = 1.0;
  }
  for (int k = 1; k < order; ++k) {
    const int m = n - k;
    MatrixXd D1 = MatrixXd::Zero(m - 1, m);
    for (int i = 0; i < m - 1; ++i) {
      D1(i, i) = -1.0;
      D1(i, i + 1) = 1.0;
    }
    D = D1 * D;
  }
  return D;
}

}  // namespace sae
