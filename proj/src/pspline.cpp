#include "sae/pspline.hpp"

#include <cmath>

#include "sae/bspline.hpp"

namespace sae {

SmootherConfig SmootherConfig::defaults() {
  SmootherConfig cfg;
  for (double lg = -2.0; lg <= 8.0; lg += 1.0) cfg.lambda_grid.push_back(std::pow(10.0, lg));
  return cfg;
}

namespace {

struct NewtonResult {
  VectorXd theta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Penalized Poisson Newton with step-halving; eta = S theta is the log rate.
NewtonResult fit_poisson_pspline(const VectorXd& d, const VectorXd& n, const MatrixXd& S,
                                 const MatrixXd& P, double lambda, int max_iter, double tol,
                                 const VectorXd& theta0) {
  auto objective = [&](const VectorXd& th) {
    VectorXd eta = S * th;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) ll += d(i) * eta(i) - n(i) * std::exp(eta(i));
    return ll - 0.5 * lambda * th.dot(P * th);
  };
  NewtonResult res;
  res.theta = theta0;
  double q = objective(res.theta);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    VectorXd eta = S * res.theta;
    VectorXd mu = (eta.array().exp() * n.array()).matrix();
    VectorXd grad = S.transpose() * (d - mu) - lambda * (P * res.theta);
    if (grad.lpNorm<Eigen::Infinity>() < tol) {
      res.converged = true;
      res.iterations = it;
      break;
    }
    MatrixXd H = S.transpose() * mu.asDiagonal() * S + lambda * P;
    VectorXd step = H.ldlt().solve(grad);
    // the Newton decrement bounds the remaining objective gain; below noise
    // (or noise-level negative) means the optimum is reached even when counts
    // are too large for the absolute gradient tolerance
    if (std::abs(grad.dot(step)) < 1e-10) {
      res.converged = true;
      res.iterations = it;
      break;
    }
    double t = 1.0;
    VectorXd cand = res.theta + step;
    double qc = objective(cand);
    int halvings = 0;
    while (!(qc >= q) && halvings < 40) {
      t *= 0.5;
      cand = res.theta + t * step;
      qc = objective(cand);
      ++halvings;
    }
    if (!(qc >= q)) break;  // no ascent direction left
    if (qc == q) {
      // the objective cannot improve at floating-point resolution
      res.converged = true;
      break;
    }
    res.theta = cand;
    q = qc;
  }
  res.objective = q;
  if (!res.converged) {
    VectorXd eta = S * res.theta;
    VectorXd mu = (eta.array().exp() * n.array()).matrix();
    VectorXd grad = S.transpose() * (d - mu) - lambda * (P * res.theta);
    res.converged = grad.lpNorm<Eigen::Infinity>() < tol;
  }
  return res;
}

}  // namespace

MortalitySchedule smooth_schedule(const VectorXd& d, const VectorXd& n,
                                  const SmootherConfig& cfg, SmoothFitInfo* info) {
  if (d.size() != n.size()) throw std::invalid_argument("deaths/exposure length mismatch");
  if ((n.array() <= 0.0).any()) throw std::invalid_argument("exposures must be strictly positive");
  if ((d.array() < 0.0).any()) throw std::invalid_argument("negative death count");
  if (d.sum() <= 0.0) throw std::invalid_argument("all-zero deaths input");

  const int omega = static_cast<int>(d.size());
  const double hi = static_cast<double>(omega - 1);
  const int n_segments = std::max(1, static_cast<int>(std::ceil(hi / cfg.basis_knot_spacing)));
  VectorXd xs(omega);
  for (int i = 0; i < omega; ++i) xs(i) = static_cast<double>(i);
  MatrixXd S = bspline_basis(xs, 0.0, hi, n_segments, cfg.spline_degree);
  const int K = static_cast<int>(S.cols());
  MatrixXd D = difference_matrix(cfg.penalty_order, K);
  MatrixXd P = D.transpose() * D;

  // crude starting values from the empirical log rates
  VectorXd y(omega);
  for (int i = 0; i < omega; ++i) y(i) = std::log((d(i) + 0.5) / n(i));
  VectorXd theta0 =
      (S.transpose() * S + 1e-6 * MatrixXd::Identity(K, K)).ldlt().solve(S.transpose() * y);

  std::vector<double> lambdas =
      cfg.selection == LambdaSelection::fixed_lambda ? std::vector<double>{cfg.fixed_lambda}
                                                     : cfg.lambda_grid;
  if (lambdas.empty()) throw std::invalid_argument("empty lambda grid");

  double best_bic = std::numeric_limits<double>::infinity();
  NewtonResult best;
  double best_lambda = lambdas.front();
  for (double lambda : lambdas) {
    if (lambda <= 0.0) throw std::invalid_argument("lambda must be strictly positive");
    NewtonResult r =
        fit_poisson_pspline(d, n, S, P, lambda, cfg.max_iterations, cfg.gradient_tol, theta0);
    VectorXd eta = S * r.theta;
    VectorXd mu = (eta.array().exp() * n.array()).matrix();
    double dev = 0.0;
    for (int i = 0; i < omega; ++i) {
      if (d(i) > 0.0) dev += d(i) * std::log(d(i) / mu(i));
      dev -= d(i) - mu(i);
    }
    dev *= 2.0;
    MatrixXd info_mat = S.transpose() * mu.asDiagonal() * S;
    double edf = (info_mat + lambda * P).ldlt().solve(info_mat).trace();
    double bic = dev + std::log(static_cast<double>(omega)) * edf;
    if (bic < best_bic) {
      best_bic = bic;
      best = r;
      best_lambda = lambda;
    }
    theta0 = r.theta;  // warm start along the grid
  }
  if (!best.converged)
    throw std::runtime_error("P-spline smoother did not converge");

  if (info) {
    info->lambda = best_lambda;
    info->bic = best_bic;
    info->iterations = best.iterations;
    info->converged = best.converged;
    info->coefficients = best.theta;
  }
  MortalitySchedule out;
  out.log_rates = S * best.theta;
  return out;
}

VectorXd smooth_values(const VectorXd& y, double lambda, double knot_spacing, int penalty_order) {
  const int n = static_cast<int>(y.size());
  MatrixXd S = cubic_bspline_basis(n, knot_spacing);
  const int K = static_cast<int>(S.cols());
  MatrixXd D = difference_matrix(penalty_order, K);
  MatrixXd A = S.transpose() * S + lambda * D.transpose() * D;
  VectorXd theta = A.ldlt().solve(S.transpose() * y);
  return S * theta;
}

}  // namespace sae
