#include "sae/dspline.hpp"

#include <cmath>

#include "sae/bspline.hpp"

namespace sae {

namespace {
constexpr double kZ95 = 1.959964;
constexpr int kMaxIter = 100;
constexpr double kGradTol = 1e-8;
}  // namespace

DsplineBasis DsplineBasis::make(double knot_spacing) {
  DsplineBasis b;
  b.S = cubic_bspline_basis(kScheduleAges, knot_spacing);
  return b;
}

namespace {

struct Problem {
  const VectorXd& d;
  const VectorXd& n;
  const DsplineCalibration& calib;
  const MatrixXd& S;
  const MatrixXd AS;          // calib.D * S
  const MatrixXd penalty_mat;  // (AS)' V^-1 (AS)
  InputKind kind;
  const std::vector<AgeGroup>& scheme;

  Problem(const VectorXd& d, const VectorXd& n, const DsplineCalibration& calib,
          const MatrixXd& S, InputKind kind, const std::vector<AgeGroup>& scheme)
      : d(d), n(n), calib(calib), S(S), AS(calib.D * S),
        penalty_mat(AS.transpose() * calib.V_inv * AS), kind(kind), scheme(scheme) {}

  double loglik(const VectorXd& eta) const {
    double ll = 0.0;
    if (kind == InputKind::single_year) {
      for (int x = 0; x < kScheduleAges; ++x) ll += d(x) * eta(x) - n(x) * std::exp(eta(x));
    } else {
      VectorXd e = eta.array().exp();
      for (size_t g = 0; g < scheme.size(); ++g) {
        const double mg = e.segment(scheme[g].lower, scheme[g].width()).mean();
        const int gi = static_cast<int>(g);
        ll += d(gi) * std::log(mg) - n(gi) * mg;
      }
    }
    return ll;
  }

  double value(const VectorXd& theta) const {
    VectorXd eta = S * theta;
    VectorXd eps = AS * theta - calib.c;
    return loglik(eta) - 0.5 * eps.dot(calib.V_inv * eps);
  }

  void derivatives(const VectorXd& theta, VectorXd& grad, MatrixXd& neg_hess) const {
    const int K = static_cast<int>(S.cols());
    VectorXd eta = S * theta;
    VectorXd eps = AS * theta - calib.c;
    grad = -AS.transpose() * (calib.V_inv * eps);
    neg_hess = penalty_mat;
    if (kind == InputKind::single_year) {
      VectorXd mu = (eta.array().exp() * n.array()).matrix();
      grad += S.transpose() * (d - mu);
      neg_hess += S.transpose() * mu.asDiagonal() * S;
    } else {
      VectorXd e = eta.array().exp();
      for (size_t g = 0; g < scheme.size(); ++g) {
        const int gi = static_cast<int>(g);
        const int lo = scheme[g].lower;
        const int w = scheme[g].width();
        const double mg = e.segment(lo, w).mean();
        VectorXd v = VectorXd::Zero(K);
        MatrixXd curv = MatrixXd::Zero(K, K);
        for (int x = lo; x < lo + w; ++x) {
          v += (e(x) / w) * S.row(x).transpose();
          curv += (e(x) / w) * S.row(x).transpose() * S.row(x);
        }
        const double s1 = d(gi) / mg - n(gi);
        grad += s1 * v;
        neg_hess += (d(gi) / (mg * mg)) * v * v.transpose() - s1 * curv;
      }
    }
  }

  VectorXd initial_theta() const {
    // least-squares projection of rough empirical log rates onto the basis
    VectorXd y(kScheduleAges);
    if (kind == InputKind::single_year) {
      for (int x = 0; x < kScheduleAges; ++x) y(x) = std::log((d(x) + 0.5) / n(x));
    } else {
      for (size_t g = 0; g < scheme.size(); ++g) {
        const int gi = static_cast<int>(g);
        const double lr = std::log((d(gi) + 0.5) / n(gi));
        for (int x = scheme[g].lower; x <= scheme[g].upper; ++x) y(x) = lr;
      }
    }
    const int K = static_cast<int>(S.cols());
    return (S.transpose() * S + 1e-8 * MatrixXd::Identity(K, K))
        .ldlt()
        .solve(S.transpose() * y);
  }
};

}  // namespace

DsplineFit fit_dspline(const VectorXd& deaths, const VectorXd& exposure,
                       const DsplineCalibration& calib, const DsplineBasis& basis,
                       InputKind input_kind, const std::vector<AgeGroup>& scheme) {
  if (input_kind == InputKind::grouped) {
    validate_grouping(scheme);
    if (deaths.size() != static_cast<Eigen::Index>(scheme.size()))
      throw std::invalid_argument("grouped counts do not match the grouping scheme");
  } else if (deaths.size() != kScheduleAges) {
    throw std::invalid_argument("expected single-year counts for ages 0..99");
  }
  if (deaths.size() != exposure.size())
    throw std::invalid_argument("deaths/exposure length mismatch");
  if ((exposure.array() <= 0.0).any())
    throw std::invalid_argument("exposures must be strictly positive");

  Problem prob(deaths, exposure, calib, basis.S, input_kind, scheme);
  const int K = static_cast<int>(basis.S.cols());
  DsplineFit fit;
  fit.kind = calib.kind;
  fit.theta = prob.initial_theta();
  double q = prob.value(fit.theta);
  fit.objective_trace.push_back(q);
  VectorXd grad(K);
  MatrixXd neg_hess(K, K);
  for (int it = 0; it < kMaxIter; ++it) {
    fit.iterations = it + 1;
    prob.derivatives(fit.theta, grad, neg_hess);
    if (grad.lpNorm<Eigen::Infinity>() < kGradTol) {
      fit.converged = true;
      fit.iterations = it;
      break;
    }
    MatrixXd H = neg_hess;
    VectorXd step = H.ldlt().solve(grad);
    // Newton decrement bounds the remaining objective gain; accept the
    // optimum when it is below noise even if the absolute gradient is not.
    // Heavily weighted penalties leave rounding noise in the gradient, so a
    // noise-level negative value also means the optimum is reached.
    if (std::abs(grad.dot(step)) < 1e-10) {
      fit.converged = true;
      fit.iterations = it;
      break;
    }
    VectorXd cand = fit.theta + step;
    double qc = prob.value(cand);
    int halvings = 0;
    double t = 1.0;
    while (!(qc >= q) && halvings < 40) {
      t *= 0.5;
      cand = fit.theta + t * step;
      qc = prob.value(cand);
      ++halvings;
    }
    if (!(qc >= q)) {
      H.diagonal().array() += neg_hess.diagonal().cwiseAbs().maxCoeff() + 1.0;
      step = H.ldlt().solve(grad);
      cand = fit.theta + step;
      qc = prob.value(cand);
      halvings = 0;
      while (!(qc >= q) && halvings < 40) {
        cand = fit.theta + (step *= 0.5);
        qc = prob.value(cand);
        ++halvings;
      }
      if (!(qc >= q)) break;
    }
    if (qc == q) {
      // the objective cannot improve at floating-point resolution
      fit.converged = true;
      break;
    }
    fit.theta = cand;
    q = qc;
    fit.objective_trace.push_back(q);
  }
  if (!fit.converged) {
    prob.derivatives(fit.theta, grad, neg_hess);
    fit.converged = grad.lpNorm<Eigen::Infinity>() < kGradTol;
  }
  prob.derivatives(fit.theta, grad, neg_hess);
  fit.log_rates = basis.S * fit.theta;
  MatrixXd cov_theta = neg_hess.ldlt().solve(MatrixXd::Identity(K, K));
  MatrixXd cov_log = basis.S * cov_theta * basis.S.transpose();
  fit.se = cov_log.diagonal().array().max(0.0).sqrt();
  fit.lower = fit.log_rates - kZ95 * fit.se;
  fit.upper = fit.log_rates + kZ95 * fit.se;
  return fit;
}

std::vector<DsplineFit> compare_estimators(const VectorXd& deaths, const VectorXd& exposure,
                                           const std::vector<DsplineCalibration>& calibs,
                                           const DsplineBasis& basis, InputKind input_kind) {
  std::vector<DsplineFit> fits;
  fits.reserve(calibs.size());
  for (const auto& calib : calibs) {
    try {
      fits.push_back(fit_dspline(deaths, exposure, calib, basis, input_kind));
    } catch (const std::exception&) {
      DsplineFit failed;
      failed.kind = calib.kind;
      failed.converged = false;
      fits.push_back(std::move(failed));
    }
  }
  return fits;
}

}  // namespace sae
