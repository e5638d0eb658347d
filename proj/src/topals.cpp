#include "sae/topals.hpp"

#include <cmath>
#include <ostream>

#include "sae/bspline.hpp"

namespace sae {

namespace {
constexpr double kZ95 = 1.959964;
constexpr int kMaxIter = 100;
constexpr double kGradTol = 1e-8;
}  // namespace

TopalsBasis TopalsBasis::make(std::vector<double> knot_ages, double kappa) {
  TopalsBasis basis;
  basis.knot_ages = std::move(knot_ages);
  basis.kappa = kappa;
  basis.B = linear_bspline_basis(basis.knot_ages, kScheduleAges);
  MatrixXd D = difference_matrix(1, static_cast<int>(basis.B.cols()));
  basis.P = D.transpose() * D;
  return basis;
}

namespace {

struct Objective {
  // value, gradient and negative Hessian of the penalized log-likelihood
  virtual double value(const VectorXd& alpha) const = 0;
  virtual void derivatives(const VectorXd& alpha, VectorXd& grad, MatrixXd& neg_hess) const = 0;
  virtual ~Objective() = default;
};

TopalsFit newton_fit(const Objective& obj, const TopalsBasis& basis,
                     const StandardSchedule& standard) {
  const int S = static_cast<int>(basis.B.cols());
  TopalsFit fit;
  fit.alpha = VectorXd::Zero(S);
  double q = obj.value(fit.alpha);
  fit.objective_trace.push_back(q);
  VectorXd grad(S);
  MatrixXd neg_hess(S, S);
  for (int it = 0; it < kMaxIter; ++it) {
    fit.iterations = it + 1;
    obj.derivatives(fit.alpha, grad, neg_hess);
    if (grad.lpNorm<Eigen::Infinity>() < kGradTol) {
      fit.converged = true;
      fit.iterations = it;
      break;
    }
    MatrixXd H = neg_hess;
    VectorXd step = H.ldlt().solve(grad);
    // scale-free criterion: the Newton decrement bounds the remaining
    // objective gain, so a tiny value means the optimum is reached even when
    // counts are too large for the absolute gradient tolerance; a noise-level
    // negative value is the same situation seen through rounding error
    if (std::abs(grad.dot(step)) < 1e-10) {
      fit.converged = true;
      fit.iterations = it;
      break;
    }
    double t = 1.0;
    VectorXd cand = fit.alpha + step;
    double qc = obj.value(cand);
    int halvings = 0;
    while (!(qc >= q) && halvings < 40) {
      t *= 0.5;
      cand = fit.alpha + t * step;
      qc = obj.value(cand);
      ++halvings;
    }
    if (!(qc >= q)) {
      // Newton direction failed; retry along a ridge-damped direction
      H.diagonal().array() += neg_hess.diagonal().maxCoeff() + 1.0;
      step = H.ldlt().solve(grad);
      cand = fit.alpha + step;
      qc = obj.value(cand);
      halvings = 0;
      while (!(qc >= q) && halvings < 40) {
        cand = fit.alpha + (step *= 0.5);
        qc = obj.value(cand);
        ++halvings;
      }
      if (!(qc >= q)) break;
    }
    if (qc == q) {
      // the objective cannot improve at floating-point resolution
      fit.converged = true;
      break;
    }
    fit.alpha = cand;
    q = qc;
    fit.objective_trace.push_back(q);
  }
  if (!fit.converged) {
    obj.derivatives(fit.alpha, grad, neg_hess);
    fit.converged = grad.lpNorm<Eigen::Infinity>() < kGradTol;
  }
  obj.derivatives(fit.alpha, grad, neg_hess);
  fit.log_rates = standard.log_rates + basis.B * fit.alpha;
  MatrixXd cov_alpha = neg_hess.ldlt().solve(MatrixXd::Identity(S, S));
  MatrixXd cov_log = basis.B * cov_alpha * basis.B.transpose();
  fit.se = cov_log.diagonal().array().max(0.0).sqrt();
  fit.lower = fit.log_rates - kZ95 * fit.se;
  fit.upper = fit.log_rates + kZ95 * fit.se;
  return fit;
}

struct SingleYearObjective final : Objective {
  const VectorXd &d, &n;
  const StandardSchedule& standard;
  const TopalsBasis& basis;
  SingleYearObjective(const VectorXd& d, const VectorXd& n, const StandardSchedule& s,
                      const TopalsBasis& b)
      : d(d), n(n), standard(s), basis(b) {}

  double value(const VectorXd& alpha) const override {
    VectorXd eta = standard.log_rates + basis.B * alpha;
    double ll = 0.0;
    for (int x = 0; x < kScheduleAges; ++x) ll += d(x) * eta(x) - n(x) * std::exp(eta(x));
    return ll - 0.5 * basis.kappa * alpha.dot(basis.P * alpha);
  }

  void derivatives(const VectorXd& alpha, VectorXd& grad, MatrixXd& neg_hess) const override {
    VectorXd eta = standard.log_rates + basis.B * alpha;
    VectorXd mu = (eta.array().exp() * n.array()).matrix();
    grad = basis.B.transpose() * (d - mu) - basis.kappa * (basis.P * alpha);
    neg_hess = basis.B.transpose() * mu.asDiagonal() * basis.B + basis.kappa * basis.P;
  }
};

struct GroupedObjective final : Objective {
  const VectorXd &dg, &ng;
  const StandardSchedule& standard;
  const TopalsBasis& basis;
  const std::vector<AgeGroup>& scheme;
  GroupedObjective(const VectorXd& dg, const VectorXd& ng, const StandardSchedule& s,
                   const TopalsBasis& b, const std::vector<AgeGroup>& scheme)
      : dg(dg), ng(ng), standard(s), basis(b), scheme(scheme) {}

  double value(const VectorXd& alpha) const override {
    VectorXd e = (standard.log_rates + basis.B * alpha).array().exp();
    double ll = 0.0;
    for (size_t g = 0; g < scheme.size(); ++g) {
      const double mg = e.segment(scheme[g].lower, scheme[g].width()).mean();
      const int gi = static_cast<int>(g);
      ll += dg(gi) * std::log(mg) - ng(gi) * mg;
    }
    return ll - 0.5 * basis.kappa * alpha.dot(basis.P * alpha);
  }

  void derivatives(const VectorXd& alpha, VectorXd& grad, MatrixXd& neg_hess) const override {
    const int S = static_cast<int>(basis.B.cols());
    VectorXd e = (standard.log_rates + basis.B * alpha).array().exp();
    grad = -basis.kappa * (basis.P * alpha);
    neg_hess = basis.kappa * basis.P;
    for (size_t g = 0; g < scheme.size(); ++g) {
      const int gi = static_cast<int>(g);
      const int lo = scheme[g].lower;
      const int w = scheme[g].width();
      const double mg = e.segment(lo, w).mean();
      VectorXd v = VectorXd::Zero(S);      // dm_g/dalpha
      MatrixXd curv = MatrixXd::Zero(S, S);  // d2m_g/dalpha2
      for (int x = lo; x < lo + w; ++x) {
        v += (e(x) / w) * basis.B.row(x).transpose();
        curv += (e(x) / w) * basis.B.row(x).transpose() * basis.B.row(x);
      }
      const double s1 = dg(gi) / mg - ng(gi);
      grad += s1 * v;
      neg_hess += (dg(gi) / (mg * mg)) * v * v.transpose() - s1 * curv;
    }
  }
};

}  // namespace

TopalsFit fit_topals_single(const VectorXd& deaths, const VectorXd& exposure,
                            const StandardSchedule& standard, const TopalsBasis& basis) {
  if (deaths.size() != kScheduleAges || exposure.size() != kScheduleAges)
    throw std::invalid_argument("expected single-year counts for ages 0..99");
  if ((exposure.array() <= 0.0).any())
    throw std::invalid_argument("exposures must be strictly positive");
  if ((deaths.array() < 0.0).any()) throw std::invalid_argument("negative death count");
  SingleYearObjective obj(deaths, exposure, standard, basis);
  return newton_fit(obj, basis, standard);
}

TopalsFit fit_topals_grouped(const VectorXd& deaths_g, const VectorXd& exposure_g,
                             const StandardSchedule& standard, const TopalsBasis& basis,
                             const std::vector<AgeGroup>& scheme) {
  validate_grouping(scheme);
  if (deaths_g.size() != static_cast<Eigen::Index>(scheme.size()) ||
      exposure_g.size() != static_cast<Eigen::Index>(scheme.size()))
    throw std::invalid_argument("grouped counts do not match the grouping scheme");
  if ((exposure_g.array() <= 0.0).any())
    throw std::invalid_argument("exposures must be strictly positive");
  GroupedObjective obj(deaths_g, exposure_g, standard, basis, scheme);
  return newton_fit(obj, basis, standard);
}

void write_fit_csv(std::ostream& out, const TopalsFit& fit, int region, int year,
                   const std::string& method_label) {
  for (int x = 0; x < kScheduleAges; ++x) {
    out << method_label << "," << region << "," << year << "," << x << "," << fit.log_rates(x)
        << "," << fit.se(x) << "," << fit.lower(x) << "," << fit.upper(x) << ","
        << (fit.converged ? 1 : 0) << "," << fit.iterations << "\n";
  }
}

}  // namespace sae
