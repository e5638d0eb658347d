#include "sae/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sae {

double bias(const VectorXd& estimates, double truth) {
  if (estimates.size() < 1) throw std::invalid_argument("bias needs at least one estimate");
  return (estimates.array() - truth).mean();
}

double emp_se(const VectorXd& estimates) {
  const Eigen::Index n = estimates.size();
  if (n < 2) throw std::invalid_argument("empSE needs at least two estimates");
  const double mean = estimates.mean();
  return std::sqrt((estimates.array() - mean).square().sum() / static_cast<double>(n - 1));
}

double rmse(const VectorXd& estimates, double truth) {
  if (estimates.size() < 1) throw std::invalid_argument("RMSE needs at least one estimate");
  return std::sqrt((estimates.array() - truth).square().mean());
}

double coverage(const VectorXd& lowers, const VectorXd& uppers, double truth) {
  if (lowers.size() != uppers.size() || lowers.size() < 1)
    throw std::invalid_argument("mismatched interval bounds");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < lowers.size(); ++i) {
    if (lowers(i) > uppers(i)) throw std::invalid_argument("lower bound exceeds upper bound");
    if (lowers(i) <= truth && truth <= uppers(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(lowers.size());
}

double width(const VectorXd& lowers, const VectorXd& uppers) {
  if (lowers.size() != uppers.size() || lowers.size() < 1)
    throw std::invalid_argument("mismatched interval bounds");
  return (uppers - lowers).cwiseAbs().mean();
}

double quantile(VectorXd v, double p) {
  if (v.size() == 0) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.data(), v.data() + v.size());
  if (v.size() == 1) return v(0);
  const double h = p * static_cast<double>(v.size() - 1);
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
  const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, v.size() - 1);
  return v(lo) + (h - static_cast<double>(lo)) * (v(hi) - v(lo));
}

BoxSummary summarize_e0(const VectorXd& e0, double truth) {
  if (e0.size() < 1) throw std::invalid_argument("empty e0 sample");
  BoxSummary s;
  s.min = e0.minCoeff();
  s.max = e0.maxCoeff();
  s.q1 = quantile(e0, 0.25);
  s.median = quantile(e0, 0.5);
  s.q3 = quantile(e0, 0.75);
  s.truth = truth;
  s.n = static_cast<int>(e0.size());
  return s;
}

}  // namespace sae
