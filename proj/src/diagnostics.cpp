#include "sae/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sae/metrics.hpp"

namespace sae {

double inverse_normal_cdf(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("probability outside (0, 1)");
  // Acklam's rational approximation, |relative error| < 1.15e-9
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

namespace {

MatrixXd split_chains(const MatrixXd& draws) {
  const Eigen::Index n = draws.rows() / 2;
  const Eigen::Index m = draws.cols();
  MatrixXd out(n, 2 * m);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.col(2 * j) = draws.col(j).head(n);
    out.col(2 * j + 1) = draws.col(j).segment(draws.rows() - n, n);
  }
  return out;
}

// average ranks over all elements, then z-scores via the normal quantile
MatrixXd rank_normalize(const MatrixXd& x) {
  const Eigen::Index N = x.size();
  std::vector<Eigen::Index> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  const double* data = x.data();
  std::sort(idx.begin(), idx.end(),
            [&](Eigen::Index a, Eigen::Index b) { return data[a] < data[b]; });
  std::vector<double> rank(N);
  Eigen::Index i = 0;
  while (i < N) {
    Eigen::Index j = i;
    while (j + 1 < N && data[idx[j + 1]] == data[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < N; ++k)
    z.data()[k] = inverse_normal_cdf((rank[k] - 0.375) / (static_cast<double>(N) + 0.25));
  return z;
}

double basic_rhat(const MatrixXd& chains) {
  const Eigen::Index n = chains.rows();
  const Eigen::Index m = chains.cols();
  if (n < 2 || m < 2) return 1.0;
  VectorXd means(m), vars(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    means(j) = chains.col(j).mean();
    vars(j) = (chains.col(j).array() - means(j)).square().sum() / static_cast<double>(n - 1);
  }
  const double W = vars.mean();
  const double grand = means.mean();
  const double B =
      static_cast<double>(n) * (means.array() - grand).square().sum() / static_cast<double>(m - 1);
  if (W <= 0.0) return 1.0;
  const double var_plus = (static_cast<double>(n - 1) / n) * W + B / static_cast<double>(n);
  return std::sqrt(var_plus / W);
}

double autocov(const VectorXd& x, double mean, Eigen::Index lag) {
  const Eigen::Index n = x.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i + lag < n; ++i) s += (x(i) - mean) * (x(i + lag) - mean);
  return s / static_cast<double>(n);
}

// Geyer initial monotone sequence ESS over already-split chains.
double basic_ess(const MatrixXd& chains) {
  const Eigen::Index n = chains.rows();
  const Eigen::Index m = chains.cols();
  if (n < 4) return static_cast<double>(n * m);
  VectorXd means(m), vars(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    means(j) = chains.col(j).mean();
    vars(j) = (chains.col(j).array() - means(j)).square().sum() / static_cast<double>(n - 1);
  }
  const double W = vars.mean();
  const double grand = means.mean();
  double B = 0.0;
  if (m > 1)
    B = static_cast<double>(n) * (means.array() - grand).square().sum() /
        static_cast<double>(m - 1);
  const double var_plus = (static_cast<double>(n - 1) / n) * W + B / static_cast<double>(n);
  if (var_plus <= 0.0) return static_cast<double>(n * m);

  auto rho = [&](Eigen::Index lag) {
    double acov = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
      acov += autocov(chains.col(j), means(j), lag) * static_cast<double>(n) /
              static_cast<double>(n - 1);
    acov /= static_cast<double>(m);
    return 1.0 - (W - acov) / var_plus;
  };

  double tau = 1.0 + 2.0 * rho(1);  // rho(0)=1 handled by the leading 1
  double prev_pair = rho(1) + 1.0;  // rho(0) + rho(1)
  // pair sums from lag 2 onward; stop when a pair turns negative
  for (Eigen::Index lag = 2; lag + 1 < n; lag += 2) {
    double pair = rho(lag) + rho(lag + 1);
    if (pair < 0.0) break;
    if (pair > prev_pair) pair = prev_pair;  // enforce monotone decrease
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::numeric_limits<double>::max());
  double ess = static_cast<double>(n * m) / tau;
  return std::min(ess, static_cast<double>(n * m) * std::log10(static_cast<double>(n * m)));
}

}  // namespace

double split_rhat(const MatrixXd& draws) {
  if (draws.rows() < 4) return 1.0;
  MatrixXd chains = split_chains(draws);
  if ((chains.array() == chains(0, 0)).all()) return 1.0;
  const double r_bulk = basic_rhat(rank_normalize(chains));
  const double med = quantile(Eigen::Map<const VectorXd>(chains.data(), chains.size()), 0.5);
  MatrixXd folded = (chains.array() - med).abs();
  const double r_tail = basic_rhat(rank_normalize(folded));
  return std::max(r_bulk, r_tail);
}

double bulk_ess(const MatrixXd& draws) {
  if (draws.rows() < 4) return static_cast<double>(draws.size());
  MatrixXd chains = split_chains(draws);
  if ((chains.array() == chains(0, 0)).all()) return static_cast<double>(chains.size());
  return basic_ess(rank_normalize(chains));
}

double tail_ess(const MatrixXd& draws) {
  if (draws.rows() < 4) return static_cast<double>(draws.size());
  MatrixXd chains = split_chains(draws);
  if ((chains.array() == chains(0, 0)).all()) return static_cast<double>(chains.size());
  const VectorXd flat = Eigen::Map<const VectorXd>(chains.data(), chains.size());
  const double q05 = quantile(flat, 0.05);
  const double q95 = quantile(flat, 0.95);
  MatrixXd low = (chains.array() <= q05).cast<double>();
  MatrixXd high = (chains.array() >= q95).cast<double>();
  return std::min(basic_ess(low), basic_ess(high));
}

}  // namespace sae
