#pragma once

#include <cstdint>

#include "sae/knowledge.hpp"
#include "sae/lifetable.hpp"
#include "sae/types.hpp"

namespace sae {

/// Grouped death/exposure panel over regions x age groups x years.
struct GroupedPanel {
  std::vector<AgeGroup> scheme;
  std::vector<int> years;
  std::vector<MatrixXd> deaths;    // per region, G x T
  std::vector<MatrixXd> exposure;  // per region, G x T

  int n_regions() const { return static_cast<int>(deaths.size()); }
  int n_groups() const { return static_cast<int>(scheme.size()); }
  int n_years() const { return static_cast<int>(years.size()); }
  void validate() const;
};

/// All sampled quantities of the hierarchical model. Log cell rates are
/// eta_{g,a,t} = sum_p beta_{p,a,t} V_{p,g} + u_{g,a,t}.
struct SvdModelState {
  std::vector<MatrixXd> beta;  // per component p (3), A x T
  MatrixXd mu;                 // 3 x T, common means of beta across regions
  MatrixXd sigma_beta;         // 3 x T, pooling scales
  Eigen::Vector3d sigma_mu;    // random-walk scales of the time prior
  std::vector<MatrixXd> u;     // per region, G x T cell effects
  VectorXd sigma_g;            // one cell-effect scale per age group

  void validate(int n_regions, int n_groups, int n_years) const;
};

/// Individual log-density terms, exposed so each can be checked in isolation.
double svd_log_likelihood(const SvdModelState& state, const GroupedPanel& data,
                          const PCBasis& basis);
double svd_log_pooling_prior(const SvdModelState& state);
double svd_log_time_prior(const SvdModelState& state);
double svd_log_hyperpriors(const SvdModelState& state);

/// Full log posterior (likelihood includes the -log D! terms).
double log_posterior(const SvdModelState& state, const GroupedPanel& data, const PCBasis& basis);

struct SamplerConfig {
  int chains = 4;
  int iterations = 16000;  // total, including warmup
  int warmup = 2000;
  std::uint64_t seed = 0;
  int max_recorded = 1000;  // post-warmup draws kept per chain (thinned)
  double rhat_threshold = 1.01;
  double min_ess = 400.0;
  double accept_low = 0.1;   // sampler-health band, post-warmup per block
  double accept_high = 0.6;

  /// Iteration settings used in the study; one budget for every exposure size.
  static SamplerConfig for_exposure(double total_exposure);
};

struct RunManifest {
  std::uint64_t seed = 0;
  int chains = 0;
  int iterations = 0;
  int warmup = 0;
  int thin = 0;
  int recorded_per_chain = 0;
  double rhat_threshold = 0.0;
  double min_ess = 0.0;
  double accept_low = 0.0;
  double accept_high = 0.0;
  std::string parameterization =
      "centered; interweaved ridge/translation/rescale moves with slice-sampled scales";
};

struct PosteriorSummary {
  std::vector<int> years;
  std::vector<AgeGroup> scheme;
  int n_regions = 0;

  // per region, G x T posterior log-rate quantiles
  std::vector<MatrixXd> median, lower, upper;

  // convergence diagnostics per monitored quantity (cell log rates and
  // hyperparameters)
  std::vector<std::string> monitored;
  VectorXd rhat, ess_bulk, ess_tail;

  // sampler health per chain: post-warmup acceptance of every MH block
  // inside the configured band
  std::vector<bool> chain_healthy;
  std::vector<double> chain_min_accept, chain_max_accept;

  // retained draws: per chain, recorded x (G*A*T) cell log rates and
  // recorded x n_hyper hyperparameters
  std::vector<Eigen::MatrixXf> eta_draws;
  std::vector<MatrixXd> hyper_draws;

  RunManifest manifest;

  int n_groups() const { return static_cast<int>(scheme.size()); }
  int n_years() const { return static_cast<int>(years.size()); }
  int cell_index(int region, int group, int t) const {
    return (region * n_groups() + group) * n_years() + t;
  }
  /// Posterior quantile of one cell's log rate, pooled over chains.
  double cell_quantile(int region, int group, int t, double p) const;
};

SamplerConfig default_sampler_config();

PosteriorSummary sample_posterior(const GroupedPanel& data, const PCBasis& basis,
                                  const SamplerConfig& config);

struct DiagnosticsReport {
  bool rhat_ok = false;
  bool bulk_ess_ok = false;
  bool tail_ess_ok = false;
  bool sampler_ok = false;
  bool passed = false;
  double worst_rhat = 0.0;
  double worst_bulk_ess = 0.0;
  double worst_tail_ess = 0.0;
};

DiagnosticsReport run_checks(const PosteriorSummary& summary, const SamplerConfig& config);

void write_posterior_csv(std::ostream& out, const PosteriorSummary& summary);
void write_diagnostics_csv(std::ostream& out, const PosteriorSummary& summary,
                           const DiagnosticsReport& report);
void write_manifest_json(std::ostream& out, const RunManifest& manifest);

}  // namespace sae
