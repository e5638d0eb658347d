#include "sae/brass.hpp"

#include <cmath>
#include <ostream>

#include "sae/pspline.hpp"

namespace sae {

BrassParams default_brass_params() {
  // 20-region set; regions 2/8/9 (high/low/medium) at 3-decimal precision.
  static const double a[20] = {-0.48, 0.693, 0.04,  -0.32, 0.20, -0.19, 0.33,
                               -0.659, 0.018, -0.26, 0.62,  0.33, 0.01, 0.37,
                               0.34,  -0.67, -0.24, 0.24,  0.53, -0.06};
  static const double b[20] = {0.80, 0.850, 0.90, 0.82, 1.23, 0.72, 1.22,
                               0.880, 1.035, 1.05, 1.06, 1.00, 0.85, 1.06,
                               0.94, 1.09,  0.77, 0.76, 1.10, 1.07};
  BrassParams p;
  p.a = Eigen::Map<const VectorXd>(a, 20);
  p.b = Eigen::Map<const VectorXd>(b, 20);
  return p;
}

BrassParams draw_brass_params(int n_regions, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, {0xb7a55u});
  BrassParams p;
  p.a.resize(n_regions);
  p.b.resize(n_regions);
  for (int i = 0; i < n_regions; ++i) {
    p.a(i) = rng.uniform(-0.75, 0.75);
    p.b(i) = rng.uniform(0.7, 1.3);
  }
  return p;
}

VectorXd brass_logit(const Survivorship& s) {
  if (s.l.size() != kScheduleAges + 1)
    throw std::invalid_argument("expected survivorship for ages 0..100");
  VectorXd y(kScheduleAges);
  for (int x = 1; x <= kScheduleAges; ++x) {
    const double l = s.l(x);
    if (l <= 0.0 || l >= 1.0)
      throw std::invalid_argument("survivorship at age " + std::to_string(x) +
                                  " is outside (0, 1)");
    y(x - 1) = 0.5 * std::log((1.0 - l) / l);
  }
  return y;
}

VectorXd apply_brass(const VectorXd& y_ref, double a, double b) {
  return (a + (b * y_ref.array())).matrix();
}

Survivorship logit_to_survivorship(const VectorXd& y) {
  if (y.size() != kScheduleAges)
    throw std::invalid_argument("expected logits for ages 1..100");
  Survivorship s;
  s.l.resize(kScheduleAges + 1);
  s.l(0) = 1.0;
  for (int x = 1; x <= kScheduleAges; ++x) s.l(x) = 1.0 / (1.0 + std::exp(2.0 * y(x - 1)));
  return s;
}

VectorXd reweight_exposure(double total, const VectorXd& reference_exposure) {
  if (total <= 0.0) throw std::invalid_argument("exposure total must be positive");
  if ((reference_exposure.array() <= 0.0).any())
    throw std::invalid_argument("reference exposures must be strictly positive");
  return reference_exposure * (total / reference_exposure.sum());
}

int TrueWorld::year_index(int year) const {
  for (size_t i = 0; i < years.size(); ++i)
    if (years[i] == year) return static_cast<int>(i);
  throw std::out_of_range("year not in world: " + std::to_string(year));
}

VectorXd TrueWorld::single_year_exposure(double total, int year) const {
  return exposure_share.col(year_index(year)) * total;
}

VectorXd TrueWorld::grouped_exposure(double total, int year) const {
  VectorXd nx = single_year_exposure(total, year);
  auto scheme = canonical_grouping();
  VectorXd ng(static_cast<int>(scheme.size()));
  for (size_t g = 0; g < scheme.size(); ++g)
    ng(static_cast<int>(g)) = nx.segment(scheme[g].lower, scheme[g].width()).sum();
  return ng;
}

VectorXd TrueWorld::grouped_truth_rates(int region, int year) const {
  const int t = year_index(year);
  VectorXd m = region_log_rates.at(region).col(t).array().exp();
  VectorXd share = exposure_share.col(t);
  auto scheme = canonical_grouping();
  VectorXd mg(static_cast<int>(scheme.size()));
  for (size_t g = 0; g < scheme.size(); ++g) {
    const auto& grp = scheme[g];
    double deaths = 0.0, expo = 0.0;
    for (int x = grp.lower; x <= grp.upper; ++x) {
      deaths += m(x) * share(x);
      expo += share(x);
    }
    mg(static_cast<int>(g)) = deaths / expo;
  }
  return mg;
}

TrueWorld build_true_world(const RateMatrix& reference_rates,
                           const AgeYearTable& reference_exposure, const std::vector<int>& years,
                           const BrassParams& params) {
  TrueWorld w;
  w.years = years;
  w.params = params;
  const int T = static_cast<int>(years.size());
  const int R = params.n_regions();
  w.ref_log_rates.resize(kScheduleAges, T);
  w.exposure_share.resize(kScheduleAges, T);
  w.region_log_rates.assign(R, MatrixXd(kScheduleAges, T));
  for (int t = 0; t < T; ++t) {
    // reported rates carry sampling jitter; the world's truth is the smooth
    // signal underneath, so take out the noise before the Brass transform
    VectorXd ref_log_m = smooth_values(reference_rates.year_slice(years[t]), 0.1);
    w.ref_log_rates.col(t) = ref_log_m;
    VectorXd ref_m = ref_log_m.array().exp();
    Survivorship ref_l = rates_to_survivorship(ref_m);
    VectorXd y_ref = brass_logit(ref_l);
    for (int r = 0; r < R; ++r) {
      VectorXd y = apply_brass(y_ref, params.a(r), params.b(r));
      VectorXd m = survivorship_to_rates(logit_to_survivorship(y));
      w.region_log_rates[r].col(t) = m.array().log();
    }
    const int ty = reference_exposure.year_index(years[t]);
    VectorXd nx(kScheduleAges);
    for (int x = 0; x < kScheduleAges; ++x) {
      const int i = reference_exposure.age_index(x);
      if (reference_exposure.missing(i, ty))
        throw std::runtime_error("missing reference exposure at age " + std::to_string(x));
      nx(x) = reference_exposure.values(i, ty);
    }
    if ((nx.array() <= 0.0).any())
      throw std::runtime_error("non-positive reference exposure in year " +
                               std::to_string(years[t]));
    w.exposure_share.col(t) = nx / nx.sum();
  }
  return w;
}

namespace {

constexpr int kMaxRedraws = 10000;

// Draw one (region, year) count vector, redrawing until total deaths >= 2.
VectorXd draw_counts(Rng& rng, const VectorXd& mean) {
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    VectorXd d(mean.size());
    double tot = 0.0;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      d(i) = static_cast<double>(rng.poisson(mean(i)));
      tot += d(i);
    }
    if (tot >= 2.0) return d;
  }
  throw std::runtime_error("minimum-two-deaths rule not met after 10000 redraws");
}

}  // namespace

SimulatedDataset simulate_single_year(const TrueWorld& world, double total_exposure,
                                      std::uint64_t seed) {
  SimulatedDataset out;
  out.seed = seed;
  out.total_exposure = total_exposure;
  const int T = world.n_years();
  const int R = world.n_regions();
  out.deaths_single.assign(R, MatrixXd(kScheduleAges, T));
  for (int r = 0; r < R; ++r) {
    for (int t = 0; t < T; ++t) {
      VectorXd nx = world.exposure_share.col(t) * total_exposure;
      VectorXd mean =
          world.region_log_rates[r].col(t).array().exp() * nx.array();
      Rng rng = Rng::stream(seed, {1u, static_cast<std::uint64_t>(r),
                                   static_cast<std::uint64_t>(t)});
      out.deaths_single[r].col(t) = draw_counts(rng, mean);
    }
  }
  return out;
}

SimulatedDataset simulate_grouped(const TrueWorld& world, double total_exposure,
                                  std::uint64_t seed) {
  SimulatedDataset out;
  out.seed = seed;
  out.total_exposure = total_exposure;
  const int T = world.n_years();
  const int R = world.n_regions();
  const int G = static_cast<int>(canonical_grouping().size());
  out.deaths_grouped.assign(R, MatrixXd(G, T));
  for (int r = 0; r < R; ++r) {
    for (int t = 0; t < T; ++t) {
      VectorXd mg = world.grouped_truth_rates(r, world.years[t]);
      VectorXd ng = world.grouped_exposure(total_exposure, world.years[t]);
      VectorXd mean = mg.array() * ng.array();
      Rng rng = Rng::stream(seed, {2u, static_cast<std::uint64_t>(r),
                                   static_cast<std::uint64_t>(t)});
      out.deaths_grouped[r].col(t) = draw_counts(rng, mean);
    }
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const TrueWorld& world, const SimulatedDataset& data,
                       int replicate, bool grouped) {
  out << "replicate,region,year,age,deaths,exposure,true_log_rate\n";
  const auto scheme = canonical_grouping();
  for (int r = 0; r < world.n_regions(); ++r) {
    for (int t = 0; t < world.n_years(); ++t) {
      const int year = world.years[t];
      if (grouped) {
        VectorXd mg = world.grouped_truth_rates(r, year);
        VectorXd ng = world.grouped_exposure(data.total_exposure, year);
        for (size_t g = 0; g < scheme.size(); ++g) {
          out << replicate << "," << (r + 1) << "," << year << "," << scheme[g].label << ","
              << data.deaths_grouped[r](static_cast<int>(g), t) << "," << ng(static_cast<int>(g))
              << "," << std::log(mg(static_cast<int>(g))) << "\n";
        }
      } else {
        VectorXd nx = world.single_year_exposure(data.total_exposure, year);
        for (int x = 0; x < kScheduleAges; ++x) {
          out << replicate << "," << (r + 1) << "," << year << "," << x << ","
              << data.deaths_single[r](x, t) << "," << nx(x) << ","
              << world.region_log_rates[r](x, t) << "\n";
        }
      }
    }
  }
}

}  // namespace sae
