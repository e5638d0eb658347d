#include "sae/synthetic.hpp"

#include <cmath>

#include "sae/rng.hpp"

namespace sae {

namespace {

constexpr int kMaxAge = 110;  // tables carry ages 0..110+

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Secular decline pattern: younger ages improve faster.
double decline_shape(int age) { return 1.2 - 0.6 * static_cast<double>(age) / 100.0; }

/// Three-component force of mortality: infant decay, accident hump, and a
/// Gompertz senescent term with late-life deceleration.
struct ScheduleParams {
  double infant, infant_decay;
  double hump, hump_center, hump_width;
  double senescent, gompertz, decel;
};

ScheduleParams canonical_params(Sex sex) {
  if (sex == Sex::female)
    return {0.0024, 0.90, 0.00015, 23.0, 10.0, 0.00013, 0.092, -0.00021};
  return {0.0030, 0.90, 0.00040, 23.0, 10.0, 0.00020, 0.091, -0.00021};
}

VectorXd parametric_log_rates(const ScheduleParams& p) {
  VectorXd log_m(kMaxAge + 1);
  for (int x = 0; x <= kMaxAge; ++x) {
    const double xd = static_cast<double>(x);
    const double m =
        p.infant * std::exp(-p.infant_decay * xd) +
        p.hump * std::exp(-0.5 * std::pow((xd - p.hump_center) / p.hump_width, 2.0)) +
        p.senescent * std::exp(p.gompertz * xd + p.decel * xd * xd);
    log_m(x) = std::log(m);
  }
  return log_m;
}

}  // namespace

VectorXd synthetic_base_log_rates(Sex sex) { return parametric_log_rates(canonical_params(sex)); }

namespace {

/// Relational warp of a full 0..110 schedule: shift/scale the half-logits of
/// the implied survivorship and map back to rates. This is how real
/// populations differ from one another, so the library carries the same kind
/// of shape variation that distinct mortality regimes show.
VectorXd relational_warp(const VectorXd& log_m, double a, double b) {
  const int n = static_cast<int>(log_m.size());
  VectorXd l(n + 1);
  l(0) = 1.0;
  for (int x = 0; x < n; ++x) l(x + 1) = l(x) * std::exp(-std::exp(log_m(x)));
  VectorXd out(n);
  double prev = 1.0;
  for (int x = 0; x < n; ++x) {
    const double y = a + b * 0.5 * std::log((1.0 - l(x + 1)) / l(x + 1));
    const double lx = 1.0 / (1.0 + std::exp(2.0 * y));
    out(x) = std::log(-std::log(lx / prev));
    prev = lx;
  }
  return out;
}

}  // namespace

std::vector<std::string> SyntheticConfig::default_codes() {
  std::vector<std::string> codes = {"SYNREF", "SYNB", "SYNC", "SYND", "SYNE", "SYNF"};
  for (int i = 7; i <= 25; ++i) {
    std::string c = "SYN";
    if (i < 10) c += '0';
    c += std::to_string(i);
    codes.push_back(c);
  }
  return codes;
}

SourceLibrary build_synthetic_library(const SyntheticConfig& cfg_in) {
  SyntheticConfig cfg = cfg_in;
  if (cfg.codes.empty()) cfg.codes = SyntheticConfig::default_codes();
  if (cfg.year_to < cfg.year_from) throw std::invalid_argument("empty year range");
  const int T = cfg.year_to - cfg.year_from + 1;
  std::vector<int> ages(kMaxAge + 1), years(T);
  for (int x = 0; x <= kMaxAge; ++x) ages[x] = x;
  for (int t = 0; t < T; ++t) years[t] = cfg.year_from + t;

  SourceLibrary lib;
  for (const auto& code : cfg.codes) {
    for (Sex sex : {Sex::male, Sex::female}) {
      Rng rng = Rng::stream(cfg.seed, {fnv1a(code), sex == Sex::female ? 1ULL : 0ULL});
      const bool reference = code == cfg.codes.front();
      // country effects: level, age slope, hump intensity, decline speed,
      // component-shape jitter, and smooth cosine texture; together these
      // spread the schedules through the whole space of smooth deviations so
      // no direction of cross-country variation collapses to the noise floor
      const double level = reference ? 0.0 : rng.uniform(-0.40, 0.40);
      const double slope = reference ? 0.0 : rng.uniform(-0.25, 0.25);
      const double hump_adj = reference ? 0.0 : rng.uniform(-0.3, 0.3);
      const double decline_rate = rng.uniform(0.85, 1.15);
      double cosine[8];
      for (int k = 0; k < 8; ++k)
        cosine[k] = reference ? 0.0 : rng.uniform(-0.25, 0.25) / static_cast<double>(k + 2);

      ScheduleParams params = canonical_params(sex);
      if (!reference) {
        params.infant *= std::exp(rng.uniform(-0.3, 0.3));
        params.infant_decay *= rng.uniform(0.85, 1.18);
        params.hump_center += rng.uniform(-2.5, 2.5);
        params.hump_width *= rng.uniform(0.8, 1.25);
        params.gompertz += rng.uniform(-0.006, 0.006);
        params.decel += rng.uniform(-5e-5, 5e-5);
      }
      // relational shape warp: countries differ the way whole mortality
      // regimes differ, not just by additive adjustments
      const double warp_a = reference ? 0.0 : rng.uniform(-0.3, 0.3);
      const double warp_b = reference ? 1.0 : rng.uniform(0.85, 1.18);
      const VectorXd base = parametric_log_rates(params);
      MatrixXd log_m(kMaxAge + 1, T);
      for (int t = 0; t < T; ++t) {
        const double w = (static_cast<double>(years[t]) - 1985.0) / 35.0;
        const double wiggle = 0.01 * std::sin(0.9 * static_cast<double>(years[t] - 1900));
        // smooth year-to-year shape fluctuation (epidemics, cohort effects);
        // every published year deviates smoothly, not just by cell noise
        double year_tex[8];
        for (int k = 0; k < 8; ++k)
          year_tex[k] = reference ? 0.0 : rng.uniform(-0.10, 0.10) / static_cast<double>(k + 2);
        const double a_t = reference ? 0.0 : warp_a + rng.uniform(-0.03, 0.03);
        const double b_t = reference ? 1.0 : warp_b + rng.uniform(-0.02, 0.02);
        const VectorXd warped = reference ? base : relational_warp(base, a_t, b_t);
        for (int x = 0; x <= kMaxAge; ++x) {
          const double xf = static_cast<double>(x) / 100.0;
          double v = warped(x) + level + slope * (xf - 0.5);
          v += hump_adj * std::exp(-0.5 * std::pow((xf * 100.0 - params.hump_center) /
                                                       params.hump_width, 2.0));
          for (int k = 0; k < 8; ++k)
            v += (cosine[k] + year_tex[k]) * std::cos(M_PI * static_cast<double>(k + 1) * xf);
          v += -0.25 * decline_rate * w * decline_shape(x) + wiggle;
          log_m(x, t) = v + cfg.noise_sd * rng.normal();
        }
      }

      // exposure shares follow the year-2000 survivorship of this schedule
      const int t2000 = std::clamp(2000 - cfg.year_from, 0, T - 1);
      VectorXd share(kMaxAge + 1);
      double l = 1.0, total = 0.0;
      for (int x = 0; x <= kMaxAge; ++x) {
        share(x) = l;
        total += l;
        l *= std::exp(-std::exp(log_m(x, t2000)));
      }
      share /= total;

      Source src;
      src.population_code = code;
      src.sex = sex;
      for (Measure measure : {Measure::deaths, Measure::exposure}) {
        AgeYearTable tab;
        tab.ages = ages;
        tab.years = years;
        tab.values.resize(kMaxAge + 1, T);
        tab.missing.setZero(kMaxAge + 1, T);
        tab.open_ended = true;
        tab.measure = measure;
        tab.sex = sex;
        tab.population_code = code;
        for (int t = 0; t < T; ++t) {
          for (int x = 0; x <= kMaxAge; ++x) {
            const double n = cfg.total_exposure * share(x);
            tab.values(x, t) = measure == Measure::exposure ? n : n * std::exp(log_m(x, t));
          }
        }
        tab.validate();
        (measure == Measure::deaths ? src.deaths : src.exposure) = std::move(tab);
      }
      lib.sources.push_back(std::move(src));
    }
  }
  return lib;
}

}  // namespace sae
