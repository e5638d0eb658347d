#include "sae/study.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "sae/hmd.hpp"
#include "sae/rng.hpp"

namespace sae {

std::string MethodSpec::name() const {
  std::string base;
  switch (family) {
    case MethodFamily::topals: base = "TOPALS"; break;
    case MethodFamily::dsplines: base = to_string(estimator); break;
    case MethodFamily::svd: return "SVD";
  }
  if (input == InputKind::grouped) base += "-grouped";
  return base;
}

std::vector<MethodSpec> StudyConfig::default_methods() {
  std::vector<MethodSpec> m(4);
  m[0].family = MethodFamily::topals;
  for (int i = 0; i < 3; ++i) {
    m[i + 1].family = MethodFamily::dsplines;
    m[i + 1].estimator = static_cast<DsplineKind>(i);
  }
  return m;
}

void StudyConfig::finalize() {
  if (methods.empty()) methods = default_methods();
  if (years.empty())
    for (int y = 1995; y <= 2005; ++y) years.push_back(y);
  if (n_sim < 1) throw std::invalid_argument("n_sim must be at least 1");
  for (double e : exposures)
    if (e <= 0.0) throw std::invalid_argument("exposure sizes must be positive");
  if (threads < 1) threads = 1;
}

DkRecipe study_recipe(MethodFamily family, DkKind dk, DsplineKind estimator,
                      const std::string& reference_code) {
  DkRecipe r;
  r.method = family;
  r.kind = dk;
  r.estimator = estimator;
  r.excluded_codes.clear();
  switch (family) {
    case MethodFamily::topals:
      // canonical: the reference country itself; wrong source: a companion
      // country; wrong sex: companion country, female, off-period year
      r.sex = dk == DkKind::dk3 ? Sex::female : Sex::male;
      r.standard_code = dk == DkKind::dk1 ? reference_code : "SYNC";
      r.standard_year = dk == DkKind::dk3 ? 1965 : 2000;
      break;
    case MethodFamily::dsplines:
      // databases never include the reference country
      r.excluded_codes = {reference_code};
      r.sex = dk == DkKind::dk3 ? Sex::female : Sex::male;
      r.year_from = dk == DkKind::dk2 ? 1950 : 1970;
      r.year_to = dk == DkKind::dk2 ? 1969 : 2019;
      r.year_step = 10;
      break;
    case MethodFamily::svd:
      if (dk == DkKind::dk2) {
        // historic multi-country database instead of the national series
        r.standard_code.clear();
        r.excluded_codes = {reference_code};
        r.sex = Sex::male;
        r.year_from = 1950;
        r.year_to = 1969;
        r.year_step = 10;
      } else {
        r.standard_code = reference_code;
        r.sex = dk == DkKind::dk3 ? Sex::female : Sex::male;
        r.year_from = 1995;
        r.year_to = 2005;
      }
      break;
  }
  return r;
}

namespace {

struct FitOutcome {
  bool ok = false;
  VectorXd point, lower, upper;
  double e0 = 0.0;
};

struct RepOutcome {
  // [region index in config][method index]
  std::vector<std::vector<FitOutcome>> fits;
  std::vector<double> raw_e0;
};

std::string fmt_num(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::ostringstream os;
    os << static_cast<long long>(v);
    return os.str();
  }
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

VectorXd expand_grouped(const VectorXd& grouped_log, const std::vector<AgeGroup>& scheme) {
  VectorXd out(kScheduleAges);
  for (size_t g = 0; g < scheme.size(); ++g)
    for (int x = scheme[g].lower; x <= scheme[g].upper; ++x)
      out(x) = grouped_log(static_cast<int>(g));
  return out;
}

}  // namespace

StudyResult run_study(const StudyConfig& config_in, const SourceLibrary& library) {
  StudyConfig cfg = config_in;
  cfg.finalize();

  const std::string ref_code = "SYNREF";
  const Source& ref = library.find(ref_code, Sex::male);
  RateMatrix ref_rates = to_rates(ref.deaths, ref.exposure);
  TrueWorld world = build_true_world(ref_rates, ref.exposure, cfg.years, default_brass_params());
  const int t_target = world.year_index(cfg.target_year);
  const auto scheme = canonical_grouping();

  // build each required knowledge artifact once
  struct Artifacts {
    StandardSchedule standard;
    DsplineCalibration calibration;
    PCBasis pc_basis;
  };
  std::vector<Artifacts> artifacts(cfg.methods.size());
  const TopalsBasis topals_basis = TopalsBasis::make();
  const DsplineBasis dspline_basis = DsplineBasis::make();
  bool any_svd = false;
  for (size_t m = 0; m < cfg.methods.size(); ++m) {
    const MethodSpec& spec = cfg.methods[m];
    DkRecipe recipe = study_recipe(spec.family, spec.dk, spec.estimator, ref_code);
    DemographicKnowledge dk = assemble_dk(recipe, library, cfg.smoother);
    switch (spec.family) {
      case MethodFamily::topals: artifacts[m].standard = std::get<StandardSchedule>(dk); break;
      case MethodFamily::dsplines:
        artifacts[m].calibration = std::get<DsplineCalibration>(dk);
        break;
      case MethodFamily::svd:
        artifacts[m].pc_basis = std::get<PCBasis>(dk);
        any_svd = true;
        break;
    }
  }

  StudyResult result;
  result.config = cfg;
  result.world = world;

  const int n_regions_cfg = static_cast<int>(cfg.regions.size());
  const int n_methods = static_cast<int>(cfg.methods.size());

  for (size_t ei = 0; ei < cfg.exposures.size(); ++ei) {
    const double total = cfg.exposures[ei];
    const VectorXd n_single = world.single_year_exposure(total, cfg.target_year);
    const VectorXd n_grouped_target = world.grouped_exposure(total, cfg.target_year);

    std::vector<RepOutcome> outcomes(cfg.n_sim);

    auto run_replicate = [&](int r) {
      const std::uint64_t rep_seed =
          Rng::stream(cfg.master_seed, {static_cast<std::uint64_t>(ei),
                                        static_cast<std::uint64_t>(r)})
              .next_u64();
      RepOutcome out;
      out.fits.assign(n_regions_cfg, std::vector<FitOutcome>(n_methods));
      out.raw_e0.assign(n_regions_cfg, 0.0);

      SimulatedDataset single = simulate_single_year(world, total, rep_seed);

      // one posterior run per SVD method serves all regions
      std::vector<PosteriorSummary> svd_summaries(n_methods);
      std::vector<bool> svd_passed(n_methods, false);
      if (any_svd) {
        SimulatedDataset grouped = simulate_grouped(world, total, rep_seed);
        GroupedPanel panel;
        panel.scheme = scheme;
        panel.years = cfg.years;
        panel.deaths = grouped.deaths_grouped;
        panel.exposure.assign(world.n_regions(), MatrixXd(scheme.size(), cfg.years.size()));
        for (int a = 0; a < world.n_regions(); ++a)
          for (size_t t = 0; t < cfg.years.size(); ++t)
            panel.exposure[a].col(static_cast<int>(t)) =
                world.grouped_exposure(total, cfg.years[t]);
        for (int m = 0; m < n_methods; ++m) {
          if (cfg.methods[m].family != MethodFamily::svd) continue;
          SamplerConfig sampler =
              cfg.sampler_per_exposure ? SamplerConfig::for_exposure(total) : cfg.sampler;
          sampler.seed = rep_seed;
          svd_summaries[m] = sample_posterior(panel, artifacts[m].pc_basis, sampler);
          svd_passed[m] = run_checks(svd_summaries[m], sampler).passed;
        }
      }

      for (int ri = 0; ri < n_regions_cfg; ++ri) {
        const int region = cfg.regions[ri];
        const VectorXd d = single.deaths_single[region].col(t_target);

        VectorXd m_raw = d.array() / n_single.array();
        out.raw_e0[ri] = partial_e0(m_raw);

        for (int m = 0; m < n_methods; ++m) {
          const MethodSpec& spec = cfg.methods[m];
          FitOutcome& fo = out.fits[ri][m];
          try {
            if (spec.family == MethodFamily::topals) {
              TopalsFit fit;
              if (spec.input == InputKind::single_year) {
                fit = fit_topals_single(d, n_single, artifacts[m].standard, topals_basis);
              } else {
                auto [dg, ng] = aggregate_counts(d, n_single, scheme);
                fit = fit_topals_grouped(dg, ng, artifacts[m].standard, topals_basis, scheme);
              }
              fo.ok = fit.converged;
              fo.point = fit.log_rates;
              fo.lower = fit.lower;
              fo.upper = fit.upper;
            } else if (spec.family == MethodFamily::dsplines) {
              DsplineFit fit;
              if (spec.input == InputKind::single_year) {
                fit = fit_dspline(d, n_single, artifacts[m].calibration, dspline_basis,
                                  InputKind::single_year);
              } else {
                auto [dg, ng] = aggregate_counts(d, n_single, scheme);
                fit = fit_dspline(dg, ng, artifacts[m].calibration, dspline_basis,
                                  InputKind::grouped, scheme);
              }
              fo.ok = fit.converged;
              fo.point = fit.log_rates;
              fo.lower = fit.lower;
              fo.upper = fit.upper;
            } else {
              const PosteriorSummary& s = svd_summaries[m];
              const int G = static_cast<int>(scheme.size());
              fo.point.resize(G);
              fo.lower.resize(G);
              fo.upper.resize(G);
              for (int g = 0; g < G; ++g) {
                fo.point(g) = s.median[region](g, t_target);
                fo.lower(g) = s.lower[region](g, t_target);
                fo.upper(g) = s.upper[region](g, t_target);
              }
              fo.ok = svd_passed[m];
            }
            if (fo.ok) {
              const VectorXd log_m = spec.family == MethodFamily::svd
                                         ? expand_grouped(fo.point, scheme)
                                         : fo.point;
              fo.e0 = partial_e0(log_m.array().exp());
            }
          } catch (const std::exception&) {
            fo.ok = false;
          }
        }
      }
      outcomes[r] = std::move(out);
    };

    if (cfg.threads == 1) {
      for (int r = 0; r < cfg.n_sim; ++r) run_replicate(r);
    } else {
      std::vector<std::thread> pool;
      for (int t0 = 0; t0 < cfg.threads; ++t0)
        pool.emplace_back([&, t0] {
          for (int r = t0; r < cfg.n_sim; r += cfg.threads) run_replicate(r);
        });
      for (auto& th : pool) th.join();
    }

    // deterministic ordered reduction
    ExposureCell cell;
    cell.exposure = total;
    for (int ri = 0; ri < n_regions_cfg; ++ri) {
      const int region = cfg.regions[ri];
      RegionCell rc;
      rc.region = region;
      const VectorXd truth_single = world.region_log_rates[region].col(t_target);
      rc.truth_e0 = partial_e0(truth_single.array().exp());
      rc.raw_e0.resize(cfg.n_sim);
      for (int r = 0; r < cfg.n_sim; ++r) rc.raw_e0(r) = outcomes[r].raw_e0[ri];
      rc.raw_e0_box = summarize_e0(rc.raw_e0, rc.truth_e0);

      for (int m = 0; m < n_methods; ++m) {
        const MethodSpec& spec = cfg.methods[m];
        MethodCell mc;
        mc.spec = spec;
        if (spec.family == MethodFamily::svd) {
          mc.truth = world.grouped_truth_rates(region, cfg.target_year).array().log();
          for (const auto& g : scheme) mc.target_labels.push_back(g.label);
        } else {
          mc.truth = truth_single;
          for (int x = 0; x < kScheduleAges; ++x)
            mc.target_labels.push_back(std::to_string(x));
        }
        const int n_targets = static_cast<int>(mc.truth.size());

        std::vector<int> included;
        for (int r = 0; r < cfg.n_sim; ++r)
          if (outcomes[r].fits[ri][m].ok) included.push_back(r);
        mc.n_included = static_cast<int>(included.size());
        mc.n_excluded = cfg.n_sim - mc.n_included;

        mc.bias_v = VectorXd::Constant(n_targets, std::nan(""));
        mc.emp_se_v = mc.bias_v;
        mc.rmse_v = mc.bias_v;
        mc.cov_v = mc.bias_v;
        mc.wid_v = mc.bias_v;
        if (!included.empty()) {
          VectorXd est(mc.n_included), lo(mc.n_included), up(mc.n_included);
          for (int j = 0; j < n_targets; ++j) {
            for (int k = 0; k < mc.n_included; ++k) {
              const FitOutcome& fo = outcomes[included[k]].fits[ri][m];
              est(k) = fo.point(j);
              lo(k) = fo.lower(j);
              up(k) = fo.upper(j);
            }
            mc.bias_v(j) = bias(est, mc.truth(j));
            if (mc.n_included >= 2) mc.emp_se_v(j) = emp_se(est);
            mc.rmse_v(j) = rmse(est, mc.truth(j));
            mc.cov_v(j) = coverage(lo, up, mc.truth(j));
            mc.wid_v(j) = width(lo, up);
          }
          mc.e0.resize(mc.n_included);
          for (int k = 0; k < mc.n_included; ++k)
            mc.e0(k) = outcomes[included[k]].fits[ri][m].e0;
          mc.e0_box = summarize_e0(mc.e0, rc.truth_e0);
        }
        rc.methods.push_back(std::move(mc));
      }
      cell.regions.push_back(std::move(rc));
    }
    result.cells.push_back(std::move(cell));
  }
  return result;
}

namespace {

void write_metric_rows(std::ostream& out, const StudyResult& res) {
  out << "method,dk,exposure,region,year,age_or_group,measure,value,n_effective\n";
  out << std::setprecision(17);
  static const char* names[5] = {"bias", "empSE", "RMSE", "covCI", "widCI"};
  for (const auto& cell : res.cells) {
    for (const auto& rc : cell.regions) {
      for (const auto& mc : rc.methods) {
        const VectorXd* vals[5] = {&mc.bias_v, &mc.emp_se_v, &mc.rmse_v, &mc.cov_v, &mc.wid_v};
        for (int w = 0; w < 5; ++w) {
          for (int j = 0; j < mc.truth.size(); ++j) {
            out << mc.spec.name() << ',' << to_string(mc.spec.dk) << ','
                << fmt_num(cell.exposure) << ',' << (rc.region + 1) << ','
                << res.config.target_year << ',' << mc.target_labels[j] << ',' << names[w]
                << ',';
            const double v = (*vals[w])(j);
            if (std::isnan(v))
              out << "NA";
            else
              out << v;
            out << ',' << mc.n_included << '\n';
          }
        }
      }
    }
  }
}

void write_e0_rows(std::ostream& out, const StudyResult& res) {
  out << "method,dk,exposure,region,min,q1,median,q3,max,truth,n\n";
  out << std::setprecision(17);
  auto row = [&](const std::string& method, const std::string& dk, double exposure, int region,
                 const BoxSummary& b) {
    out << method << ',' << dk << ',' << fmt_num(exposure) << ',' << (region + 1) << ','
        << b.min << ',' << b.q1 << ',' << b.median << ',' << b.q3 << ',' << b.max << ','
        << b.truth << ',' << b.n << '\n';
  };
  for (const auto& cell : res.cells) {
    for (const auto& rc : cell.regions) {
      row("raw", "", cell.exposure, rc.region, rc.raw_e0_box);
      for (const auto& mc : rc.methods)
        if (mc.n_included > 0)
          row(mc.spec.name(), to_string(mc.spec.dk), cell.exposure, rc.region, mc.e0_box);
    }
  }
}

}  // namespace

void write_study_outputs(const StudyResult& res) {
  namespace fs = std::filesystem;
  const std::string dir = res.config.output_dir;
  fs::create_directories(dir);

  std::ofstream metrics(dir + "/metrics.csv");
  write_metric_rows(metrics, res);
  std::ofstream e0(dir + "/e0.csv");
  write_e0_rows(e0, res);

  nlohmann::json j;
  j["master_seed"] = res.config.master_seed;
  j["n_sim"] = res.config.n_sim;
  j["target_year"] = res.config.target_year;
  j["exposures"] = res.config.exposures;
  j["width_definition"] = "mean |upper - lower| of pointwise 95% bounds on the log-rate scale";
  for (int r : res.config.regions) j["regions"].push_back(r + 1);
  for (const auto& m : res.config.methods)
    j["methods"].push_back(m.name() + "/" + to_string(m.dk));
  for (const auto& cell : res.cells) {
    for (const auto& rc : cell.regions) {
      for (const auto& mc : rc.methods) {
        nlohmann::json e;
        e["method"] = mc.spec.name();
        e["dk"] = to_string(mc.spec.dk);
        e["exposure"] = cell.exposure;
        e["region"] = rc.region + 1;
        e["included"] = mc.n_included;
        e["excluded"] = mc.n_excluded;
        j["cells"].push_back(e);
      }
    }
  }
  std::ofstream manifest(dir + "/study_manifest.json");
  manifest << j.dump(2) << '\n';

  emit_plot_data(res, dir);
}

void emit_plot_data(const StudyResult& res, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  std::ofstream panels(directory + "/performance_vs_age.csv");
  write_metric_rows(panels, res);
  std::ofstream boxes(directory + "/e0_boxplots.csv");
  write_e0_rows(boxes, res);
}

}  // namespace sae
