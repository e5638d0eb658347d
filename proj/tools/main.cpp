// Command-line surface: ingest HMD files, build knowledge artifacts, simulate
// datasets, fit single schedules, run the full study grid, and re-emit plot
// data from a finished study directory.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "sae/hmd.hpp"
#include "sae/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_output(const std::string& path) {
  const char* root = std::getenv("SAE_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

sae::MethodSpec parse_method_spec(const std::string& method, const std::string& dk,
                                  bool grouped) {
  sae::MethodSpec spec;
  std::string m = method;
  for (char& c : m) c = static_cast<char>(std::tolower(c));
  if (m == "topals") {
    spec.family = sae::MethodFamily::topals;
  } else if (m == "svd") {
    spec.family = sae::MethodFamily::svd;
  } else {
    spec.family = sae::MethodFamily::dsplines;
    spec.estimator = sae::dspline_kind_from_string(method);
  }
  if (dk == "dk1")
    spec.dk = sae::DkKind::dk1;
  else if (dk == "dk2")
    spec.dk = sae::DkKind::dk2;
  else if (dk == "dk3")
    spec.dk = sae::DkKind::dk3;
  else
    throw std::invalid_argument("unknown dk kind: " + dk);
  spec.input = grouped ? sae::InputKind::grouped : sae::InputKind::single_year;
  return spec;
}

void apply_config_file(sae::StudyConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);
  if (j.contains("n_sim")) cfg.n_sim = j["n_sim"].get<int>();
  if (j.contains("exposures")) cfg.exposures = j["exposures"].get<std::vector<double>>();
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("target_year")) cfg.target_year = j["target_year"].get<int>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("regions")) {
    cfg.regions.clear();
    for (int r : j["regions"].get<std::vector<int>>()) cfg.regions.push_back(r - 1);
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"])
      cfg.methods.push_back(parse_method_spec(m.value("method", "topals"),
                                              m.value("dk", "dk1"),
                                              m.value("input", "single") == "grouped"));
  }
}

int cmd_ingest(const std::string& deaths_path, const std::string& exposure_path,
               const std::string& sex, const std::string& code, const std::string& out_dir) {
  const sae::Sex s = sae::sex_from_string(sex);
  std::ifstream din(deaths_path), ein(exposure_path);
  if (!din) throw std::runtime_error("cannot open " + deaths_path);
  if (!ein) throw std::runtime_error("cannot open " + exposure_path);
  sae::AgeYearTable deaths = sae::parse_hmd_table(din, sae::Measure::deaths, s, code);
  sae::AgeYearTable exposure = sae::parse_hmd_table(ein, sae::Measure::exposure, s, code);
  const std::string dir = resolve_output(out_dir);
  fs::create_directories(dir);
  std::ofstream dout(dir + "/deaths.csv"), eout(dir + "/exposure.csv");
  sae::write_table_csv(dout, deaths);
  sae::write_table_csv(eout, exposure);
  std::cout << "ingested " << code << "/" << sex << ": " << deaths.years.size() << " years\n";
  return 0;
}

int cmd_knowledge(const std::string& method, const std::string& dk,
                  const std::string& estimator, const std::string& out_dir) {
  sae::MethodSpec spec = parse_method_spec(method == "dsplines" ? estimator : method, dk, false);
  sae::DkRecipe recipe = sae::study_recipe(spec.family, spec.dk, spec.estimator);
  sae::SourceLibrary library = sae::build_synthetic_library();
  sae::DemographicKnowledge art =
      sae::assemble_dk(recipe, library, sae::SmootherConfig::defaults());
  sae::save_knowledge(art, resolve_output(out_dir));
  std::cout << "knowledge artifact written to " << resolve_output(out_dir) << "\n";
  return 0;
}

sae::TrueWorld default_world(const sae::SourceLibrary& library) {
  const sae::Source& ref = library.find("SYNREF", sae::Sex::male);
  sae::RateMatrix rates = sae::to_rates(ref.deaths, ref.exposure);
  std::vector<int> years;
  for (int y = 1995; y <= 2005; ++y) years.push_back(y);
  return sae::build_true_world(rates, ref.exposure, years, sae::default_brass_params());
}

int cmd_simulate(double exposure, std::uint64_t seed, int replicate, bool grouped,
                 const std::string& out_path) {
  sae::SourceLibrary library = sae::build_synthetic_library();
  sae::TrueWorld world = default_world(library);
  sae::SimulatedDataset data = grouped ? sae::simulate_grouped(world, exposure, seed)
                                       : sae::simulate_single_year(world, exposure, seed);
  const std::string path = resolve_output(out_path);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  sae::write_dataset_csv(out, world, data, replicate, grouped);
  std::cout << "dataset written to " << path << "\n";
  return 0;
}

int cmd_fit(const std::string& method, const std::string& dk, bool grouped, double exposure,
            std::uint64_t seed, int region, int year, const std::string& out_path) {
  sae::MethodSpec spec = parse_method_spec(method, dk, grouped);
  if (spec.family == sae::MethodFamily::svd)
    throw std::runtime_error("use `study` for the sampler-based model");
  sae::SourceLibrary library = sae::build_synthetic_library();
  sae::TrueWorld world = default_world(library);
  sae::SimulatedDataset data = sae::simulate_single_year(world, exposure, seed);
  const int t = world.year_index(year);
  const Eigen::VectorXd d = data.deaths_single[region - 1].col(t);
  const Eigen::VectorXd n = world.single_year_exposure(exposure, year);
  const auto scheme = sae::canonical_grouping();
  sae::DkRecipe recipe = sae::study_recipe(spec.family, spec.dk, spec.estimator);
  sae::DemographicKnowledge art =
      sae::assemble_dk(recipe, library, sae::SmootherConfig::defaults());

  const std::string path = resolve_output(out_path);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (spec.family == sae::MethodFamily::topals) {
    const auto& standard = std::get<sae::StandardSchedule>(art);
    sae::TopalsBasis basis = sae::TopalsBasis::make();
    sae::TopalsFit fit;
    if (grouped) {
      auto [dg, ng] = sae::aggregate_counts(d, n, scheme);
      fit = sae::fit_topals_grouped(dg, ng, standard, basis, scheme);
    } else {
      fit = sae::fit_topals_single(d, n, standard, basis);
    }
    sae::write_fit_csv(out, fit, region, year, spec.name());
    if (!fit.converged) throw std::runtime_error("fit did not converge");
  } else {
    const auto& calib = std::get<sae::DsplineCalibration>(art);
    sae::DsplineBasis basis = sae::DsplineBasis::make();
    sae::DsplineFit fit;
    if (grouped) {
      auto [dg, ng] = sae::aggregate_counts(d, n, scheme);
      fit = sae::fit_dspline(dg, ng, calib, basis, sae::InputKind::grouped, scheme);
    } else {
      fit = sae::fit_dspline(d, n, calib, basis, sae::InputKind::single_year);
    }
    sae::TopalsFit shim;  // same CSV row shape
    shim.log_rates = fit.log_rates;
    shim.se = fit.se;
    shim.lower = fit.lower;
    shim.upper = fit.upper;
    shim.iterations = fit.iterations;
    shim.converged = fit.converged;
    sae::write_fit_csv(out, shim, region, year, spec.name());
    if (!fit.converged) throw std::runtime_error("fit did not converge");
  }
  std::cout << "fit written to " << path << "\n";
  return 0;
}

int cmd_study(sae::StudyConfig cfg) {
  cfg.output_dir = resolve_output(cfg.output_dir);
  sae::SourceLibrary library = sae::build_synthetic_library();
  sae::StudyResult result = sae::run_study(cfg, library);
  result.config.output_dir = cfg.output_dir;
  sae::write_study_outputs(result);
  std::cout << "study outputs written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_report(const std::string& study_dir) {
  const std::string dir = resolve_output(study_dir);
  auto copy = [&](const std::string& from, const std::string& to) {
    std::ifstream in(dir + "/" + from);
    if (!in) throw std::runtime_error("missing " + from + " in " + dir);
    std::ofstream out(dir + "/" + to);
    out << in.rdbuf();
  };
  copy("metrics.csv", "performance_vs_age.csv");
  copy("e0.csv", "e0_boxplots.csv");
  std::cout << "plot data refreshed in " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-area mortality estimation toolkit"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse HMD 1x1 files into cached CSV tables");
  std::string in_deaths, in_exposure, in_sex = "male", in_code = "POP", in_out = "ingested";
  ingest->add_option("--deaths", in_deaths, "HMD deaths file")->required();
  ingest->add_option("--exposure", in_exposure, "HMD exposure file")->required();
  ingest->add_option("--sex", in_sex, "female|male|total");
  ingest->add_option("--code", in_code, "population code");
  ingest->add_option("--out", in_out, "output directory");

  // knowledge
  auto* knowledge = app.add_subcommand("knowledge", "Build a demographic-knowledge artifact");
  std::string kn_method = "topals", kn_dk = "dk1", kn_estimator = "D1", kn_out = "knowledge_out";
  knowledge->add_option("--method", kn_method, "topals|dsplines|svd");
  knowledge->add_option("--dk", kn_dk, "dk1|dk2|dk3");
  knowledge->add_option("--estimator", kn_estimator, "D1|D2|DLC (dsplines)");
  knowledge->add_option("--out", kn_out, "output directory");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Emit one simulated dataset as CSV");
  double sim_exposure = 10000.0;
  std::uint64_t sim_seed = 1;
  int sim_replicate = 1;
  bool sim_grouped = false;
  std::string sim_out = "dataset.csv";
  simulate->add_option("--exposure", sim_exposure, "scenario exposure total");
  simulate->add_option("--seed", sim_seed, "replicate seed");
  simulate->add_option("--replicate", sim_replicate, "replicate id for the CSV");
  simulate->add_flag("--grouped", sim_grouped, "grouped simulation path");
  simulate->add_option("--out", sim_out, "output file");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit one method to one simulated dataset");
  std::string fit_method = "topals", fit_dk = "dk1", fit_out = "fit.csv";
  bool fit_grouped = false;
  double fit_exposure = 10000.0;
  std::uint64_t fit_seed = 1;
  int fit_region = 9, fit_year = 2000;
  fit->add_option("--method", fit_method, "topals|D1|D2|DLC");
  fit->add_option("--dk", fit_dk, "dk1|dk2|dk3");
  fit->add_flag("--grouped-input", fit_grouped, "fit to aggregated counts");
  fit->add_option("--exposure", fit_exposure, "scenario exposure total");
  fit->add_option("--seed", fit_seed, "replicate seed");
  fit->add_option("--region", fit_region, "region (1-20)");
  fit->add_option("--year", fit_year, "target year");
  fit->add_option("--out", fit_out, "output file");

  // study
  auto* study = app.add_subcommand("study", "Run the full simulation study grid");
  sae::StudyConfig cfg;
  std::string study_config_path;
  study->add_option("--config", study_config_path, "JSON config file");
  study->add_option("--n-sim", cfg.n_sim, "replicates per scenario");
  study->add_option("--seed", cfg.master_seed, "master seed");
  study->add_option("--threads", cfg.threads, "replicate-level parallelism");
  study->add_option("--target-year", cfg.target_year, "target year");
  study->add_option("--exposures", cfg.exposures, "scenario exposure totals");
  study->add_option("--out", cfg.output_dir, "output directory");

  // report
  auto* report = app.add_subcommand("report", "Re-emit plot data from a study directory");
  std::string report_dir = "study_out";
  report->add_option("--study", report_dir, "study output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(in_deaths, in_exposure, in_sex, in_code, in_out);
    if (*knowledge) return cmd_knowledge(kn_method, kn_dk, kn_estimator, kn_out);
    if (*simulate) return cmd_simulate(sim_exposure, sim_seed, sim_replicate, sim_grouped, sim_out);
    if (*fit)
      return cmd_fit(fit_method, fit_dk, fit_grouped, fit_exposure, fit_seed, fit_region,
                     fit_year, fit_out);
    if (*study) {
      // config file first, then flags the user actually passed win
      if (!study_config_path.empty()) {
        sae::StudyConfig from_file;
        apply_config_file(from_file, study_config_path);
        if (study->count("--n-sim") == 0) cfg.n_sim = from_file.n_sim;
        if (study->count("--seed") == 0) cfg.master_seed = from_file.master_seed;
        if (study->count("--threads") == 0) cfg.threads = from_file.threads;
        if (study->count("--target-year") == 0) cfg.target_year = from_file.target_year;
        if (study->count("--exposures") == 0) cfg.exposures = from_file.exposures;
        if (study->count("--out") == 0) cfg.output_dir = from_file.output_dir;
        cfg.regions = from_file.regions;
        cfg.methods = from_file.methods;
      }
      return cmd_study(cfg);
    }
    if (*report) return cmd_report(report_dir);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
