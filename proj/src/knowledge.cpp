#include "sae/knowledge.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sae/bspline.hpp"
#include "sae/csv.hpp"
#include "sae/lifetable.hpp"

namespace sae {

std::string to_string(DsplineKind k) {
  switch (k) {
    case DsplineKind::D1: return "D1";
    case DsplineKind::D2: return "D2";
    default: return "DLC";
  }
}

DsplineKind dspline_kind_from_string(const std::string& s) {
  if (s == "D1" || s == "d1") return DsplineKind::D1;
  if (s == "D2" || s == "d2") return DsplineKind::D2;
  if (s == "DLC" || s == "dlc") return DsplineKind::DLC;
  throw std::invalid_argument("unknown D-spline estimator: " + s);
}

std::string to_string(DkKind k) {
  switch (k) {
    case DkKind::dk1: return "dk1";
    case DkKind::dk2: return "dk2";
    default: return "dk3";
  }
}

MatrixXd regularized_inverse(const MatrixXd& V) {
  if (V.rows() != V.cols()) throw std::invalid_argument("covariance must be square");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(V);
  const VectorXd& ev = es.eigenvalues();
  const double largest = ev(ev.size() - 1);
  if (largest <= 0.0)
    throw std::runtime_error("covariance has no positive eigenvalue; cannot invert");
  MatrixXd Vr = V;
  if (ev(0) < 1e-10 * largest) {
    const double eps = 1e-8 * V.trace() / static_cast<double>(V.rows());
    Vr.diagonal().array() += eps;
  }
  return Vr.ldlt().solve(MatrixXd::Identity(V.rows(), V.cols()));
}

StandardSchedule build_standard(const AgeYearTable& deaths, const AgeYearTable& exposure, int year,
                                const SmootherConfig& smoother) {
  int ty;
  try {
    ty = deaths.year_index(year);
    exposure.year_index(year);
  } catch (const std::out_of_range&) {
    throw std::runtime_error("missing slice: year " + std::to_string(year) + " not in " +
                             deaths.population_code);
  }
  VectorXd d(kScheduleAges), n(kScheduleAges);
  for (int x = 0; x < kScheduleAges; ++x) {
    const int i = deaths.age_index(x);
    if (deaths.missing(i, ty) || exposure.missing(i, exposure.year_index(year)))
      throw std::runtime_error("missing cell in requested range: age " + std::to_string(x) +
                               ", year " + std::to_string(year));
    d(x) = deaths.values(i, ty);
    n(x) = exposure.values(exposure.age_index(x), exposure.year_index(year));
  }
  MortalitySchedule sched = smooth_schedule(d, n, smoother);
  StandardSchedule out;
  out.log_rates = sched.log_rates;
  out.provenance = deaths.population_code + "/" + to_string(deaths.sex) + "/" +
                   std::to_string(year) + " (smoothed)";
  return out;
}

DsplineCalibration build_dspline_calibration(const MatrixXd& M, DsplineKind kind,
                                             bool smooth_target) {
  const int omega = static_cast<int>(M.rows());
  const int L = static_cast<int>(M.cols());
  if (omega != kScheduleAges) throw std::invalid_argument("expected 100 ages in database");
  if (L < 2) throw std::invalid_argument("need at least two schedules for calibration");

  DsplineCalibration cal;
  cal.kind = kind;
  if (kind == DsplineKind::D1 || kind == DsplineKind::D2) {
    const int order = kind == DsplineKind::D1 ? 1 : 2;
    cal.D = difference_matrix(order, omega);
    cal.c = cal.D * M.rowwise().mean();
  } else {
    VectorXd a = M.rowwise().mean();
    MatrixXd X = M.colwise() - a;
    Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU);
    VectorXd b = svd.matrixU().col(0);
    cal.D = MatrixXd::Identity(omega, omega) - b * (b.transpose() * b).inverse() * b.transpose();
    cal.c = cal.D * a;
    cal.lc_baseline = a;
    cal.lc_deviation = b;
  }
  if (smooth_target) {
    cal.c = smooth_values(cal.c, 10.0);
    // keep the DLC target inside the projection's range; smoothing leaks a
    // component along the deviation direction that the residual can never match
    if (kind == DsplineKind::DLC) cal.c = cal.D * cal.c;
  }
  // second moment of the database residuals about the final target; centering
  // on c itself keeps the penalty consistent with the target the fits are
  // pulled toward (a smoothed c displaces the center, and that displacement
  // must count as spread, not as an impossible-to-satisfy constraint)
  MatrixXd resid = cal.D * M;
  resid.colwise() -= cal.c;
  cal.V = resid * resid.transpose() / static_cast<double>(L - 1);
  cal.V_inv = regularized_inverse(cal.V);
  return cal;
}

PCBasis build_pc_basis(const MatrixXd& schedules) {
  if (schedules.rows() < 3) throw std::invalid_argument("need at least three schedules");
  Eigen::BDCSVD<MatrixXd> svd(schedules, Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() < 3 || sv(2) <= 1e-10 * sv(0))
    throw std::runtime_error("fewer than three nonzero singular values");
  PCBasis basis;
  basis.V = svd.matrixV().leftCols(3);
  basis.singular_values = sv.head(3);
  if (basis.V(0, 0) > 0.0) basis.V.col(0) = -basis.V.col(0);
  return basis;
}

const Source& SourceLibrary::find(const std::string& code, Sex sex) const {
  for (const auto& s : sources)
    if (s.population_code == code && s.sex == sex) return s;
  throw std::runtime_error("source not in library: " + code + "/" + to_string(sex));
}

namespace {

bool is_excluded(const std::string& code, const std::vector<std::string>& excluded) {
  return std::find(excluded.begin(), excluded.end(), code) != excluded.end();
}

// explicitly requested sources must not be on the exclusion list; database
// scans silently skip excluded populations instead
void check_not_excluded(const std::string& code, const std::vector<std::string>& excluded) {
  if (is_excluded(code, excluded))
    throw std::runtime_error("source-exclusion violation: " + code +
                             " may not enter this knowledge artifact");
}

// Raw single-year log rates for one source-year; empty if any cell in the
// requested range is unusable (missing or zero deaths).
bool year_log_rates(const Source& src, int year, VectorXd& out) {
  int ty;
  try {
    ty = src.deaths.year_index(year);
  } catch (const std::out_of_range&) {
    return false;
  }
  out.resize(kScheduleAges);
  for (int x = 0; x < kScheduleAges; ++x) {
    const int i = src.deaths.age_index(x);
    const double d = src.deaths.values(i, ty);
    const double n = src.exposure.values(src.exposure.age_index(x), src.exposure.year_index(year));
    if (src.deaths.missing(i, ty) || n <= 0.0 || d <= 0.0) return false;
    out(x) = std::log(d / n);
  }
  return true;
}

MatrixXd collect_database(const DkRecipe& recipe, const SourceLibrary& library) {
  std::vector<VectorXd> cols;
  for (const auto& src : library.sources) {
    if (src.sex != recipe.sex) continue;
    if (is_excluded(src.population_code, recipe.excluded_codes)) continue;
    for (int year = recipe.year_from; year <= recipe.year_to; year += recipe.year_step) {
      VectorXd col;
      if (year_log_rates(src, year, col)) cols.push_back(col);
    }
  }
  if (cols.size() < 2)
    throw std::runtime_error("schedule database has fewer than two complete schedules");
  MatrixXd M(kScheduleAges, cols.size());
  for (size_t j = 0; j < cols.size(); ++j) M.col(j) = cols[j];
  return M;
}

VectorXd grouped_log_rates_from_counts(const VectorXd& d, const VectorXd& n) {
  auto [dg, ng] = aggregate_counts(d, n, canonical_grouping());
  if ((dg.array() <= 0.0).any())
    throw std::runtime_error("zero grouped death count in basis source");
  return (dg.array() / ng.array()).log();
}

}  // namespace

DemographicKnowledge assemble_dk(const DkRecipe& recipe, const SourceLibrary& library,
                                 const SmootherConfig& smoother) {
  switch (recipe.method) {
    case MethodFamily::topals: {
      check_not_excluded(recipe.standard_code, recipe.excluded_codes);
      const Source& src = library.find(recipe.standard_code, recipe.sex);
      StandardSchedule std_sched =
          build_standard(src.deaths, src.exposure, recipe.standard_year, smoother);
      std_sched.provenance = to_string(recipe.kind) + ": " + std_sched.provenance;
      return std_sched;
    }
    case MethodFamily::dsplines: {
      MatrixXd M = collect_database(recipe, library);
      DsplineCalibration cal = build_dspline_calibration(M, recipe.estimator);
      cal.provenance = to_string(recipe.kind) + ": " + std::to_string(M.cols()) +
                       " schedules, years " + std::to_string(recipe.year_from) + "-" +
                       std::to_string(recipe.year_to) + " step " + std::to_string(recipe.year_step);
      return cal;
    }
    case MethodFamily::svd: {
      std::vector<VectorXd> rows;
      if (!recipe.standard_code.empty()) {
        // national time-series mode: smooth each year, then group
        check_not_excluded(recipe.standard_code, recipe.excluded_codes);
        const Source& src = library.find(recipe.standard_code, recipe.sex);
        for (int year = recipe.year_from; year <= recipe.year_to; ++year) {
          StandardSchedule s = build_standard(src.deaths, src.exposure, year, smoother);
          VectorXd m = s.log_rates.array().exp();
          rows.push_back(group_rates(m, canonical_grouping()).array().log());
        }
      } else {
        for (const auto& src : library.sources) {
          if (src.sex != recipe.sex) continue;
          if (is_excluded(src.population_code, recipe.excluded_codes)) continue;
          for (int year = recipe.year_from; year <= recipe.year_to; year += recipe.year_step) {
            VectorXd logm;
            if (!year_log_rates(src, year, logm)) continue;
            VectorXd d(kScheduleAges), n(kScheduleAges);
            for (int x = 0; x < kScheduleAges; ++x) {
              n(x) = src.exposure.values(src.exposure.age_index(x), src.exposure.year_index(year));
              d(x) = src.deaths.values(src.deaths.age_index(x), src.deaths.year_index(year));
            }
            rows.push_back(grouped_log_rates_from_counts(d, n));
          }
        }
      }
      if (rows.size() < 3) throw std::runtime_error("too few schedules for a PC basis");
      MatrixXd X(rows.size(), rows.front().size());
      for (size_t i = 0; i < rows.size(); ++i) X.row(i) = rows[i].transpose();
      PCBasis basis = build_pc_basis(X);
      basis.provenance = to_string(recipe.kind) + ": " + std::to_string(rows.size()) +
                         " grouped schedules";
      return basis;
    }
  }
  throw std::logic_error("unreachable");
}

void save_knowledge(const DemographicKnowledge& dk, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  if (const auto* s = std::get_if<StandardSchedule>(&dk)) {
    manifest["type"] = "standard_schedule";
    manifest["provenance"] = s->provenance;
    write_vector_csv(directory + "/log_rates.csv", s->log_rates);
  } else if (const auto* c = std::get_if<DsplineCalibration>(&dk)) {
    manifest["type"] = "dspline_calibration";
    manifest["estimator"] = to_string(c->kind);
    manifest["provenance"] = c->provenance;
    write_matrix_csv(directory + "/D.csv", c->D);
    write_vector_csv(directory + "/c.csv", c->c);
    write_matrix_csv(directory + "/V.csv", c->V);
    if (c->kind == DsplineKind::DLC) {
      write_vector_csv(directory + "/lc_baseline.csv", c->lc_baseline);
      write_vector_csv(directory + "/lc_deviation.csv", c->lc_deviation);
    }
  } else {
    const auto& b = std::get<PCBasis>(dk);
    manifest["type"] = "pc_basis";
    manifest["provenance"] = b.provenance;
    manifest["singular_values"] = {b.singular_values(0), b.singular_values(1),
                                   b.singular_values(2)};
    write_matrix_csv(directory + "/V.csv", b.V);
  }
  std::ofstream out(directory + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

DemographicKnowledge load_knowledge(const std::string& directory) {
  std::ifstream in(directory + "/manifest.json");
  if (!in) throw std::runtime_error("no manifest in " + directory);
  nlohmann::json manifest = nlohmann::json::parse(in);
  const std::string type = manifest.at("type");
  if (type == "standard_schedule") {
    StandardSchedule s;
    s.log_rates = read_vector_csv(directory + "/log_rates.csv");
    s.provenance = manifest.value("provenance", "");
    return s;
  }
  if (type == "dspline_calibration") {
    DsplineCalibration c;
    c.kind = dspline_kind_from_string(manifest.at("estimator"));
    c.provenance = manifest.value("provenance", "");
    c.D = read_matrix_csv(directory + "/D.csv");
    c.c = read_vector_csv(directory + "/c.csv");
    c.V = read_matrix_csv(directory + "/V.csv");
    c.V_inv = regularized_inverse(c.V);
    if (c.kind == DsplineKind::DLC) {
      c.lc_baseline = read_vector_csv(directory + "/lc_baseline.csv");
      c.lc_deviation = read_vector_csv(directory + "/lc_deviation.csv");
    }
    return c;
  }
  if (type == "pc_basis") {
    PCBasis b;
    b.provenance = manifest.value("provenance", "");
    b.V = read_matrix_csv(directory + "/V.csv");
    auto sv = manifest.at("singular_values");
    for (int i = 0; i < 3; ++i) b.singular_values(i) = sv.at(i).get<double>();
    return b;
  }
  throw std::runtime_error("unknown knowledge type: " + type);
}

}  // namespace sae
