#include "sae/hmd.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <iomanip>

namespace sae {

std::string to_string(Measure m) {
  return m == Measure::deaths ? "deaths" : "exposure";
}

std::string to_string(Sex s) {
  switch (s) {
    case Sex::female: return "female";
    case Sex::male: return "male";
    default: return "total";
  }
}

Sex sex_from_string(const std::string& s) {
  if (s == "female" || s == "f") return Sex::female;
  if (s == "male" || s == "m") return Sex::male;
  if (s == "total" || s == "t") return Sex::total;
  throw std::invalid_argument("unknown sex: " + s);
}

int AgeYearTable::age_index(int age) const {
  auto it = std::find(ages.begin(), ages.end(), age);
  if (it == ages.end()) throw std::out_of_range("age not in table: " + std::to_string(age));
  return static_cast<int>(it - ages.begin());
}

int AgeYearTable::year_index(int year) const {
  auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) throw std::out_of_range("year not in table: " + std::to_string(year));
  return static_cast<int>(it - years.begin());
}

void AgeYearTable::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(ages.size()) ||
      values.cols() != static_cast<Eigen::Index>(years.size()))
    throw std::invalid_argument("table dimensions do not match age/year grids");
  for (size_t i = 1; i < ages.size(); ++i) {
    if (ages[i] != ages[i - 1] + 1)
      throw std::invalid_argument("ages are not contiguous single years");
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      if (!missing(i, j) && values(i, j) < 0.0)
        throw std::invalid_argument("negative value in table");
}

int RateMatrix::age_index(int age) const {
  auto it = std::find(ages.begin(), ages.end(), age);
  if (it == ages.end()) throw std::out_of_range("age not in rate matrix");
  return static_cast<int>(it - ages.begin());
}

int RateMatrix::year_index(int year) const {
  auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) throw std::out_of_range("year not in rate matrix: " + std::to_string(year));
  return static_cast<int>(it - years.begin());
}

VectorXd RateMatrix::year_slice(int year, int max_age) const {
  const int t = year_index(year);
  VectorXd out(max_age + 1);
  for (int a = 0; a <= max_age; ++a) {
    const int i = age_index(a);
    if (zero_deaths(i, t) || !std::isfinite(log_rates(i, t)))
      throw std::runtime_error("flagged cell at age " + std::to_string(a) + ", year " +
                               std::to_string(year));
    out(a) = log_rates(i, t);
  }
  return out;
}

namespace {

struct Row {
  int year;
  int age;
  bool open;
  double v[3];     // female, male, total
  bool miss[3];
};

bool parse_value(const std::string& tok, double& v, bool& miss) {
  if (tok == ".") {
    miss = true;
    v = 0.0;
    return true;
  }
  miss = false;
  try {
    size_t pos = 0;
    v = std::stod(tok, &pos);
    return pos == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

AgeYearTable parse_hmd_table(std::istream& in, Measure measure, Sex sex,
                             const std::string& population_code) {
  std::string line;
  bool header_seen = false;
  std::vector<Row> rows;
  std::set<std::pair<int, int>> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line
    if (!header_seen) {
      if (tok == "Year") header_seen = true;
      continue;
    }
    Row r{};
    try {
      r.year = std::stoi(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("malformed year on line " + std::to_string(lineno));
    }
    std::string age_tok;
    if (!(ls >> age_tok)) throw std::runtime_error("missing age on line " + std::to_string(lineno));
    if (!age_tok.empty() && age_tok.back() == '+') {
      r.open = true;
      age_tok.pop_back();
    }
    try {
      r.age = std::stoi(age_tok);
    } catch (const std::exception&) {
      throw std::runtime_error("malformed age on line " + std::to_string(lineno));
    }
    for (int k = 0; k < 3; ++k) {
      std::string vt;
      if (!(ls >> vt)) throw std::runtime_error("missing value column on line " + std::to_string(lineno));
      if (!parse_value(vt, r.v[k], r.miss[k]))
        throw std::runtime_error("malformed value '" + vt + "' on line " + std::to_string(lineno));
    }
    if (!seen.insert({r.year, r.age}).second)
      throw std::runtime_error("duplicate (year, age) pair: " + std::to_string(r.year) + ", " +
                               std::to_string(r.age));
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("no data rows");

  std::set<int> age_set, year_set;
  for (const auto& r : rows) {
    age_set.insert(r.age);
    year_set.insert(r.year);
  }
  AgeYearTable t;
  t.ages.assign(age_set.begin(), age_set.end());
  t.years.assign(year_set.begin(), year_set.end());
  for (size_t i = 1; i < t.ages.size(); ++i)
    if (t.ages[i] != t.ages[i - 1] + 1)
      throw std::runtime_error("non-contiguous ages in table");
  t.values = MatrixXd::Zero(t.ages.size(), t.years.size());
  t.missing.setZero(t.ages.size(), t.years.size());
  t.measure = measure;
  t.sex = sex;
  t.population_code = population_code;
  const int col = sex == Sex::female ? 0 : (sex == Sex::male ? 1 : 2);
  for (const auto& r : rows) {
    const int i = t.age_index(r.age);
    const int j = t.year_index(r.year);
    t.values(i, j) = r.v[col];
    t.missing(i, j) = r.miss[col] ? 1 : 0;
    if (r.open) {
      if (r.age != t.ages.back())
        throw std::runtime_error("open interval at a non-final age");
      t.open_ended = true;
    }
  }
  t.validate();
  return t;
}

void write_hmd_table(std::ostream& out, const AgeYearTable& female,
                     const AgeYearTable& male, const AgeYearTable& total) {
  if (female.ages != male.ages || female.ages != total.ages ||
      female.years != male.years || female.years != total.years)
    throw std::invalid_argument("sex tables do not share one grid");
  out << female.population_code << ", " << to_string(female.measure) << " (1x1)\n\n";
  out << "  Year          Age             Female            Male           Total\n";
  const AgeYearTable* tabs[3] = {&female, &male, &total};
  for (size_t j = 0; j < female.years.size(); ++j) {
    for (size_t i = 0; i < female.ages.size(); ++i) {
      std::string age_tok = std::to_string(female.ages[i]);
      if (female.open_ended && i + 1 == female.ages.size()) age_tok += "+";
      out << "  " << female.years[j] << "   " << age_tok;
      for (const auto* tab : tabs) {
        out << "   ";
        if (tab->missing(i, j)) {
          out << ".";
        } else {
          out << std::setprecision(15) << tab->values(i, j);
        }
      }
      out << "\n";
    }
  }
}

void write_table_csv(std::ostream& out, const AgeYearTable& table) {
  out << "population_code,sex,year,age,value\n";
  for (size_t j = 0; j < table.years.size(); ++j) {
    for (size_t i = 0; i < table.ages.size(); ++i) {
      out << table.population_code << "," << to_string(table.sex) << "," << table.years[j] << ","
          << table.ages[i] << ",";
      if (table.missing(i, j))
        out << ".";
      else
        out << std::setprecision(15) << table.values(i, j);
      out << "\n";
    }
  }
}

RateMatrix to_rates(const AgeYearTable& deaths, const AgeYearTable& exposure) {
  if (deaths.ages != exposure.ages || deaths.years != exposure.years)
    throw std::invalid_argument("deaths/exposure grid mismatch");
  RateMatrix r;
  r.ages = deaths.ages;
  r.years = deaths.years;
  r.population_code = deaths.population_code;
  r.sex = deaths.sex;
  r.log_rates = MatrixXd::Zero(deaths.values.rows(), deaths.values.cols());
  r.zero_deaths.setZero(deaths.values.rows(), deaths.values.cols());
  for (Eigen::Index i = 0; i < deaths.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < deaths.values.cols(); ++j) {
      if (deaths.missing(i, j) || exposure.missing(i, j)) {
        r.zero_deaths(i, j) = 1;
        r.log_rates(i, j) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (exposure.values(i, j) <= 0.0)
        throw std::runtime_error("non-positive exposure at age " + std::to_string(deaths.ages[i]) +
                                 ", year " + std::to_string(deaths.years[j]));
      if (deaths.values(i, j) <= 0.0) {
        r.zero_deaths(i, j) = 1;
        r.log_rates(i, j) = -std::numeric_limits<double>::infinity();
      } else {
        r.log_rates(i, j) = std::log(deaths.values(i, j) / exposure.values(i, j));
      }
    }
  }
  return r;
}

}  // namespace sae
