#include "sae/lifetable.hpp"

#include <cmath>

namespace sae {

std::vector<AgeGroup> canonical_grouping() {
  std::vector<AgeGroup> g;
  g.push_back({"<1", 0, 0});
  g.push_back({"1-4", 1, 4});
  for (int lo = 5; lo <= 95; lo += 5) {
    g.push_back({std::to_string(lo) + "-" + std::to_string(lo + 4), lo, lo + 4});
  }
  return g;
}

void validate_grouping(const std::vector<AgeGroup>& scheme) {
  if (scheme.empty()) throw std::invalid_argument("age grouping is empty");
  int expect = 0;
  for (const auto& g : scheme) {
    if (g.lower != expect || g.upper < g.lower)
      throw std::invalid_argument("age grouping has a gap or overlap at age " +
                                  std::to_string(expect));
    expect = g.upper + 1;
  }
  if (expect != kScheduleAges)
    throw std::invalid_argument("age grouping does not end at age 99");
}

Survivorship rates_to_survivorship(const VectorXd& m) {
  if (m.size() != kScheduleAges)
    throw std::invalid_argument("expected rates for ages 0..99");
  Survivorship s;
  s.l.resize(kScheduleAges + 1);
  s.l(0) = 1.0;
  for (int x = 0; x < kScheduleAges; ++x) {
    if (m(x) < 0.0) throw std::invalid_argument("negative mortality rate at age " + std::to_string(x));
    s.l(x + 1) = s.l(x) * std::exp(-m(x));
  }
  return s;
}

VectorXd survivorship_to_rates(const Survivorship& s) {
  if (s.l.size() != kScheduleAges + 1)
    throw std::invalid_argument("expected survivorship for ages 0..100");
  VectorXd m(kScheduleAges);
  for (int x = 0; x < kScheduleAges; ++x) {
    if (s.l(x + 1) > s.l(x))
      throw std::invalid_argument("survivorship increases at age " + std::to_string(x + 1));
    if (s.l(x) <= 0.0) throw std::invalid_argument("non-positive survivorship");
    m(x) = -std::log(s.l(x + 1) / s.l(x));
  }
  return m;
}

double partial_e0(const VectorXd& m) {
  Survivorship s = rates_to_survivorship(m);
  double e0 = 0.0;
  for (int x = 0; x < kScheduleAges; ++x) {
    // (1 - exp(-m))/m, with limit 1 as m -> 0
    double f = m(x) > 0.0 ? -std::expm1(-m(x)) / m(x) : 1.0;
    e0 += s.l(x) * f;
  }
  return e0;
}

VectorXd group_rates(const VectorXd& m, const std::vector<AgeGroup>& scheme) {
  validate_grouping(scheme);
  if (m.size() != kScheduleAges)
    throw std::invalid_argument("expected rates for ages 0..99");
  VectorXd out(static_cast<int>(scheme.size()));
  for (size_t g = 0; g < scheme.size(); ++g) {
    out(static_cast<int>(g)) =
        m.segment(scheme[g].lower, scheme[g].width()).mean();
  }
  return out;
}

std::pair<VectorXd, VectorXd> aggregate_counts(const VectorXd& d, const VectorXd& n,
                                               const std::vector<AgeGroup>& scheme) {
  validate_grouping(scheme);
  if (d.size() != kScheduleAges || n.size() != kScheduleAges)
    throw std::invalid_argument("expected counts for ages 0..99");
  const int G = static_cast<int>(scheme.size());
  VectorXd dg(G), ng(G);
  for (int g = 0; g < G; ++g) {
    dg(g) = d.segment(scheme[g].lower, scheme[g].width()).sum();
    ng(g) = n.segment(scheme[g].lower, scheme[g].width()).sum();
  }
  return {dg, ng};
}

}  // namespace sae
