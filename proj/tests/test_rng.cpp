#include <doctest.h>

#include <cmath>

#include "sae/rng.hpp"

using namespace sae;

TEST_CASE("identical seeds give identical sequences") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams with different id paths decorrelate") {
  Rng a = Rng::stream(42, {1, 2});
  Rng b = Rng::stream(42, {1, 3});
  Rng c = Rng::stream(42, {1, 2});
  CHECK(a.next_u64() != b.next_u64());
  Rng a2 = Rng::stream(42, {1, 2});
  CHECK(a2.next_u64() == c.next_u64());
}

TEST_CASE("uniform stays in range and covers it") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-3.0, 5.5);
    CHECK(u >= -3.0);
    CHECK(u < 5.5);
  }
}

TEST_CASE("normal moments match the standard normal") {
  Rng rng(17);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);        // se ~ 0.0022
  CHECK(std::abs(var - 1.0) < 0.02);   // se ~ 0.0032
}

TEST_CASE("poisson moments match in both sampling regimes") {
  for (double mean : {0.05, 4.2, 300.0}) {
    Rng rng(31 + static_cast<std::uint64_t>(mean * 100));
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double k = static_cast<double>(rng.poisson(mean));
      CHECK(k >= 0.0);
      sum += k;
      sum2 += k * k;
    }
    const double m = sum / n;
    const double v = sum2 / n - m * m;
    const double se_mean = std::sqrt(mean / n);
    CHECK(std::abs(m - mean) < 6.0 * se_mean);
    CHECK(std::abs(v - mean) < 0.05 * mean + 6.0 * se_mean);
  }
}

TEST_CASE("poisson of zero mean is always zero") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) CHECK(rng.poisson(0.0) == 0);
}
