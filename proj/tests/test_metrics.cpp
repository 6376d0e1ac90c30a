// SPDX-License-Identifier: Apache-2.0
#include "dta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "dta/errors.hpp"
#include "dta/losses.hpp"
#include "dta/rng.hpp"
#include "dta/tensor.hpp"

using dta::concordance_index;
using dta::mse_metric;
using dta::r_squared_m;
using dta::Rng;

namespace {

// Independent pair enumeration, written in the forward i<j style so the
// loop structure differs from the implementation.
std::pair<double, int64_t> brute_ci(const std::vector<double>& p,
                                    const std::vector<double>& y) {
  double score = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    for (size_t j = i + 1; j < y.size(); ++j) {
      if (y[i] == y[j]) continue;
      const size_t hi = y[i] > y[j] ? i : j;
      const size_t lo = y[i] > y[j] ? j : i;
      ++pairs;
      if (p[hi] > p[lo]) score += 1.0;
      else if (p[hi] == p[lo]) score += 0.5;
    }
  }
  return {score / static_cast<double>(pairs), pairs};
}

// Raw-moment normal-equations oracle for the two determination scores.
std::pair<double, double> brute_r2_r20(const std::vector<double>& f,
                                       const std::vector<double>& y) {
  const double n = static_cast<double>(f.size());
  double sf = 0, sy = 0, sff = 0, syy = 0, sfy = 0;
  for (size_t i = 0; i < f.size(); ++i) {
    sf += f[i];
    sy += y[i];
    sff += f[i] * f[i];
    syy += y[i] * y[i];
    sfy += f[i] * y[i];
  }
  const double cov = sfy / n - (sf / n) * (sy / n);
  const double varf = sff / n - (sf / n) * (sf / n);
  const double vary = syy / n - (sy / n) * (sy / n);
  const double r2 = cov * cov / (varf * vary);
  const double k = sfy / sff;
  double sres = 0.0;
  for (size_t i = 0; i < f.size(); ++i) {
    const double e = y[i] - k * f[i];
    sres += e * e;
  }
  const double r20 = 1.0 - sres / (vary * n);
  return {r2, r20};
}

}  // namespace

TEST_CASE("concordance fixtures") {
  const std::vector<double> y = {1, 2, 3, 4};
  const std::vector<double> concordant = {0.1, 0.2, 0.3, 0.4};
  CHECK(concordance_index(concordant, y).ci == 1.0);
  const std::vector<double> reversed = {0.4, 0.3, 0.2, 0.1};
  CHECK(concordance_index(reversed, y).ci == 0.0);
  const std::vector<double> tied = {0.5, 0.5};
  const std::vector<double> y2 = {1, 2};
  CHECK(concordance_index(tied, y2).ci == 0.5);
  const std::vector<double> p3 = {1, 3, 2};
  const std::vector<double> y3 = {1, 2, 3};
  const auto r = concordance_index(p3, y3);
  CHECK(r.ci == 2.0 / 3.0);
  CHECK(r.comparable_pairs == 3);
}

TEST_CASE("concordance rejects degenerate input") {
  const std::vector<double> p = {1, 2};
  const std::vector<double> one = {1};
  CHECK_THROWS_AS((void)concordance_index(p, one), dta::DataError);
  CHECK_THROWS_AS((void)concordance_index(one, one), dta::DataError);
  const std::vector<double> same = {3, 3, 3};
  const std::vector<double> p3 = {1, 2, 3};
  try {
    (void)concordance_index(p3, same);
    FAIL_CHECK("expected DataError");
  } catch (const dta::DataError& e) {
    CHECK(std::string(e.what()).find("no comparable pairs") != std::string::npos);
  }
}

TEST_CASE("concordance equals brute-force enumeration on 100 random instances") {
  Rng rng(61);
  for (int iter = 0; iter < 100; ++iter) {
    const size_t n = 2 + rng.next_below(199);
    std::vector<double> p(n), y(n);
    // Coarse grids force plenty of ties in both vectors.
    for (auto& v : p) v = static_cast<double>(rng.next_below(32)) * 0.125;
    for (auto& v : y) v = static_cast<double>(rng.next_below(12)) * 0.25;
    bool distinct = false;
    for (size_t i = 1; i < n; ++i) distinct = distinct || y[i] != y[0];
    if (!distinct) y[0] += 1.0;
    const auto mine = concordance_index(p, y);
    const auto ref = brute_ci(p, y);
    CHECK(mine.ci == ref.first);
    CHECK(mine.comparable_pairs == ref.second);
  }
}

TEST_CASE("concordance is invariant under strictly increasing transforms") {
  Rng rng(63);
  std::vector<double> p(50), y(50);
  for (auto& v : p) v = static_cast<double>(rng.next_below(64)) * 0.0625 - 2.0;
  for (auto& v : y) v = static_cast<double>(rng.next_below(16)) * 0.5;
  y[0] = 9.0;
  auto transformed = p;
  for (auto& v : transformed) v = std::exp(v);
  CHECK(concordance_index(p, y).ci == concordance_index(transformed, y).ci);
}

TEST_CASE("concordance of negated predictions complements") {
  Rng rng(65);
  std::vector<double> p(64), y(64);
  // Tie-free predictions: a shuffled strictly increasing sequence.
  for (size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(i) * 0.375;
  dta::deterministic_shuffle(p, rng);
  for (auto& v : y) v = static_cast<double>(rng.next_below(9));
  y[0] = 11.0;
  std::vector<double> neg = p;
  for (auto& v : neg) v = -v;
  const double a = concordance_index(p, y).ci;
  const double b = concordance_index(neg, y).ci;
  CHECK(a + b == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mse metric fixtures and loss equivalence") {
  const std::vector<double> a = {1, 2, 3};
  CHECK(mse_metric(a, a) == 0.0);
  CHECK(mse_metric(std::vector<double>{0.0}, std::vector<double>{2.0}) == 4.0);
  Rng rng(67);
  std::vector<double> p(16), y(16);
  for (auto& v : p) v = rng.next_double(-2.0, 2.0);
  for (auto& v : y) v = rng.next_double(-2.0, 2.0);
  dta::Tape<double> t;
  const double from_loss = t.value(dta::mse_loss(t.constant({16, 1}, p.data()),
                                                 t.constant({16, 1}, y.data())));
  CHECK(mse_metric(p, y) == from_loss);
  CHECK_THROWS_AS((void)mse_metric(p, a), dta::DataError);
  CHECK_THROWS_AS((void)mse_metric(std::vector<double>{}, std::vector<double>{}),
                  dta::DataError);
}

TEST_CASE("r2m fixtures") {
  const std::vector<double> y = {0.5, 1.25, -0.75, 2.0, 0.0};
  const auto perfect = r_squared_m(y, y);
  CHECK(perfect.r2m == 1.0);
  CHECK(perfect.r2 == 1.0);
  CHECK(perfect.r20 == 1.0);
  CHECK_FALSE(perfect.clamped);
}

TEST_CASE("r2m matches the normal-equations oracle on a length-10 fixture") {
  const std::vector<double> f = {5.1, 6.2, 5.8, 7.4, 6.6, 5.0, 8.1, 7.7, 6.9, 5.5};
  const std::vector<double> y = {5.4, 6.0, 6.1, 7.0, 7.1, 4.8, 8.4, 7.2, 6.5, 5.9};
  const auto mine = r_squared_m(f, y);
  const auto [r2, r20] = brute_r2_r20(f, y);
  CHECK(mine.r2 == doctest::Approx(r2).epsilon(1e-10));
  CHECK(mine.r20 == doctest::Approx(r20).epsilon(1e-10));
  const double expected = r2 * (1.0 - std::sqrt(std::max(0.0, r2 - r20)));
  CHECK(mine.r2m == doctest::Approx(expected).epsilon(1e-10));
  CHECK(mine.r2m >= 0.0);
  CHECK(mine.r2m <= 1.0);
}

TEST_CASE("r2m stays finite when the fit is proportional") {
  // r2 - r20 is mathematically >= 0 but can round below zero; the clamp
  // must keep the square root real for any proportional data.
  Rng rng(69);
  for (int iter = 0; iter < 100; ++iter) {
    const double c = rng.next_double(0.1, 5.0);
    std::vector<double> f(12), y(12);
    for (size_t i = 0; i < f.size(); ++i) {
      f[i] = rng.next_double(-3.0, 3.0);
      y[i] = c * f[i];
    }
    const auto r = r_squared_m(f, y);
    CHECK(std::isfinite(r.r2m));
    CHECK(r.r2m <= 1.0 + 1e-12);
    CHECK(r.r2m >= -1e-12);
  }
}

TEST_CASE("r2m rejects degenerate input") {
  const std::vector<double> two = {1, 2};
  CHECK_THROWS_AS((void)r_squared_m(two, two), dta::DataError);
  const std::vector<double> flat = {1, 1, 1};
  const std::vector<double> live = {1, 2, 3};
  CHECK_THROWS_AS((void)r_squared_m(flat, live), dta::DataError);
  CHECK_THROWS_AS((void)r_squared_m(live, flat), dta::DataError);
}

TEST_CASE("metrics report serializes round-trippable values") {
  const std::vector<double> p = {1.0, 2.0, 3.0, 2.5};
  const std::vector<double> y = {1.1, 1.9, 3.2, 2.4};
  const auto rep = dta::compute_metrics(p, y, "abc123");
  const auto j = nlohmann::json::parse(dta::to_json(rep));
  CHECK(j["mse"].get<double>() == rep.mse);
  CHECK(j["ci"].get<double>() == rep.ci);
  CHECK(j["r2m"].get<double>() == rep.r2m);
  CHECK(j["n"].get<int64_t>() == 4);
  CHECK(j["comparable_pairs"].get<int64_t>() == rep.comparable_pairs);
  CHECK(j["config_digest"].get<std::string>() == "abc123");
  CHECK(rep.ci >= 0.0);
  CHECK(rep.ci <= 1.0);
}
