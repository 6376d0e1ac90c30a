// SPDX-License-Identifier: Apache-2.0
#include "dta/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "dta/errors.hpp"
#include "dta/rng.hpp"
#include "fd_util.hpp"

using dta::contrastive_loss;
using dta::joint_loss;
using dta::LossWeights;
using dta::mse_loss;
using dta::PredictionHeadVars;
using dta::predict_affinity;
using dta::Rng;
using dta::sample_noise_pair;
using dta::Tape;
using dta::uniformity_term;
using dta::Var;
using fdtest::random_vec;

namespace {

PredictionHeadVars<double> head_from(std::vector<Var<double>>& leaves) {
  return {leaves[0], leaves[1], leaves[2], leaves[3], leaves[4], leaves[5]};
}

std::vector<std::vector<int>> head_shapes(int h) {
  return {{2 * h, h}, {1, h}, {h, h}, {1, h}, {h, 1}, {1, 1}};
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double mean_pairwise_distance(const std::vector<double>& x, int m, int h) {
  double total = 0.0;
  int pairs = 0;
  for (int u = 0; u < m; ++u) {
    for (int v = u + 1; v < m; ++v) {
      double s = 0.0;
      for (int c = 0; c < h; ++c) {
        const double dd = x[static_cast<size_t>(u) * h + c] - x[static_cast<size_t>(v) * h + c];
        s += dd * dd;
      }
      total += std::sqrt(s);
      ++pairs;
    }
  }
  return total / pairs;
}

}  // namespace

TEST_CASE("all-zero head weights predict the output bias") {
  const int h = 3;
  Tape<double> t;
  std::vector<std::vector<double>> bufs;
  for (const auto& s : head_shapes(h)) {
    bufs.emplace_back(static_cast<size_t>(s[0]) * static_cast<size_t>(s[1]), 0.0);
  }
  bufs[5][0] = 2.5;  // b3
  std::vector<Var<double>> leaves;
  const auto shapes = head_shapes(h);
  for (size_t i = 0; i < bufs.size(); ++i) leaves.push_back(t.constant(shapes[i], bufs[i].data()));
  Rng rng(31);
  auto dv = random_vec(2 * h, rng);
  auto tv = random_vec(2 * h, rng);
  auto d = t.constant({2, h}, dv.data());
  auto tt = t.constant({2, h}, tv.data());
  auto p = predict_affinity(d, tt, head_from(leaves));
  REQUIRE(t.shape(p) == std::vector<int>{2, 1});
  CHECK(t.data(p)[0] == 2.5);
  CHECK(t.data(p)[1] == 2.5);
}

TEST_CASE("toy head matches hand evaluation") {
  Tape<double> t;
  std::vector<double> v1 = {1, 0, 0, 1, 1, 0, 0, 1};
  std::vector<double> b1 = {-5, 0};
  std::vector<double> v2 = {1, 1, 1, 0};
  std::vector<double> b2 = {1, 1};
  std::vector<double> v3 = {2, 3};
  std::vector<double> b3 = {0.5};
  std::vector<double> dv = {1, 2};
  std::vector<double> tv = {3, 4};
  std::vector<Var<double>> leaves = {
      t.constant({4, 2}, v1.data()), t.constant({1, 2}, b1.data()),
      t.constant({2, 2}, v2.data()), t.constant({1, 2}, b2.data()),
      t.constant({2, 1}, v3.data()), t.constant({1, 1}, b3.data())};
  auto p = predict_affinity(t.constant({1, 2}, dv.data()),
                            t.constant({1, 2}, tv.data()), head_from(leaves));
  // concat [1,2,3,4]; V1 sums odd/even slots -> [4,6]; +b1, relu -> [0,6];
  // V2 -> [6,0]; +b2, relu -> [7,1]; V3 -> 17; +b3 -> 17.5.
  CHECK(t.value(p) == 17.5);
}

TEST_CASE("head gradients match finite differences") {
  const int h = 3;
  Rng rng(33);
  auto dv = random_vec(2 * h, rng);
  auto tv = random_vec(2 * h, rng);
  std::vector<std::vector<double>> bufs;
  for (const auto& s : head_shapes(h)) {
    bufs.push_back(random_vec(static_cast<size_t>(s[0]) * static_cast<size_t>(s[1]), rng));
  }
  std::vector<fdtest::FdParam> params = {{{2, h}, &dv}, {{2, h}, &tv}};
  const auto shapes = head_shapes(h);
  for (size_t i = 0; i < bufs.size(); ++i) params.push_back({shapes[i], &bufs[i]});
  fdtest::fd_check("predict_affinity", params,
                   [&](Tape<double>&, std::vector<Var<double>>& leaves) {
                     std::vector<Var<double>> hl(leaves.begin() + 2, leaves.end());
                     return predict_affinity(leaves[0], leaves[1], head_from(hl));
                   });
}

TEST_CASE("mse fixtures") {
  Tape<double> t;
  std::vector<double> a = {1, 2, 3};
  auto pa = t.constant({3, 1}, a.data());
  CHECK(t.value(mse_loss(pa, pa)) == 0.0);

  std::vector<double> z = {0, 0}, o = {1, 1};
  CHECK(t.value(mse_loss(t.constant({2, 1}, z.data()), t.constant({2, 1}, o.data()))) == 1.0);

  std::vector<double> y = {2, 4, 3};
  CHECK(t.value(mse_loss(pa, t.constant({3, 1}, y.data()))) == 5.0 / 3.0);

  std::vector<double> short_y = {2, 4};
  CHECK_THROWS_AS(
      (void)mse_loss(pa, t.constant({2, 1}, short_y.data())), std::invalid_argument);
}

TEST_CASE("mse scales quadratically with the data") {
  Rng rng(35);
  auto p = random_vec(8, rng);
  auto y = random_vec(8, rng);
  auto scaled_p = p;
  auto scaled_y = y;
  const double c = 3.7;
  for (auto& v : scaled_p) v *= c;
  for (auto& v : scaled_y) v *= c;
  Tape<double> t;
  const double base = t.value(mse_loss(t.constant({8, 1}, p.data()), t.constant({8, 1}, y.data())));
  const double big = t.value(
      mse_loss(t.constant({8, 1}, scaled_p.data()), t.constant({8, 1}, scaled_y.data())));
  CHECK(big == doctest::Approx(c * c * base).epsilon(1e-12));
}

TEST_CASE("noise pair fixtures") {
  Rng rng(37);
  SUBCASE("zero radius gives exact zeros") {
    const std::vector<double> d = {0.3, -0.7, 0.0};
    auto [a, b] = sample_noise_pair<double>(d, 0.0, rng);
    CHECK(a == std::vector<double>{0, 0, 0});
    CHECK(b == std::vector<double>{0, 0, 0});
  }
  SUBCASE("two-coordinate example") {
    const std::vector<double> d = {1.0, -1.0};
    auto [a, b] = sample_noise_pair<double>(d, 0.1, rng);
    CHECK(std::abs(l2(a) - 0.1) < 1e-12);
    CHECK(std::abs(l2(b) - 0.1) < 1e-12);
    CHECK(a[0] >= 0.0);
    CHECK(a[1] <= 0.0);
    CHECK(a != b);
  }
  SUBCASE("all-zero representation still yields radius-epsilon noise") {
    const std::vector<double> d = {0.0, 0.0, 0.0, 0.0};
    auto [a, b] = sample_noise_pair<double>(d, 0.25, rng);
    CHECK(std::abs(l2(a) - 0.25) < 1e-12);
    CHECK(std::abs(l2(b) - 0.25) < 1e-12);
  }
}

TEST_CASE("noise draws keep exact norms and hyperoctants over 10000 samples") {
  Rng rng(39);
  const int h = 16;
  const double eps = 0.1;
  double max_norm_dev = 0.0;
  int sign_violations = 0;
  for (int iter = 0; iter < 5000; ++iter) {
    auto d = random_vec(h, rng);
    d[3] = 0.0;
    d[11] = 0.0;
    auto [a, b] = sample_noise_pair<double>(d, eps, rng);
    for (const auto* delta : {&a, &b}) {
      max_norm_dev = std::max(max_norm_dev, std::abs(l2(*delta) - eps));
      for (int j = 0; j < h; ++j) {
        const double dj = d[static_cast<size_t>(j)];
        const double nj = (*delta)[static_cast<size_t>(j)];
        if (dj == 0.0) {
          if (nj != 0.0) ++sign_violations;
        } else if (dj > 0.0 ? nj < 0.0 : nj > 0.0) {
          ++sign_violations;
        }
      }
    }
  }
  CHECK(max_norm_dev < 1e-9);
  CHECK(sign_violations == 0);
}

TEST_CASE("contrastive loss identities") {
  SUBCASE("single view pair is exactly zero") {
    Rng rng(41);
    auto e = random_vec(4, rng);
    auto f = random_vec(4, rng);
    Tape<double> t;
    auto loss = contrastive_loss(t.constant({1, 4}, e.data()),
                                 t.constant({1, 4}, f.data()), 0.2);
    CHECK(t.value(loss) == 0.0);
  }
  SUBCASE("two views with equal similarities give 2 log 2") {
    std::vector<double> e1 = {1, 0, 1, 0};
    std::vector<double> e2 = {0, 1, 0, 1};
    Tape<double> t;
    auto loss = contrastive_loss(t.constant({2, 2}, e1.data()),
                                 t.constant({2, 2}, e2.data()), 1.0);
    CHECK(t.value(loss) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("three views match the brute-force sum") {
    const std::vector<double> e1 = {0.1, 0.2, -0.3, 0.4, 0.5, -0.6};
    const std::vector<double> e2 = {0.7, -0.1, 0.2, 0.3, -0.4, 0.5};
    const double tau = 1.0;
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) {
      double denom = 0.0;
      double sii = 0.0;
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c) {
          s += e1[static_cast<size_t>(i) * 2 + c] * e2[static_cast<size_t>(j) * 2 + c];
        }
        s /= tau;
        denom += std::exp(s);
        if (i == j) sii = s;
      }
      expected += -std::log(std::exp(sii) / denom);
    }
    Tape<double> t;
    auto loss = contrastive_loss(t.constant({3, 2}, e1.data()),
                                 t.constant({3, 2}, e2.data()), tau);
    CHECK(t.value(loss) == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("cosine flag normalizes rows before the dot products") {
    const std::vector<double> e1 = {3.0, 0.0, 0.0, 5.0};
    const std::vector<double> e2 = {2.0, 0.0, 0.0, 7.0};
    // Normalized rows are axis-aligned unit vectors; s = I / tau.
    const double tau = 0.5;
    double expected = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double denom = std::exp(1.0 / tau) + std::exp(0.0);
      expected += -std::log(std::exp(1.0 / tau) / denom);
    }
    Tape<double> t;
    auto loss = contrastive_loss(t.constant({2, 2}, e1.data()),
                                 t.constant({2, 2}, e2.data()), tau, true);
    CHECK(t.value(loss) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("non-negative on random batches") {
    Rng rng(43);
    for (int iter = 0; iter < 20; ++iter) {
      auto e1 = random_vec(5 * 6, rng);
      auto e2 = random_vec(5 * 6, rng);
      Tape<double> t;
      auto loss = contrastive_loss(t.constant({5, 6}, e1.data()),
                                   t.constant({5, 6}, e2.data()), 0.2);
      CHECK(t.value(loss) >= -1e-12);
    }
  }
  SUBCASE("rejects non-positive temperature") {
    Tape<double> t;
    std::vector<double> e = {1.0};
    auto v = t.constant({1, 1}, e.data());
    CHECK_THROWS_AS((void)contrastive_loss(v, v, 0.0), dta::ConfigError);
  }
}

TEST_CASE("contrastive gradients match finite differences") {
  Rng rng(45);
  auto e1 = random_vec(3 * 4, rng);
  auto e2 = random_vec(3 * 4, rng);
  fdtest::fd_check("contrastive_loss", {{{3, 4}, &e1}, {{3, 4}, &e2}},
                   [&](Tape<double>&, std::vector<Var<double>>& leaves) {
                     return contrastive_loss(leaves[0], leaves[1], 0.2);
                   });
  fdtest::fd_check("contrastive_loss_cosine", {{{3, 4}, &e1}, {{3, 4}, &e2}},
                   [&](Tape<double>&, std::vector<Var<double>>& leaves) {
                     return contrastive_loss(leaves[0], leaves[1], 0.2, true);
                   });
}

TEST_CASE("uniformity oracle and wrapper") {
  SUBCASE("four random embeddings match brute force") {
    Rng rng(47);
    auto x = random_vec(4 * 3, rng);
    double total = 0.0;
    for (int u = 0; u < 4; ++u) {
      for (int v = u + 1; v < 4; ++v) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double d = x[static_cast<size_t>(u) * 3 + c] - x[static_cast<size_t>(v) * 3 + c];
          s += d * d;
        }
        total += std::exp(-2.0 * std::sqrt(s));
      }
    }
    const double expected = std::log(total / 6.0);
    Tape<double> t;
    auto loss = dta::uniformity_loss(t.constant({4, 3}, x.data()));
    CHECK(t.value(loss) == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("never positive") {
    Rng rng(49);
    for (int iter = 0; iter < 20; ++iter) {
      auto x = random_vec(6 * 4, rng, -3.0, 3.0);
      Tape<double> t;
      CHECK(t.value(dta::uniformity_loss(t.constant({6, 4}, x.data()))) <= 1e-15);
    }
  }
  SUBCASE("single-row batch contributes zero with a warning") {
    Tape<double> t;
    std::vector<double> x = {1.0, 2.0};
    std::string warning;
    auto loss = uniformity_term(t, t.constant({1, 2}, x.data()),
                                [&](const std::string& w) { warning = w; });
    CHECK(t.value(loss) == 0.0);
    CHECK(warning.find("fewer than two") != std::string::npos);
  }
  SUBCASE("descent step on a tight cluster spreads it") {
    const int m = 8, h = 4;
    Rng rng(51);
    std::vector<double> x(m * h);
    for (auto& v : x) v = 0.5 + 0.01 * rng.next_double(-1.0, 1.0);
    const double before = mean_pairwise_distance(x, m, h);
    Tape<double> t;
    auto leaf = t.leaf({m, h}, x.data());
    auto loss = dta::uniformity_loss(leaf);
    t.backward(loss);
    auto g = t.grad(leaf);
    for (size_t i = 0; i < x.size(); ++i) x[i] -= 0.5 * g[i];
    const double after = mean_pairwise_distance(x, m, h);
    CHECK(after > before);
  }
}

TEST_CASE("joint loss combination") {
  Tape<double> t;
  auto scalar = [&](double v) { return t.constant_scalar(v); };
  SUBCASE("alpha and beta zero reduce to mse") {
    LossWeights w;
    w.alpha = 0.0;
    w.beta = 0.0;
    auto j = joint_loss(scalar(1.25), scalar(9.0), scalar(-3.0), scalar(-4.0), w);
    CHECK(t.value(j) == 1.25);
  }
  SUBCASE("unit alpha arithmetic") {
    LossWeights w;
    w.alpha = 1.0;
    w.beta = 0.0;
    auto j = joint_loss(scalar(1.0), scalar(2.0), scalar(5.0), scalar(5.0), w);
    CHECK(t.value(j) == 3.0);
  }
  SUBCASE("default weights hand sum") {
    LossWeights w;  // alpha = beta = 0.5
    auto j = joint_loss(scalar(1.5), scalar(2.0), scalar(-1.0), scalar(-0.5), w);
    CHECK(t.value(j) == 1.75);
  }
  SUBCASE("non-finite terms are named") {
    LossWeights w;
    try {
      (void)joint_loss(scalar(1.0), scalar(std::nan("")), scalar(0.0), scalar(0.0), w);
      FAIL_CHECK("expected NumericError");
    } catch (const dta::NumericError& e) {
      CHECK(std::string(e.what()).find("contrastive") != std::string::npos);
    }
  }
}

TEST_CASE("loss weight validation") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  LossWeights bad_alpha = w;
  bad_alpha.alpha = -0.1;
  CHECK_THROWS_AS(bad_alpha.validate(), dta::ConfigError);
  LossWeights bad_tau = w;
  bad_tau.tau = 0.0;
  CHECK_THROWS_AS(bad_tau.validate(), dta::ConfigError);
  LossWeights bad_eps = w;
  bad_eps.epsilon = -1.0;
  CHECK_THROWS_AS(bad_eps.validate(), dta::ConfigError);
}
