// SPDX-License-Identifier: Apache-2.0
//
// Loss terms: affine prediction head, mean-squared error, noise-based
// contrastive views with an InfoNCE-style loss over in-batch negatives,
// pairwise-Gaussian uniformity regularizer, and their weighted sum.
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dta/errors.hpp"
#include "dta/ops.hpp"
#include "dta/rng.hpp"
#include "dta/tensor.hpp"

namespace dta {

struct LossWeights {
  double alpha = 0.5;    // contrastive weight
  double beta = 0.5;     // uniformity weight
  double tau = 0.2;      // contrastive temperature
  double epsilon = 0.1;  // noise radius
  bool cosine_similarity = false;

  void validate() const {
    if (alpha < 0.0) throw ConfigError("loss weights: alpha must be >= 0");
    if (beta < 0.0) throw ConfigError("loss weights: beta must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("loss weights: tau must be > 0");
    if (epsilon < 0.0) throw ConfigError("loss weights: epsilon must be >= 0");
  }
};

// Three affine layers; input width is exactly twice the representation
// width (drug and target concatenated).
template <class T>
struct PredictionHeadVars {
  Var<T> v1, b1;  // [2h x h], [1 x h]
  Var<T> v2, b2;  // [h x h], [1 x h]
  Var<T> v3, b3;  // [h x 1], [1 x 1]
};

// Row-batched head: d and t are [m x h], output is [m x 1]. Each row runs
// through concat -> two ReLU affine layers -> final affine scalar.
template <class T>
Var<T> predict_affinity(Var<T> d, Var<T> t, const PredictionHeadVars<T>& head) {
  Var<T> x = concat_cols(d, t);
  x = relu(add_rowvec(matmul(x, head.v1), head.b1));
  x = relu(add_rowvec(matmul(x, head.v2), head.b2));
  return add_rowvec(matmul(x, head.v3), head.b3);
}

// (1/c) * sum (p - y)^2 over [m x 1] columns.
template <class T>
Var<T> mse_loss(Var<T> predictions, Var<T> labels) {
  Var<T> diff = sub(predictions, labels);
  return mean(mul(diff, diff));
}

// Two independent noise draws for one drug representation: coordinates
// are U(0,1) scaled into the hyperoctant of d (sign(d_j) = 0 zeroes the
// coordinate), then rescaled to L2 norm epsilon. An all-zero d leaves no
// hyperoctant constraint; the direction then uses random per-coordinate
// signs so the call still returns radius-epsilon noise.
template <class T>
std::pair<std::vector<T>, std::vector<T>> sample_noise_pair(std::span<const T> d,
                                                            double epsilon, Rng& rng) {
  if (epsilon < 0.0) throw ConfigError("sample_noise_pair: epsilon must be >= 0");
  const size_t h = d.size();
  bool all_zero = true;
  for (const T& x : d) {
    if (x != T(0)) {
      all_zero = false;
      break;
    }
  }
  auto draw = [&]() {
    std::vector<double> delta(h, 0.0);
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (size_t j = 0; j < h; ++j) {
        const double u = rng.next_double();
        double v;
        if (all_zero) {
          v = rng.next_u64() & 1 ? u : -u;
        } else {
          v = d[j] > T(0) ? u : (d[j] < T(0) ? -u : 0.0);
        }
        delta[j] = v;
        norm_sq += v * v;
      }
    } while (epsilon > 0.0 && norm_sq == 0.0);
    std::vector<T> out(h, T(0));
    if (epsilon > 0.0) {
      const double scale = epsilon / std::sqrt(norm_sq);
      for (size_t j = 0; j < h; ++j) out[j] = static_cast<T>(delta[j] * scale);
    }
    return out;
  };
  auto first = draw();
  auto second = draw();
  return {std::move(first), std::move(second)};
}

// InfoNCE-style loss over row-stacked views e1, e2 [B x h]:
//   sum_i -log( exp(s_ii) / sum_j exp(s_ij) ),  s_ij = e1_i . e2_j / tau.
// Evaluated as sum_i lse_j(s_ij) - sum_i s_ii, so B = 1 gives exactly 0.
// Similarities are raw dot products unless cosine is requested.
template <class T>
Var<T> contrastive_loss(Var<T> e1, Var<T> e2, double tau, bool cosine = false) {
  if (!(tau > 0.0)) throw ConfigError("contrastive_loss: tau must be > 0");
  if (cosine) {
    e1 = normalize_rows(e1);
    e2 = normalize_rows(e2);
  }
  Var<T> sim = scale(matmul_nt(e1, e2), static_cast<T>(1.0 / tau));
  return sub(sum(lse_rows(sim)), sum(diagonal(sim)));
}

// log mean over unordered distinct pairs of exp(-2 * ||x_u - x_v||_2),
// unsquared norm. Rows must already be de-duplicated by entity id; fewer
// than two rows contribute a constant 0 after emitting a warning.
template <class T>
Var<T> uniformity_term(Tape<T>& tape, Var<T> x,
                       const std::function<void(const std::string&)>& warn = {}) {
  if (tape.shape(x)[0] < 2) {
    if (warn) warn("uniformity term skipped: fewer than two distinct entities in batch");
    return tape.constant_scalar(T(0));
  }
  return uniformity_loss(x);
}

// L_joint = L_mse + alpha * L_cl + beta * (L_uniform_d + L_uniform_t).
template <class T>
Var<T> joint_loss(Var<T> mse, Var<T> cl, Var<T> uni_d, Var<T> uni_t,
                  const LossWeights& w) {
  w.validate();
  const struct {
    const char* name;
    Var<T> term;
  } terms[] = {{"mse", mse}, {"contrastive", cl}, {"drug uniformity", uni_d},
               {"target uniformity", uni_t}};
  for (const auto& t : terms) {
    if (!std::isfinite(static_cast<double>(t.term.tape->value(t.term)))) {
      throw NumericError(std::string("joint_loss: non-finite ") + t.name + " term");
    }
  }
  return add(mse, add(scale(cl, static_cast<T>(w.alpha)),
                      scale(add(uni_d, uni_t), static_cast<T>(w.beta))));
}

}  // namespace dta
