// SPDX-License-Identifier: Apache-2.0
//
// Graph-convolutional drug encoder: degree-normalized adjacency with
// self-loops, stacked Z <- relu(A_hat * Z * W) layers, column-max pooling
// over atoms for the graph-level representation.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dta/errors.hpp"
#include "dta/ops.hpp"
#include "dta/tensor.hpp"

namespace dta {

// A_hat = D^{-1/2} (A + I) D^{-1/2} with D the degrees after adding
// self-loops. Entries are computed as (A+I)_ij / sqrt(d_i * d_j), which is
// exact for the small fixtures (halves, thirds). The result is a pure
// function of the adjacency, so recomputing it is bit-identical; callers
// cache it per molecule. Input must be symmetric with a zero diagonal.
inline std::vector<double> normalize_adjacency(const std::vector<uint8_t>& adjacency,
                                               int atom_count) {
  const int n = atom_count;
  if (n <= 0 || adjacency.size() != static_cast<size_t>(n) * static_cast<size_t>(n)) {
    throw DataError("normalize_adjacency: adjacency size does not match atom count");
  }
  for (int i = 0; i < n; ++i) {
    if (adjacency[static_cast<size_t>(i) * n + i] != 0) {
      throw DataError("normalize_adjacency: adjacency has a nonzero diagonal");
    }
    for (int j = 0; j < i; ++j) {
      if (adjacency[static_cast<size_t>(i) * n + j] !=
          adjacency[static_cast<size_t>(j) * n + i]) {
        throw DataError("normalize_adjacency: adjacency is not symmetric");
      }
    }
  }
  std::vector<double> degree(static_cast<size_t>(n), 1.0);  // self-loop
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      degree[static_cast<size_t>(i)] += adjacency[static_cast<size_t>(i) * n + j];
    }
  }
  std::vector<double> out(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double tilde = i == j ? 1.0 : static_cast<double>(adjacency[static_cast<size_t>(i) * n + j]);
      if (tilde != 0.0) {
        out[static_cast<size_t>(i) * n + j] =
            tilde / std::sqrt(degree[static_cast<size_t>(i)] * degree[static_cast<size_t>(j)]);
      }
    }
  }
  return out;
}

// Z^{l+1} = relu(A_hat * Z^l * W^l) for every layer; Z^0 is the atom
// feature matrix [n x k], W^0 is [k x h], the rest [h x h]. No biases.
template <class T>
Var<T> gcn_forward(Tape<T>& tape, Var<T> x, const std::vector<double>& a_hat,
                   std::span<const Var<T>> weights) {
  const int n = tape.shape(x)[0];
  if (a_hat.size() != static_cast<size_t>(n) * static_cast<size_t>(n)) {
    throw std::invalid_argument("gcn_forward: normalized adjacency does not match atom count");
  }
  if (weights.empty()) {
    throw std::invalid_argument("gcn_forward: at least one layer weight required");
  }
  std::vector<T> converted(a_hat.begin(), a_hat.end());
  const Var<T> a = tape.constant({n, n}, converted.data());
  Var<T> z = x;
  for (const Var<T>& w : weights) z = relu(matmul(a, matmul(z, w)));
  return z;
}

// Graph-level representation: column-wise max over atom rows, [1 x h].
template <class T>
Var<T> global_max_pool(Var<T> z) {
  return colmax(z);
}

}  // namespace dta
