// SPDX-License-Identifier: Apache-2.0
//
// Protein-sequence encoder: integer tokenization, embedding lookup, three
// 1D convolutions with per-channel biases and ReLU, position-wise max
// pooling, and an affine projection to the shared representation width.
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dta/errors.hpp"
#include "dta/ops.hpp"
#include "dta/tensor.hpp"

namespace dta {

// 25 amino-acid letters (A..Z without J) plus one unknown code; 0 is
// reserved for padding, so embedding tables have kProteinVocab + 1 rows.
inline constexpr int kProteinVocab = 26;
inline constexpr int kUnknownToken = 26;

// Letters map to their 1-based alphabetical rank among the 25 valid codes
// (A -> 1, C -> 3); anything else maps to the unknown token. Output is
// right-padded with 0 or truncated to exactly max_len entries.
inline std::vector<int> tokenize_protein(const std::string& sequence, int max_len) {
  if (sequence.empty()) throw DataError("tokenize_protein: empty sequence");
  if (max_len <= 0) throw ConfigError("tokenize_protein: max_len must be positive");
  std::vector<int> tokens(static_cast<size_t>(max_len), 0);
  const size_t n = std::min(sequence.size(), static_cast<size_t>(max_len));
  for (size_t i = 0; i < n; ++i) {
    const char c = sequence[i];
    if (c >= 'A' && c <= 'Z' && c != 'J') {
      tokens[i] = (c - 'A') + 1 - (c > 'J' ? 1 : 0);
    } else {
      tokens[i] = kUnknownToken;
    }
  }
  return tokens;
}

// Shape constants of the encoder; defaults follow the convolutional
// sequence-encoder convention this architecture builds on.
struct ProteinDims {
  int embed_dim = 128;
  int max_len = 1000;
  std::array<int, 3> channels = {32, 64, 96};
  int kernel = 8;
  int out_dim = 128;

  int conv_output_length() const { return max_len - 3 * (kernel - 1); }

  void validate() const {
    if (embed_dim <= 0 || max_len <= 0 || kernel <= 0 || out_dim <= 0 ||
        channels[0] <= 0 || channels[1] <= 0 || channels[2] <= 0) {
      throw ConfigError("protein encoder: all dimensions must be positive");
    }
    if (conv_output_length() < 1) {
      throw ConfigError("protein encoder: max_len " + std::to_string(max_len) +
                        " too short for three kernel-" + std::to_string(kernel) +
                        " convolutions");
    }
  }
};

// Parameter handles for one encoder; owned by the parameter store.
template <class T>
struct ProteinEncoderVars {
  Var<T> embedding;                 // [kProteinVocab+1 x e], row 0 zero-locked
  std::array<Var<T>, 3> conv_w{};   // [c_out x c_in x kernel]
  std::array<Var<T>, 3> conv_b{};   // [c_out x 1]
  Var<T> proj_w;                    // [c3 x h]
  Var<T> proj_b;                    // [1 x h]
};

// tokens -> [1 x h] representation on the given tape.
template <class T>
Var<T> protein_encode(Tape<T>& tape, const std::vector<int>& tokens,
                      const ProteinEncoderVars<T>& v) {
  Var<T> z = embedding_cols(v.embedding, tokens);  // [e x M]
  for (int layer = 0; layer < 3; ++layer) {
    z = relu(add_colvec(conv1d(z, v.conv_w[static_cast<size_t>(layer)]),
                        v.conv_b[static_cast<size_t>(layer)]));
  }
  Var<T> pooled = transpose(rowmax(z));  // [1 x c3]
  (void)tape;
  return add(matmul(pooled, v.proj_w), v.proj_b);
}

}  // namespace dta
