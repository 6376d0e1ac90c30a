// SPDX-License-Identifier: Apache-2.0
//
// Flat key-value run configuration: file loading, CLI-style overrides,
// range validation, and a stable digest for report provenance.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dta {

struct RunConfig {
  double learning_rate = 0.0005;
  int batch_size = 512;
  int gcn_layers = 3;
  int drug_dim = 128;
  int target_dim = 128;
  double alpha = 0.5;
  double beta = 0.5;
  double epsilon = 0.1;
  double tau = 0.2;
  int epochs = 1000;
  uint64_t seed = 1;
  std::string precision = "float64";  // or "float32"
  int protein_embed_dim = 128;
  int protein_max_len = 1000;
  std::array<int, 3> conv_channels = {32, 64, 96};
  int conv_kernel = 8;
  bool cosine_similarity = false;
  bool transform_affinity = false;
  std::string drugs_file;
  std::string targets_file;
  std::string affinities_file;
  std::string out_dir = "runs";

  // Throws ConfigError on any out-of-range value.
  void validate() const;
};

// Parses "key = value" lines ('#' comments, blank lines allowed). Unknown
// or duplicate keys throw ConfigError with the line number; epsilon and tau
// must appear explicitly, so no run silently inherits their defaults.
RunConfig load_config(const std::string& path);

// Applies one "key" = "value" pair on top of an existing config; the key
// set and value syntax match the file format exactly.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Shortest decimal form that parses back to the same bits; shared by
// canonical config text and run logs so repeated runs serialize identically.
std::string format_double(double value);

// Every key as canonical "key = value" lines in fixed order; doubles are
// printed round-trip exact so equal configs serialize identically.
std::string canonical_text(const RunConfig& config);

// 64-bit FNV-1a, the hash under config_digest.
uint64_t fnv1a64(std::string_view text);

// 16 lowercase hex characters over canonical_text.
std::string config_digest(const RunConfig& config);

}  // namespace dta
