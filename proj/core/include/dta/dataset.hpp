// SPDX-License-Identifier: Apache-2.0
//
// Affinity dataset loading and the evaluation split protocol: three TSV
// inputs (drugs, targets, affinities), per-file reject reports, a cached
// molecular graph and normalized adjacency per drug, a six-way test
// holdout, five cross-validation folds, and seeded batch iteration.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dta/smiles.hpp"

namespace dta {

// Indices into Dataset::drug_* and Dataset::target_* vectors.
struct AffinitySample {
  int drug = 0;
  int target = 0;
  double affinity = 0.0;

  friend bool operator==(const AffinitySample&, const AffinitySample&) = default;
};

struct RejectRecord {
  long line = 0;  // 1-based, counting the header as line 1
  std::string reason;
};

struct Dataset {
  std::vector<std::string> drug_ids;
  std::vector<std::string> drug_smiles;
  std::vector<MolecularGraph> drug_graphs;             // parsed once at load
  std::vector<std::vector<double>> drug_norm_adjacency;  // cached A_hat per drug
  std::vector<std::string> target_ids;
  std::vector<std::string> target_sequences;
  std::vector<std::vector<int>> target_tokens;  // filled by build_token_cache
  std::vector<AffinitySample> samples;

  int drug_count() const { return static_cast<int>(drug_ids.size()); }
  int target_count() const { return static_cast<int>(target_ids.size()); }
  int sample_count() const { return static_cast<int>(samples.size()); }

  // Tokenizes every target sequence to max_len; safe to call again with a
  // different length.
  void build_token_cache(int max_len);
};

struct LoadOptions {
  // Applies -log10(value / 1e9) to raw dissociation constants in nM.
  bool transform_kd = false;
};

struct LoadResult {
  Dataset dataset;
  std::vector<RejectRecord> drug_rejects;      // unparseable SMILES rows
  std::vector<RejectRecord> target_rejects;    // reserved; targets load strictly
  std::vector<RejectRecord> affinity_rejects;  // dropped-drug references, duplicates
};

// Malformed structure (missing columns, bad header, non-numeric affinity,
// ids never declared) throws DataError naming the file and line; rows that
// fail the SMILES grammar and rows depending on them become reject records
// instead. Duplicate (drug, target) pairs keep the first occurrence.
LoadResult load_dataset(const std::string& drugs_path, const std::string& targets_path,
                        const std::string& affinities_path, const LoadOptions& options = {});

// TSV "line<TAB>reason" with a header row.
void write_reject_report(const std::string& path, const std::vector<RejectRecord>& rejects);

struct SplitPlan {
  uint64_t seed = 0;
  std::vector<int> test;
  std::array<std::vector<int>, 5> folds;

  std::vector<int> train_pool() const;
  // Cross-validation selection: validation is fold k, train is the rest.
  std::vector<int> fold_train(int k) const;
  const std::vector<int>& fold_validation(int k) const;
};

// Seeded uniform shuffle; ceil(n/6) samples become the test holdout and
// the remainder splits into five folds whose sizes differ by at most one.
// Requires n >= 6.
SplitPlan make_split(int sample_count, uint64_t seed);

// Seeded per-epoch reshuffle (seed xor epoch); the final short batch is
// kept. Returns consecutive index chunks of at most batch_size.
std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size,
                                           uint64_t seed, int epoch);

}  // namespace dta
