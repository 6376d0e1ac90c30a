// SPDX-License-Identifier: Apache-2.0
#include "dta/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dta/errors.hpp"
#include "dta/gcn.hpp"
#include "dta/protein.hpp"
#include "dta/rng.hpp"

namespace dta {
namespace {

// Stream tag reserving the split shuffle its own draw sequence.
constexpr uint64_t kSplitStreamTag = 0x53504c49ull;

// Splits one TSV line; trailing CR from CRLF files is stripped first.
std::vector<std::string> split_tsv(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string location(const std::string& path, long line) {
  return path + " line " + std::to_string(line);
}

// A fully-read TSV body: non-empty data rows with their 1-based line numbers.
struct TsvRow {
  long line = 0;
  std::vector<std::string> fields;
};

std::vector<TsvRow> read_tsv(const std::string& path, const std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string raw;
  if (!std::getline(in, raw)) throw DataError(path + " is empty, expected a header row");
  if (split_tsv(raw) != header) {
    std::string want;
    for (size_t i = 0; i < header.size(); ++i) want += (i ? "\t" : "") + header[i];
    throw DataError(location(path, 1) + ": header must be exactly \"" + want + "\"");
  }
  std::vector<TsvRow> rows;
  long line = 1;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty() || raw == "\r") continue;
    TsvRow row;
    row.line = line;
    row.fields = split_tsv(std::move(raw));
    if (row.fields.size() != header.size()) {
      throw DataError(location(path, line) + ": expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(row.fields.size()));
    }
    for (size_t i = 0; i < row.fields.size(); ++i) {
      if (row.fields[i].empty()) {
        throw DataError(location(path, line) + ": column \"" + header[i] + "\" is empty");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_affinity(const std::string& text, const std::string& path, long line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end != begin + text.size()) {
    throw DataError(location(path, line) + ": affinity \"" + text + "\" is not a number");
  }
  if (!std::isfinite(value)) {
    throw DataError(location(path, line) + ": affinity \"" + text + "\" is not finite");
  }
  return value;
}

}  // namespace

void Dataset::build_token_cache(int max_len) {
  target_tokens.clear();
  target_tokens.reserve(target_sequences.size());
  for (const std::string& seq : target_sequences) {
    target_tokens.push_back(tokenize_protein(seq, max_len));
  }
}

LoadResult load_dataset(const std::string& drugs_path, const std::string& targets_path,
                        const std::string& affinities_path, const LoadOptions& options) {
  LoadResult result;
  Dataset& ds = result.dataset;

  // Drugs: an id seen with an unparseable SMILES is remembered so affinity
  // rows naming it can be rejected rather than treated as never declared.
  std::unordered_map<std::string, int> drug_index;
  std::unordered_set<std::string> dropped_drugs;
  for (const TsvRow& row : read_tsv(drugs_path, {"drug_id", "smiles"})) {
    const std::string& id = row.fields[0];
    if (drug_index.count(id) || dropped_drugs.count(id)) {
      throw DataError(location(drugs_path, row.line) + ": duplicate drug id \"" + id + "\"");
    }
    MolecularGraph graph;
    try {
      graph = parse_smiles(row.fields[1]);
    } catch (const SmilesError& e) {
      dropped_drugs.insert(id);
      result.drug_rejects.push_back({row.line, std::string(e.what())});
      continue;
    }
    featurize_atoms(graph);
    drug_index.emplace(id, ds.drug_count());
    ds.drug_ids.push_back(id);
    ds.drug_smiles.push_back(row.fields[1]);
    ds.drug_norm_adjacency.push_back(normalize_adjacency(graph.adjacency, graph.atom_count()));
    ds.drug_graphs.push_back(std::move(graph));
  }

  std::unordered_map<std::string, int> target_index;
  for (const TsvRow& row : read_tsv(targets_path, {"target_id", "sequence"})) {
    const std::string& id = row.fields[0];
    if (target_index.count(id)) {
      throw DataError(location(targets_path, row.line) + ": duplicate target id \"" + id + "\"");
    }
    target_index.emplace(id, ds.target_count());
    ds.target_ids.push_back(id);
    ds.target_sequences.push_back(row.fields[1]);
  }

  std::unordered_set<long long> seen_pairs;
  for (const TsvRow& row : read_tsv(affinities_path, {"drug_id", "target_id", "affinity"})) {
    const std::string& drug_id = row.fields[0];
    const std::string& target_id = row.fields[1];
    if (dropped_drugs.count(drug_id)) {
      result.affinity_rejects.push_back(
          {row.line, "references rejected drug \"" + drug_id + "\""});
      continue;
    }
    auto drug_it = drug_index.find(drug_id);
    if (drug_it == drug_index.end()) {
      throw DataError(location(affinities_path, row.line) + ": unknown drug id \"" + drug_id +
                      "\"");
    }
    auto target_it = target_index.find(target_id);
    if (target_it == target_index.end()) {
      throw DataError(location(affinities_path, row.line) + ": unknown target id \"" + target_id +
                      "\"");
    }
    long long key =
        static_cast<long long>(drug_it->second) * (ds.target_count() + 1LL) + target_it->second;
    if (!seen_pairs.insert(key).second) {
      result.affinity_rejects.push_back(
          {row.line, "duplicate pair (\"" + drug_id + "\", \"" + target_id + "\")"});
      continue;
    }
    double affinity = parse_affinity(row.fields[2], affinities_path, row.line);
    if (options.transform_kd) {
      if (affinity <= 0.0) {
        throw DataError(location(affinities_path, row.line) +
                        ": affinity must be positive for the log transform");
      }
      affinity = -std::log10(affinity / 1e9);
    }
    ds.samples.push_back({drug_it->second, target_it->second, affinity});
  }
  return result;
}

void write_reject_report(const std::string& path, const std::vector<RejectRecord>& rejects) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "line\treason\n";
  for (const RejectRecord& r : rejects) out << r.line << '\t' << r.reason << '\n';
  if (!out) throw DataError("failed writing " + path);
}

std::vector<int> SplitPlan::train_pool() const {
  std::vector<int> pool;
  for (const std::vector<int>& fold : folds) pool.insert(pool.end(), fold.begin(), fold.end());
  return pool;
}

std::vector<int> SplitPlan::fold_train(int k) const {
  if (k < 0 || k >= static_cast<int>(folds.size())) {
    throw ConfigError("fold index " + std::to_string(k) + " out of range [0, 5)");
  }
  std::vector<int> train;
  for (int i = 0; i < static_cast<int>(folds.size()); ++i) {
    if (i == k) continue;
    train.insert(train.end(), folds[i].begin(), folds[i].end());
  }
  return train;
}

const std::vector<int>& SplitPlan::fold_validation(int k) const {
  if (k < 0 || k >= static_cast<int>(folds.size())) {
    throw ConfigError("fold index " + std::to_string(k) + " out of range [0, 5)");
  }
  return folds[static_cast<size_t>(k)];
}

SplitPlan make_split(int sample_count, uint64_t seed) {
  if (sample_count < 6) {
    throw DataError("cannot split " + std::to_string(sample_count) +
                    " samples into a test sixth and five folds");
  }
  std::vector<int> order(static_cast<size_t>(sample_count));
  for (int i = 0; i < sample_count; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = derive_stream(seed, {kSplitStreamTag});
  deterministic_shuffle(order, rng);

  SplitPlan plan;
  plan.seed = seed;
  int test_count = (sample_count + 5) / 6;  // ceil(n / 6)
  plan.test.assign(order.begin(), order.begin() + test_count);

  int pool = sample_count - test_count;
  int base = pool / 5;
  int extra = pool % 5;  // first `extra` folds take one more
  auto cursor = order.begin() + test_count;
  for (int k = 0; k < 5; ++k) {
    int size = base + (k < extra ? 1 : 0);
    plan.folds[static_cast<size_t>(k)].assign(cursor, cursor + size);
    cursor += size;
  }
  return plan;
}

std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size,
                                           uint64_t seed, int epoch) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  std::vector<int> order = indices;
  Rng rng(seed ^ static_cast<uint64_t>(epoch));
  deterministic_shuffle(order, rng);
  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    size_t stop = std::min(order.size(), start + static_cast<size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(stop));
  }
  return batches;
}

}  // namespace dta
