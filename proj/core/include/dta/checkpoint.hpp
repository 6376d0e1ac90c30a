// SPDX-License-Identifier: Apache-2.0
//
// Binary parameter container: a versioned magic header, a manifest of
// (name, shape, scalar type), then the raw arrays little-endian in
// manifest order. Integrity problems and manifest mismatches throw
// DataError; nothing is ever silently coerced.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dta {

enum class ScalarType : uint8_t { Float32 = 0, Float64 = 1 };

struct CheckpointEntry {
  std::string name;
  std::vector<int64_t> shape;
  ScalarType type = ScalarType::Float64;
  std::vector<float> f32;   // populated when type == Float32
  std::vector<double> f64;  // populated when type == Float64

  int64_t element_count() const;
};

struct Checkpoint {
  std::string metadata;  // free-form text (JSON by convention), may be empty
  std::vector<CheckpointEntry> entries;

  void add_f64(const std::string& name, std::vector<int64_t> shape, std::vector<double> values);
  void add_f32(const std::string& name, std::vector<int64_t> shape, std::vector<float> values);
  const CheckpointEntry* find(const std::string& name) const;
  // Returns the named entry or throws DataError describing what differed.
  const CheckpointEntry& expect(const std::string& name, const std::vector<int64_t>& shape,
                                ScalarType type) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dta
