// SPDX-License-Identifier: Apache-2.0
#include "dta/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

#include "dta/errors.hpp"

namespace dta {
namespace {

// Version lives in the final byte; readers reject anything else.
constexpr char kMagic[8] = {'D', 'T', 'A', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }

  std::string bytes(uint64_t count) {
    need(count);
    std::string out = data_.substr(pos_, count);
    pos_ += count;
    return out;
  }

  void raw(void* dest, uint64_t count) {
    need(count);
    std::memcpy(dest, data_.data() + pos_, count);
    pos_ += count;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(uint64_t count) {
    if (count > data_.size() - pos_) {
      throw DataError(path_ + ": checkpoint truncated at byte " + std::to_string(pos_));
    }
  }

  const std::string& data_;
  std::string path_;
  size_t pos_ = 0;
};

std::string shape_text(const std::vector<int64_t>& shape) {
  std::string out = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

const char* type_name(ScalarType type) {
  return type == ScalarType::Float32 ? "float32" : "float64";
}

}  // namespace

int64_t CheckpointEntry::element_count() const {
  int64_t count = 1;
  for (int64_t extent : shape) count *= extent;
  return count;
}

void Checkpoint::add_f64(const std::string& name, std::vector<int64_t> shape,
                         std::vector<double> values) {
  CheckpointEntry entry;
  entry.name = name;
  entry.shape = std::move(shape);
  entry.type = ScalarType::Float64;
  entry.f64 = std::move(values);
  if (entry.element_count() != static_cast<int64_t>(entry.f64.size())) {
    throw DataError("entry \"" + name + "\": " + std::to_string(entry.f64.size()) +
                    " values do not fill shape " + shape_text(entry.shape));
  }
  entries.push_back(std::move(entry));
}

void Checkpoint::add_f32(const std::string& name, std::vector<int64_t> shape,
                         std::vector<float> values) {
  CheckpointEntry entry;
  entry.name = name;
  entry.shape = std::move(shape);
  entry.type = ScalarType::Float32;
  entry.f32 = std::move(values);
  if (entry.element_count() != static_cast<int64_t>(entry.f32.size())) {
    throw DataError("entry \"" + name + "\": " + std::to_string(entry.f32.size()) +
                    " values do not fill shape " + shape_text(entry.shape));
  }
  entries.push_back(std::move(entry));
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const CheckpointEntry& entry : entries) {
    if (entry.name == name) return &entry;
  }
  return nullptr;
}

const CheckpointEntry& Checkpoint::expect(const std::string& name,
                                          const std::vector<int64_t>& shape,
                                          ScalarType type) const {
  const CheckpointEntry* entry = find(name);
  if (entry == nullptr) throw DataError("checkpoint has no entry \"" + name + "\"");
  if (entry->shape != shape) {
    throw DataError("entry \"" + name + "\": shape " + shape_text(entry->shape) +
                    " does not match expected " + shape_text(shape));
  }
  if (entry->type != type) {
    throw DataError("entry \"" + name + "\": type " + std::string(type_name(entry->type)) +
                    " does not match expected " + type_name(type));
  }
  return *entry;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::unordered_set<std::string> names;
  for (const CheckpointEntry& entry : checkpoint.entries) {
    if (entry.name.empty()) throw DataError("checkpoint entry with empty name");
    if (!names.insert(entry.name).second) {
      throw DataError("duplicate checkpoint entry \"" + entry.name + "\"");
    }
  }

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, checkpoint.metadata.size());
  out += checkpoint.metadata;
  put_u64(out, checkpoint.entries.size());
  for (const CheckpointEntry& entry : checkpoint.entries) {
    put_u64(out, entry.name.size());
    out += entry.name;
    out.push_back(static_cast<char>(entry.type));
    put_u64(out, entry.shape.size());
    for (int64_t extent : entry.shape) put_u64(out, static_cast<uint64_t>(extent));
  }
  for (const CheckpointEntry& entry : checkpoint.entries) {
    // Raw IEEE bytes; this codebase targets little-endian hosts and the
    // integer fields above pin the container format regardless.
    if (entry.type == ScalarType::Float64) {
      out.append(reinterpret_cast<const char*>(entry.f64.data()), entry.f64.size() * 8);
    } else {
      out.append(reinterpret_cast<const char*>(entry.f32.data()), entry.f32.size() * 4);
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write checkpoint " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open checkpoint " + path);
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  Reader reader(data, path);
  std::string magic = reader.bytes(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError(path + ": not a checkpoint (bad magic or unsupported version)");
  }

  Checkpoint checkpoint;
  checkpoint.metadata = reader.bytes(reader.u64());
  uint64_t entry_count = reader.u64();
  std::unordered_set<std::string> names;
  for (uint64_t i = 0; i < entry_count; ++i) {
    CheckpointEntry entry;
    entry.name = reader.bytes(reader.u64());
    if (!names.insert(entry.name).second) {
      throw DataError(path + ": duplicate checkpoint entry \"" + entry.name + "\"");
    }
    uint8_t type = reader.u8();
    if (type > 1) {
      throw DataError(path + ": entry \"" + entry.name + "\" has unknown scalar type " +
                      std::to_string(type));
    }
    entry.type = static_cast<ScalarType>(type);
    uint64_t rank = reader.u64();
    if (rank > 8) {
      throw DataError(path + ": entry \"" + entry.name + "\" has implausible rank " +
                      std::to_string(rank));
    }
    // Caps total elements at 2^40 so corrupt sizes fail before allocation.
    int64_t count = 1;
    for (uint64_t d = 0; d < rank; ++d) {
      int64_t extent = static_cast<int64_t>(reader.u64());
      if (extent < 0 || (count > 0 && extent > 0 && count > (int64_t{1} << 40) / extent)) {
        throw DataError(path + ": entry \"" + entry.name + "\" has implausible shape");
      }
      entry.shape.push_back(extent);
      count *= extent;
    }
    checkpoint.entries.push_back(std::move(entry));
  }
  for (CheckpointEntry& entry : checkpoint.entries) {
    int64_t count = entry.element_count();
    if (entry.type == ScalarType::Float64) {
      entry.f64.resize(static_cast<size_t>(count));
      reader.raw(entry.f64.data(), static_cast<uint64_t>(count) * 8);
    } else {
      entry.f32.resize(static_cast<size_t>(count));
      reader.raw(entry.f32.data(), static_cast<uint64_t>(count) * 4);
    }
  }
  if (!reader.exhausted()) {
    throw DataError(path + ": trailing bytes after last array");
  }
  return checkpoint;
}

}  // namespace dta
