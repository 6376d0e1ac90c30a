// SPDX-License-Identifier: Apache-2.0
#include "dta/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "dta/errors.hpp"

namespace dta {

std::string format_double(double value) {
  for (int digits = 1; digits <= 17; ++digits) {
    std::ostringstream out;
    out.precision(digits);
    out << value;
    std::string text = out.str();
    if (std::strtod(text.c_str(), nullptr) == value) return text;
  }
  return {};
}

namespace {

std::string trim(std::string_view text) {
  size_t begin = text.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return {};
  size_t end = text.find_last_not_of(" \t");
  return std::string(text.substr(begin, end - begin + 1));
}

double parse_double(const std::string& text, const std::string& key) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || !std::isfinite(value)) {
    throw ConfigError("key \"" + key + "\": \"" + text + "\" is not a finite number");
  }
  return value;
}

int parse_int(const std::string& text, const std::string& key) {
  const char* begin = text.c_str();
  char* end = nullptr;
  long value = std::strtol(begin, &end, 10);
  if (text.empty() || end != begin + text.size() || value < std::numeric_limits<int>::min() ||
      value > std::numeric_limits<int>::max()) {
    throw ConfigError("key \"" + key + "\": \"" + text + "\" is not an integer");
  }
  return static_cast<int>(value);
}

uint64_t parse_u64(const std::string& text, const std::string& key) {
  if (text.empty() || text[0] == '-' || text[0] == '+') {
    throw ConfigError("key \"" + key + "\": \"" + text + "\" is not an unsigned integer");
  }
  const char* begin = text.c_str();
  char* end = nullptr;
  unsigned long long value = std::strtoull(begin, &end, 10);
  if (end != begin + text.size()) {
    throw ConfigError("key \"" + key + "\": \"" + text + "\" is not an unsigned integer");
  }
  return static_cast<uint64_t>(value);
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("key \"" + key + "\": \"" + text + "\" is not a boolean (true/false)");
}

std::array<int, 3> parse_channels(const std::string& text, const std::string& key) {
  std::array<int, 3> out{};
  std::stringstream ss(text);
  std::string part;
  size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= out.size()) {
      throw ConfigError("key \"" + key + "\": expected exactly 3 comma-separated integers");
    }
    out[i++] = parse_int(trim(part), key);
  }
  if (i != out.size()) {
    throw ConfigError("key \"" + key + "\": expected exactly 3 comma-separated integers");
  }
  return out;
}

// One row per config key: how to set it from text and how to print it
// canonically. Table order is the canonical serialization order.
struct KeySpec {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"learning_rate", [](RunConfig& c, const std::string& v) { c.learning_rate = parse_double(v, "learning_rate"); },
       [](const RunConfig& c) { return format_double(c.learning_rate); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_int(v, "batch_size"); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"gcn_layers", [](RunConfig& c, const std::string& v) { c.gcn_layers = parse_int(v, "gcn_layers"); },
       [](const RunConfig& c) { return std::to_string(c.gcn_layers); }},
      {"drug_dim", [](RunConfig& c, const std::string& v) { c.drug_dim = parse_int(v, "drug_dim"); },
       [](const RunConfig& c) { return std::to_string(c.drug_dim); }},
      {"target_dim", [](RunConfig& c, const std::string& v) { c.target_dim = parse_int(v, "target_dim"); },
       [](const RunConfig& c) { return std::to_string(c.target_dim); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.alpha = parse_double(v, "alpha"); },
       [](const RunConfig& c) { return format_double(c.alpha); }},
      {"beta", [](RunConfig& c, const std::string& v) { c.beta = parse_double(v, "beta"); },
       [](const RunConfig& c) { return format_double(c.beta); }},
      {"epsilon", [](RunConfig& c, const std::string& v) { c.epsilon = parse_double(v, "epsilon"); },
       [](const RunConfig& c) { return format_double(c.epsilon); }},
      {"tau", [](RunConfig& c, const std::string& v) { c.tau = parse_double(v, "tau"); },
       [](const RunConfig& c) { return format_double(c.tau); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.epochs = parse_int(v, "epochs"); },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v, "seed"); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"precision", [](RunConfig& c, const std::string& v) { c.precision = v; },
       [](const RunConfig& c) { return c.precision; }},
      {"protein_embed_dim", [](RunConfig& c, const std::string& v) { c.protein_embed_dim = parse_int(v, "protein_embed_dim"); },
       [](const RunConfig& c) { return std::to_string(c.protein_embed_dim); }},
      {"protein_max_len", [](RunConfig& c, const std::string& v) { c.protein_max_len = parse_int(v, "protein_max_len"); },
       [](const RunConfig& c) { return std::to_string(c.protein_max_len); }},
      {"conv_channels", [](RunConfig& c, const std::string& v) { c.conv_channels = parse_channels(v, "conv_channels"); },
       [](const RunConfig& c) {
         return std::to_string(c.conv_channels[0]) + "," + std::to_string(c.conv_channels[1]) +
                "," + std::to_string(c.conv_channels[2]);
       }},
      {"conv_kernel", [](RunConfig& c, const std::string& v) { c.conv_kernel = parse_int(v, "conv_kernel"); },
       [](const RunConfig& c) { return std::to_string(c.conv_kernel); }},
      {"cosine_similarity", [](RunConfig& c, const std::string& v) { c.cosine_similarity = parse_bool(v, "cosine_similarity"); },
       [](const RunConfig& c) { return c.cosine_similarity ? "true" : "false"; }},
      {"transform_affinity", [](RunConfig& c, const std::string& v) { c.transform_affinity = parse_bool(v, "transform_affinity"); },
       [](const RunConfig& c) { return c.transform_affinity ? "true" : "false"; }},
      {"drugs_file", [](RunConfig& c, const std::string& v) { c.drugs_file = v; },
       [](const RunConfig& c) { return c.drugs_file; }},
      {"targets_file", [](RunConfig& c, const std::string& v) { c.targets_file = v; },
       [](const RunConfig& c) { return c.targets_file; }},
      {"affinities_file", [](RunConfig& c, const std::string& v) { c.affinities_file = v; },
       [](const RunConfig& c) { return c.affinities_file; }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
  };
  return table;
}

const KeySpec* find_key(const std::string& name) {
  for (const KeySpec& spec : key_table()) {
    if (name == spec.name) return &spec;
  }
  return nullptr;
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0)) {
    throw ConfigError(std::string(name) + " must be positive, got " + format_double(value));
  }
}

void require_at_least(int value, int bound, const char* name) {
  if (value < bound) {
    throw ConfigError(std::string(name) + " must be at least " + std::to_string(bound) +
                      ", got " + std::to_string(value));
  }
}

void require_non_negative(double value, const char* name) {
  if (!(value >= 0.0)) {
    throw ConfigError(std::string(name) + " must be non-negative, got " + format_double(value));
  }
}

}  // namespace

void RunConfig::validate() const {
  require_positive(learning_rate, "learning_rate");
  require_at_least(batch_size, 1, "batch_size");
  require_at_least(gcn_layers, 1, "gcn_layers");
  require_at_least(drug_dim, 1, "drug_dim");
  require_at_least(target_dim, 1, "target_dim");
  require_non_negative(alpha, "alpha");
  require_non_negative(beta, "beta");
  require_non_negative(epsilon, "epsilon");
  require_positive(tau, "tau");
  require_at_least(epochs, 1, "epochs");
  if (precision != "float64" && precision != "float32") {
    throw ConfigError("precision must be float64 or float32, got \"" + precision + "\"");
  }
  require_at_least(protein_embed_dim, 1, "protein_embed_dim");
  require_at_least(conv_kernel, 1, "conv_kernel");
  for (int ch : conv_channels) require_at_least(ch, 1, "conv_channels");
  // Three valid convolutions must leave at least one output column.
  int shrink = 3 * (conv_kernel - 1);
  if (protein_max_len <= shrink) {
    throw ConfigError("protein_max_len must exceed " + std::to_string(shrink) +
                      " for kernel " + std::to_string(conv_kernel));
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);

  RunConfig config;
  std::set<std::string> seen;
  std::string raw;
  long line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string text = trim(raw);
    if (text.empty()) continue;
    size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + " line " + std::to_string(line) + ": expected key = value");
    }
    std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    const KeySpec* spec = find_key(key);
    if (spec == nullptr) {
      throw ConfigError(path + " line " + std::to_string(line) + ": unknown key \"" + key + "\"");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(path + " line " + std::to_string(line) + ": duplicate key \"" + key +
                        "\"");
    }
    try {
      spec->set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + " line " + std::to_string(line) + ": " + e.what());
    }
  }
  // The noise radius and temperature are not in the published defaults, so
  // a config file must state them instead of inheriting ours.
  for (const char* required : {"epsilon", "tau"}) {
    if (!seen.count(required)) {
      throw ConfigError(path + ": key \"" + std::string(required) +
                        "\" must be set explicitly in the config file");
    }
  }
  return config;
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw ConfigError("unknown config key \"" + key + "\"");
  spec->set(config, value);
}

std::string canonical_text(const RunConfig& config) {
  std::string out;
  for (const KeySpec& spec : key_table()) {
    out += spec.name;
    out += " = ";
    out += spec.get(config);
    out += '\n';
  }
  return out;
}

uint64_t fnv1a64(std::string_view text) {
  uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string config_digest(const RunConfig& config) {
  uint64_t hash = fnv1a64(canonical_text(config));
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[hash & 0xf];
    hash >>= 4;
  }
  return out;
}

}  // namespace dta
