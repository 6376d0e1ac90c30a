// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace dta {

/// Deterministic counter-style generator (splitmix64). Streams are derived
/// from a root seed plus integer tags, so any draw in a run is reproducible
/// from (seed, tags) alone and nothing needs to be serialized for resume.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1). 53-bit mantissa, identical across platforms.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Unbiased uniform integer in [0, bound). bound must be > 0.
  uint64_t next_below(uint64_t bound) {
    uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  uint64_t state_;
};

/// Mixes a seed with stream tags into a fresh root seed. Used to give every
/// (epoch, step, entity, ...) coordinate its own independent stream.
inline uint64_t derive_seed(uint64_t seed, std::span<const uint64_t> tags) {
  Rng mixer(seed);
  uint64_t s = mixer.next_u64();
  for (uint64_t t : tags) {
    Rng m2(s ^ (t + 0x9e3779b97f4a7c15ull));
    s = m2.next_u64();
  }
  return s;
}

inline Rng derive_stream(uint64_t seed, std::initializer_list<uint64_t> tags) {
  return Rng(derive_seed(seed, std::span<const uint64_t>(tags.begin(), tags.size())));
}

/// In-place Fisher-Yates shuffle with an explicit generator; the standard
/// library shuffle is implementation-defined and would break run-for-run
/// reproducibility across toolchains.
template <class T>
void deterministic_shuffle(std::vector<T>& items, Rng& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace dta
