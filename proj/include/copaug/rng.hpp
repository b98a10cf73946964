// SPDX-License-Identifier: Apache-2.0
//
// Counter-style random streams. A stream is identified by (seed, stream id);
// draw k of a stream is a pure function of (seed, stream, k), so row blocks
// can be generated in any order or concurrently with identical results.
#pragma once

#include <cstdint>
#include <string_view>

namespace copaug {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Draw i of stream (seed, stream) is mix64(base + (i + 1) * kGolden) where
/// base = mix64(mix64(seed) ^ mix64(stream + kGolden)). Within one stream this
/// is exactly the SplitMix64 sequence started at base.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : base_(mix64(mix64(seed) ^ mix64(stream + kGolden))) {}

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(base_ + counter_ * kGolden);
  }

  /// Uniform on the open interval (0, 1): ((x >> 11) + 0.5) / 2^53.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the inverse CDF, one uniform per deviate.
  double normal();

  /// Uniform integer in [0, n) by multiply-shift on the top 32 bits; n < 2^32.
  std::uint64_t below(std::uint64_t n) noexcept {
    return ((next_u64() >> 32) * n) >> 32;
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle of [first, last) driven by `rng`.
template <class It>
void shuffle(It first, It last, CounterRng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

/// FNV-1a 64-bit over a byte string.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for one job of an experiment. Each argument passes through its own
/// mixing round, so jobs of one case never share seeds with another case.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t generation,
                                    std::uint64_t training) noexcept {
  std::uint64_t h = mix64(master ^ 0x5eed5eed5eed5eedULL);
  h = mix64(h ^ fnv1a(label));
  h = mix64(h ^ (generation + 1) * kGolden);
  h = mix64(h ^ (training + 1) * 0xD1B54A32D192ED03ULL);
  return h;
}

}  // namespace copaug
