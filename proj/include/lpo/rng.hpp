#pragma once

// Counter-based 64-bit generator used for every random draw in the project.
//
// Output i of a stream with key K is SplitMix64's finalizer applied to
// K + (i + 1) * 0x9E3779B97F4A7C15 (mod 2^64). Streams are therefore fully
// determined by (key, counter) and reproduce bit-for-bit on any platform.
// Uniform doubles take the top 53 bits; normals use the cosine branch of
// Box-Muller; bounded integers use rejection on the low-bias threshold.

#include <cstdint>
#include <string_view>

namespace lpo {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Labeled sub-seed: one top-level seed fans out into independent streams
/// ("shuffle", "lppc", ...) indexed by an integer.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t z = splitmix64_mix(parent ^ splitmix64_mix(fnv1a64(label)));
  return splitmix64_mix(z + (index + 1) * kGoldenGamma);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return splitmix64_mix(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal() noexcept;

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace lpo
