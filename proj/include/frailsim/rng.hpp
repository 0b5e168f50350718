#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace frailsim {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a over a string, used to fold identifiers into stream keys.
constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t combine_key(std::uint64_t key, std::uint64_t value) noexcept {
  return mix64(key ^ mix64(value + 0x9E3779B97F4A7C15ULL));
}

/// Counter-based random stream. Output n is a pure function of (key, n), so a
/// stream keyed by (seed, scenario, replicate, cluster) yields the same draws
/// no matter which worker consumes it or in which order.
///
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(mix64(key)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform draw strictly inside (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Child stream; independent of the parent's position.
  constexpr CounterStream split(std::uint64_t index) const noexcept {
    return CounterStream(combine_key(key_, index));
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace frailsim
