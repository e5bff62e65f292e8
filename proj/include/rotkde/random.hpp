#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rotkde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by a 64-bit key and a 64-bit stream id; the output
/// is a pure function of (key, stream, position), so concurrent replications
/// with distinct stream ids never share state.
class Philox {
 public:
  using result_type = std::uint32_t;

  Philox(std::uint64_t key, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (index_ == 4) {
      block_ = generate(counter_++);
      index_ = 0;
    }
    return block_[index_++];
  }

  /// Uniform double in (0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;  // 27 bits
    const std::uint64_t lo = (*this)() >> 6;  // 26 bits
    return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal variate (Box–Muller, cached second value).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::array<std::uint32_t, 4> generate(std::uint64_t position) const {
    std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(position),
                                     static_cast<std::uint32_t>(position >> 32),
                                     static_cast<std::uint32_t>(stream_),
                                     static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9;
      key[1] += 0xBB67AE85;
    }
    return ctr;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_{0};
  std::array<std::uint32_t, 4> block_{};
  int index_{4};
  double spare_{0};
  bool has_spare_{false};
};

/// Derive a child seed from (seed, index) by a SplitMix64 finalizer.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace rotkde
