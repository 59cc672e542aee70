#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tdoa {

// Counter-based random numbers (Philox-4x32-10, Salmon et al. 2011).
//
// Every draw is a pure function of (key, stream, index), so Monte-Carlo
// trials can run in any order, on any number of threads, and still produce
// identical values. Layout of the 128-bit counter:
//
//   word0  low 32 bits of the draw index
//   word1  high 32 bits of the draw index
//   word2  low 32 bits of the stream id
//   word3  high 32 bits of the stream id
//
// The 64-bit key is the user seed. Each (seed, stream) pair is an
// independent sequence of 2^64 blocks of 128 bits.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t key, std::uint64_t stream)
      : key_(key), stream_(stream) {}

  Block block(std::uint64_t index) const {
    std::uint32_t c0 = static_cast<std::uint32_t>(index);
    std::uint32_t c1 = static_cast<std::uint32_t>(index >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(key_);
    std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = kMul0 * static_cast<std::uint64_t>(c0);
      const std::uint64_t p1 = kMul1 * static_cast<std::uint64_t>(c2);
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    return {c0, c1, c2, c3};
  }

  /// 64 random bits; indices 2i and 2i+1 come from block i.
  std::uint64_t bits(std::uint64_t index) const {
    const Block b = block(index >> 1);
    const int half = static_cast<int>(index & 1) * 2;
    return (static_cast<std::uint64_t>(b[half + 1]) << 32) | b[half];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t index) const {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; draw i consumes uniforms 2i and 2i+1.
  double normal(std::uint64_t index) const {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::uint64_t key_;
  std::uint64_t stream_;
};

// Fixed stream ids. Library entry points that consume randomness each own a
// stream, so passing the same seed to different generators never aliases.
namespace streams {
inline constexpr std::uint64_t kDeployGeometry = 0x67656f6du;  // "geom"
inline constexpr std::uint64_t kMeasurementNoise = 0x6e6f6973u;  // "nois"
inline constexpr std::uint64_t kSeedDerivation = 0x64726976u;  // "driv"
}  // namespace streams

/// Derives a child seed for (size_index, trial_index) from a master seed.
/// Used by the campaign runner; size_index and trial_index must fit 32 bits.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint32_t size_index,
                                 std::uint32_t trial_index,
                                 std::uint32_t purpose) {
  const Philox4x32 rng(master, streams::kSeedDerivation + purpose);
  return rng.bits((static_cast<std::uint64_t>(size_index) << 32) | trial_index);
}

}  // namespace tdoa
