#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace twb {

/// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: maps a
/// 128-bit counter and 64-bit key to 128 random bits.
class Philox4x32 {
 public:
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static counter_type block(counter_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// Random stream for one trajectory. The key is the master seed and the
/// trajectory index occupies the upper counter words, so stream (seed, i)
/// is a pure function of its inputs and never overlaps stream (seed, j).
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t trajectory_index)
      : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
        stream_hi_{static_cast<std::uint32_t>(trajectory_index),
                   static_cast<std::uint32_t>(trajectory_index >> 32)} {}

  std::uint32_t next_u32() {
    if (lane_ == 4) refill();
    return buffer_[lane_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Complex Gaussian with <|zeta|^2> = 1 and <zeta^2> = 0.
  std::complex<double> complex_gaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return {re * std::numbers::sqrt2 / 2, im * std::numbers::sqrt2 / 2};
  }

  std::uint64_t blocks_consumed() const { return block_; }

 private:
  void refill() {
    buffer_ = Philox4x32::block({static_cast<std::uint32_t>(block_),
                                 static_cast<std::uint32_t>(block_ >> 32), stream_hi_[0],
                                 stream_hi_[1]},
                                key_);
    ++block_;
    lane_ = 0;
  }

  Philox4x32::key_type key_;
  std::array<std::uint32_t, 2> stream_hi_;
  std::uint64_t block_ = 0;
  Philox4x32::counter_type buffer_{};
  int lane_ = 4;
  double spare_ = 0;
  bool has_spare_ = false;
};

inline RandomStream seed_stream(std::uint64_t master_seed, std::uint64_t trajectory_index) {
  return RandomStream(master_seed, trajectory_index);
}

}  // namespace twb
