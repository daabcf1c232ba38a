#pragma once

// Counter-based Gaussian noise. Every increment is a pure function of
// (seed, stream, step), so runs replay bitwise regardless of how particles
// are scheduled across workers.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvavg {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finalizer, used to derive keys and per-replication seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed for replication r of a study, independent across r.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t r) noexcept {
  return mix64(seed ^ mix64(r + 0x5851F42D4C957F2Dull));
}

enum class NoiseComponent : std::uint32_t {
  slow = 1,    // W^1
  fast = 2,    // W^2
  frozen = 3,  // driving noise of frozen-equation runs
  spread = 4,  // optional initial perturbation
};

/// Identifies one scalar Brownian motion. `extra` separates otherwise
/// identical streams (frozen-run refresh index and replica).
struct StreamId {
  NoiseComponent component = NoiseComponent::slow;
  std::uint64_t particle = 0;
  std::uint32_t mode = 0;
  std::uint64_t extra = 0;
};

class NoisePlan {
 public:
  explicit NoisePlan(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Standard normal for (stream, step). Pure function of its arguments.
  double gaussian(const StreamId& s, std::uint64_t step) const noexcept {
    const std::uint64_t k =
        mix64(seed_ ^ mix64((static_cast<std::uint64_t>(s.component) << 56) ^ s.extra ^
                            (s.particle >> 32) * 0x2545F4914F6CDD1Dull));
    const Philox4x32::Key key{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(step >> 32),
                                  static_cast<std::uint32_t>(s.particle), s.mode};
    const auto r = Philox4x32::generate(ctr, key);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    // 53-bit uniforms; u1 in (0,1] keeps the logarithm finite.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace mvavg
