#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace rswitch {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A pure function of (counter, key); no internal state.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = Counter{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                    static_cast<std::uint32_t>(p1),
                    static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                    static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

/// Independent families of draws. Each channel has its own address space so
/// that e.g. the jump skeleton never aliases Brownian increments.
enum class Channel : std::uint32_t {
  StepEvents = 0,  // per-step switching clock and mark
  Brownian = 1,    // per-cell Gaussian increments
  Bridge = 2,      // Brownian-bridge refinements inside a cell
  Skeleton = 3,    // competing exponential clocks of the exact jump skeleton
  Auxiliary = 4,   // estimator-level randomness (sampling plans, conditioning)
};

/// Deterministic, addressable source of randomness. Every draw is a pure
/// function of (seed, channel, replica, step, slot), so replicas may be
/// scheduled in any order and coupled paths can consume identical draws.
class NoiseStream {
 public:
  explicit constexpr NoiseStream(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  /// A statistically independent stream (same addressing, different key).
  constexpr NoiseStream derive(std::uint64_t salt) const noexcept {
    return NoiseStream(mix(seed_ ^ mix(salt + 0x632BE59BD9B4E019ull)));
  }

  constexpr Philox4x32::Counter block(Channel channel, std::uint64_t replica, std::uint64_t step,
                                      std::uint32_t slot) const noexcept {
    const Philox4x32::Counter ctr{
        slot, static_cast<std::uint32_t>(step),
        static_cast<std::uint32_t>(replica),
        (static_cast<std::uint32_t>(channel) << 24) |
            (static_cast<std::uint32_t>(replica >> 32) & 0x00FFFFFFu)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)};
    return Philox4x32::apply(ctr, key);
  }

  /// Two uniforms in the open interval (0, 1).
  std::array<double, 2> uniforms(Channel channel, std::uint64_t replica, std::uint64_t step,
                                 std::uint32_t slot) const noexcept {
    const auto b = block(channel, replica, step, slot);
    const std::uint64_t a = (std::uint64_t{b[0]} << 32) | b[1];
    const std::uint64_t c = (std::uint64_t{b[2]} << 32) | b[3];
    return {to_open_unit(a), to_open_unit(c)};
  }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normals(Channel channel, std::uint64_t replica, std::uint64_t step,
                                std::uint32_t slot) const noexcept {
    const auto u = uniforms(channel, replica, step, slot);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double theta = 2.0 * std::numbers::pi * u[1];
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Fills `out` with i.i.d. N(0, variance) draws addressed by (replica, step).
  void gaussians(Channel channel, std::uint64_t replica, std::uint64_t step, double variance,
                 std::span<double> out) const noexcept {
    const double scale = std::sqrt(variance);
    for (std::size_t k = 0; k < out.size(); k += 2) {
      const auto z = normals(channel, replica, step, static_cast<std::uint32_t>(k / 2));
      out[k] = scale * z[0];
      if (k + 1 < out.size()) out[k + 1] = scale * z[1];
    }
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed_;
};

/// Documented default seed used whenever a configuration does not set one.
inline constexpr std::uint64_t kDefaultSeed = 20150704ull;

}  // namespace rswitch
