#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

// Counter-based random number generation (Philox4x32-10).
//
// Every random quantity in the solver is addressed by (seed, stream, index,
// slot) rather than drawn from sequential generator state. This makes each
// draw a pure function of its address: sampling is bit-reproducible for a
// fixed seed regardless of evaluation order or thread count, and the FBSDE
// forward and backward passes can regenerate identical noise increments.

namespace otbridge::rng {

struct Block {
  std::uint32_t w[4];
};

/// One Philox4x32 keyed permutation, 10 rounds (Salmon et al., SC'11).
inline Block philox4x32(Block c, std::uint32_t k0, std::uint32_t k1) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(kMul0) * c.w[0];
    const std::uint64_t p1 = std::uint64_t(kMul1) * c.w[2];
    c = Block{{static_cast<std::uint32_t>(p1 >> 32) ^ c.w[1] ^ k0,
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ c.w[3] ^ k1,
               static_cast<std::uint32_t>(p0)}};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return c;
}

// Stream identifiers. Call sites must use distinct streams so that addresses
// never collide under a shared seed. FBSDE noise occupies [kStreamFbsde,
// kStreamFbsde + step_count).
inline constexpr std::uint32_t kStreamSampleNormal = 0x01000000u;
inline constexpr std::uint32_t kStreamSampleComponent = 0x02000000u;
inline constexpr std::uint32_t kStreamCenterSelect = 0x03000000u;
inline constexpr std::uint32_t kStreamFbsde = 0x40000000u;

/// Keyed view over the Philox counter space. `index` is typically a particle
/// index, `slot` a coordinate within the sample; consecutive slots of one
/// (stream, index) pair are independent.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)) {}

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform(std::uint32_t stream, std::uint64_t index, std::uint32_t slot) const {
    const Block b = block(stream, index, 0x80000000u | (slot >> 1));
    return to_unit(word64(b, (slot & 1u) != 0));
  }

  /// Standard normal draw (Box-Muller; two normals per Philox block).
  double normal(std::uint32_t stream, std::uint64_t index, std::uint32_t slot) const {
    const Block b = block(stream, index, slot >> 1);
    // u1 in (0, 1] so the logarithm stays finite.
    const double u1 = (double((word64(b, false) >> 11)) + 1.0) * 0x1.0p-53;
    const double u2 = to_unit(word64(b, true));
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    return (slot & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
  }

 private:
  Block block(std::uint32_t stream, std::uint64_t index, std::uint32_t ctr3) const {
    return philox4x32(Block{{static_cast<std::uint32_t>(index),
                             static_cast<std::uint32_t>(index >> 32), stream, ctr3}},
                      key0_, key1_);
  }

  static std::uint64_t word64(const Block& b, bool upper) {
    return upper ? (std::uint64_t(b.w[2]) << 32) | b.w[3]
                 : (std::uint64_t(b.w[0]) << 32) | b.w[1];
  }

  static double to_unit(std::uint64_t x) { return double(x >> 11) * 0x1.0p-53; }

  std::uint32_t key0_;
  std::uint32_t key1_;
};

}  // namespace otbridge::rng
