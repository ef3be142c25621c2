#include <doctest.h>

#include <cmath>
#include <set>

#include "otbridge/rng.hpp"

using namespace otbridge::rng;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors of the Philox4x32 generator with 10 rounds.
  const Block zeros = philox4x32(Block{{0, 0, 0, 0}}, 0, 0);
  CHECK(zeros.w[0] == 0x6627e8d5u);
  CHECK(zeros.w[1] == 0xe169c58du);
  CHECK(zeros.w[2] == 0xbc57ac4cu);
  CHECK(zeros.w[3] == 0x9b00dbd8u);

  const Block ones = philox4x32(Block{{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}},
                                0xffffffffu, 0xffffffffu);
  CHECK(ones.w[0] == 0x408f276du);
  CHECK(ones.w[1] == 0x41c83b0eu);
  CHECK(ones.w[2] == 0xa20bc7c6u);
  CHECK(ones.w[3] == 0x6d5451fdu);

  const Block pi = philox4x32(Block{{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}},
                              0xa4093822u, 0x299f31d0u);
  CHECK(pi.w[0] == 0xd16cfe09u);
  CHECK(pi.w[1] == 0x94fdccebu);
  CHECK(pi.w[2] == 0x5001e420u);
  CHECK(pi.w[3] == 0x24126ea1u);
}

TEST_CASE("draws are pure functions of their address") {
  const CounterRng a(42), b(42), c(43);
  CHECK(a.normal(1, 7, 3) == b.normal(1, 7, 3));
  CHECK(a.uniform(1, 7, 3) == b.uniform(1, 7, 3));
  CHECK(a.normal(1, 7, 3) != c.normal(1, 7, 3));
  CHECK(a.normal(1, 7, 3) != a.normal(1, 8, 3));
  CHECK(a.normal(1, 7, 3) != a.normal(2, 7, 3));
  CHECK(a.normal(1, 7, 3) != a.normal(1, 7, 4));
}

TEST_CASE("uniform draws live in [0, 1) and fill the interval") {
  const CounterRng gen(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = gen.uniform(0, std::uint64_t(i), 0);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);
}

TEST_CASE("normal draws have standard moments") {
  const CounterRng gen(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = gen.normal(0, std::uint64_t(i / 2), std::uint32_t(i & 1));
    sum += z;
    sum2 += z * z;
    sum3 += z * z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
  CHECK(std::abs(sum3 / n) < 0.05);
}

TEST_CASE("adjacent slots of one index are decorrelated") {
  const CounterRng gen(99);
  const int n = 50000;
  double cross = 0.0;
  for (int i = 0; i < n; ++i)
    cross += gen.normal(3, std::uint64_t(i), 0) * gen.normal(3, std::uint64_t(i), 1);
  CHECK(std::abs(cross / n) < 0.02);
}
