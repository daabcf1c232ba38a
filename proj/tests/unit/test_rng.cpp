#include <gtest/gtest.h>

#include <cmath>

#include "mvavg/parallel.hpp"
#include "mvavg/rng.hpp"

using namespace mvavg;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}),
            (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                 K{0xffffffffu, 0xffffffffu}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                 K{0xa4093822u, 0x299f31d0u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NoisePlan, PureFunctionOfArguments) {
  const NoisePlan a(42), b(42);
  const StreamId s{NoiseComponent::slow, 17, 2, 0};
  for (std::uint64_t k = 0; k < 100; ++k) EXPECT_EQ(a.gaussian(s, k), b.gaussian(s, k));
  EXPECT_NE(a.gaussian(s, 0), NoisePlan(43).gaussian(s, 0));
}

TEST(NoisePlan, StreamsDiffer) {
  const NoisePlan p(1);
  const double base = p.gaussian({NoiseComponent::slow, 0, 0, 0}, 5);
  EXPECT_NE(base, p.gaussian({NoiseComponent::fast, 0, 0, 0}, 5));
  EXPECT_NE(base, p.gaussian({NoiseComponent::slow, 1, 0, 0}, 5));
  EXPECT_NE(base, p.gaussian({NoiseComponent::slow, 0, 1, 0}, 5));
  EXPECT_NE(base, p.gaussian({NoiseComponent::slow, 0, 0, 1}, 5));
  EXPECT_NE(base, p.gaussian({NoiseComponent::slow, 1ull << 33, 0, 0}, 5));
}

TEST(NoisePlan, StandardNormalMoments) {
  const NoisePlan p(7);
  const int n = 400000;
  double s1 = 0, s2 = 0, s4 = 0, cross = 0;
  double prev = 0;
  for (int k = 0; k < n; ++k) {
    const double z = p.gaussian({NoiseComponent::fast, 3, 0, 0}, static_cast<std::uint64_t>(k));
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
    cross += z * prev;
    prev = z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5 * std::sqrt(1.0 / n));
  EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96.0 / n));
  EXPECT_NEAR(cross / n, 0.0, 5 * std::sqrt(1.0 / n));
}

TEST(NoisePlan, IndependentAcrossStreams) {
  const NoisePlan p(9);
  const int n = 200000;
  double c = 0;
  for (int k = 0; k < n; ++k) {
    c += p.gaussian({NoiseComponent::slow, 0, 0, 0}, static_cast<std::uint64_t>(k)) *
         p.gaussian({NoiseComponent::fast, 0, 0, 0}, static_cast<std::uint64_t>(k));
  }
  EXPECT_NEAR(c / n, 0.0, 5 * std::sqrt(1.0 / n));
}

TEST(Seeds, DerivedSeedsDistinct) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(ThreadPool, CoversEveryIndexOnce) {
  ThreadPool pool(4);
  std::vector<int> hits(1000, 0);
  for (int round = 0; round < 5; ++round) {
    pool.run(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  }
  for (int h : hits) EXPECT_EQ(h, 5);
}

TEST(ThreadPool, PropagatesExceptions) {
  ThreadPool pool(3);
  EXPECT_THROW(pool.run(100, [](std::size_t i) {
    if (i == 37) throw std::runtime_error("boom");
  }),
               std::runtime_error);
  std::vector<int> hits(10, 0);
  pool.run(10, [&](std::size_t i) { hits[i] = 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}
