#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "emclt/rng.hpp"

using namespace emclt;

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::apply(C{0, 0, 0, 0}, K{0, 0}),
            (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::apply(C{~0u, ~0u, ~0u, ~0u}, K{~0u, ~0u}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::apply(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                              K{0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, OrderIndependent) {
  const RandomStream a(7, 3, StreamTag::Step), b(7, 3, StreamTag::Step);
  std::vector<double> fwd(101), rev(101);
  for (std::size_t i = 0; i < fwd.size(); ++i) fwd[i] = a.normal(i);
  for (std::size_t i = rev.size(); i-- > 0;) rev[i] = b.normal(i);
  EXPECT_EQ(fwd, rev);
  std::vector<double> bulk(101);
  a.normals(0, bulk);
  EXPECT_EQ(bulk, fwd);
}

TEST(RandomStream, StreamsAndTagsAreDistinct) {
  const double x = RandomStream(1, 0, StreamTag::Step).normal(0);
  EXPECT_NE(x, RandomStream(1, 1, StreamTag::Step).normal(0));
  EXPECT_NE(x, RandomStream(1, 0, StreamTag::Bridge).normal(0));
  EXPECT_NE(x, RandomStream(2, 0, StreamTag::Step).normal(0));
}

TEST(RandomStream, UniformOpenInterval) {
  const RandomStream r(11, 0, StreamTag::Test);
  double sum = 0;
  std::set<double> seen;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform(i);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    seen.insert(u);
  }
  EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_EQ(seen.size(), std::size_t(n));
}

TEST(RandomStream, NormalMoments) {
  const RandomStream r(12, 5, StreamTag::Test);
  const int n = 400000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal(i);
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 4 / std::sqrt(double(n)));
  EXPECT_NEAR(m2, 1.0, 4 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4 * std::sqrt(96.0 / n));
}
