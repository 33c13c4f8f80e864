#include <gtest/gtest.h>

#include <set>

#include "pushsum/rng.hpp"

namespace pushsum {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a = Rng::derive(5, 2, Stream::kWeights);
  Rng b = Rng::derive(5, 2, Stream::kWeights);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAreDistinct) {
  std::set<std::uint64_t> first;
  for (std::uint64_t node = 0; node < 8; ++node) {
    for (Stream s : {Stream::kWeights, Stream::kCrypto, Stream::kKeygen}) {
      first.insert(Rng::derive(1, node, s).next_u64());
    }
  }
  EXPECT_EQ(first.size(), 24u);
}

TEST(Rng, RealDrawsStayInRange) {
  Rng r(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double o = r.uniform_open01();
    ASSERT_GT(o, 0.0);
    ASSERT_LT(o, 1.0);
    const double v = r.uniform(-10.0, 10.0);
    ASSERT_GT(v, -10.0);
    ASSERT_LT(v, 10.0);
    ASSERT_LT(r.below(7), 7u);
  }
}

TEST(Rng, SplitMixKnownValue) {
  // First output of the reference SplitMix64 generator seeded with 0.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

}  // namespace
}  // namespace pushsum
