#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "omnitm/feature_set.hpp"
#include "omnitm/io.hpp"
#include "omnitm/rng.hpp"

using namespace omnitm;

TEST(Threshold, EndpointsAreExact) {
  EXPECT_TRUE(Threshold::from_probability(0.0).never());
  EXPECT_TRUE(Threshold::from_probability(-0.5).never());
  EXPECT_TRUE(Threshold::from_probability(1.0).always());
  EXPECT_TRUE(Threshold::from_probability(1.0).accepts(0xffffffffu));
  EXPECT_FALSE(Threshold::from_probability(0.0).accepts(0));
  EXPECT_EQ(Threshold::from_probability(0.5).value, 1ull << 31);
  EXPECT_EQ(Threshold::from_probability(0.25).value, 1ull << 30);
}

TEST(DrawStream, IsPureFunctionOfKeyAndCounter) {
  KeyedRng a(99), b(99);
  auto sa = a.stream(DrawKind::type_ia, 3, 17, 5);
  auto sb = b.stream(DrawKind::type_ia, 3, 17, 5);
  for (std::uint64_t c = 0; c < 100; ++c) EXPECT_EQ(sa.at(c), sb.at(c));
  EXPECT_NE(a.stream(DrawKind::type_ia, 3, 17, 5).key(), a.stream(DrawKind::type_ib, 3, 17, 5).key());
  EXPECT_NE(a.stream(DrawKind::select, 0, 1, 0).key(), a.stream(DrawKind::select, 1, 0, 0).key());
  EXPECT_NE(a.child(0).seed(), a.child(1).seed());
}

TEST(DrawStream, TopBitIsFair) {
  KeyedRng rng(5);
  std::size_t ones = 0, n = 0;
  for (std::uint32_t j = 0; j < 50; ++j) {
    auto s = rng.stream(DrawKind::init, 0, 0, j);
    for (std::uint64_t c = 0; c < 2000; ++c, ++n) ones += s.at(c) >> 31;
  }
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 0.01);
}

TEST(SplitMix64, MatchesReferenceSequence) {
  // First outputs of the published SplitMix64 generator seeded with 1234567.
  SplitMix64 r(1234567);
  EXPECT_EQ(r.next(), 6457827717110365317ull);
  EXPECT_EQ(r.next(), 3203168211198807973ull);
  EXPECT_EQ(r.next(), 9817491932198370423ull);
}

TEST(SplitMix64, BelowIsInRangeAndUniform) {
  SplitMix64 r(3);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++hist[v];
  }
  for (int h : hist) EXPECT_NEAR(h / 70000.0, 1.0 / 7, 0.01);
  EXPECT_EQ(r.below(1), 0u);
}

TEST(FeatureSet, BasicOperations) {
  FeatureSet f(70);
  EXPECT_TRUE(f.none());
  f.set(0);
  f.set(69);
  f.set(64);
  EXPECT_EQ(f.count(), 3u);
  EXPECT_TRUE(f.test(69));
  f.reset(64);
  EXPECT_FALSE(f.test(64));
  FeatureSet g(70);
  g.set(5);
  g |= f;
  EXPECT_TRUE(f.subset_of(g));
  EXPECT_FALSE(g.subset_of(f));
  EXPECT_EQ(FeatureSet::from_string(f.to_string()), f);
}

TEST(FeatureSet, LiteralsAreFeaturesThenNegations) {
  auto x = FeatureSet::from_string("101");
  auto lits = make_literals(x);
  ASSERT_EQ(lits.size(), 6u);
  EXPECT_EQ(lits.to_string(), "101010");
  // Padding above 2V stays clear.
  EXPECT_EQ(lits.count(), 3u);
}

TEST(Io, LittleEndianRoundTrip) {
  io::Bytes b;
  io::put_le<std::uint32_t>(b, 0x01020304u);
  io::put_le<std::int32_t>(b, -2);
  io::put_le<std::uint16_t>(b, 0xabcd);
  EXPECT_EQ(b[0], 0x04);
  EXPECT_EQ(b[3], 0x01);
  io::Reader r(b, "buf");
  EXPECT_EQ(r.get<std::uint32_t>(), 0x01020304u);
  EXPECT_EQ(r.get<std::int32_t>(), -2);
  EXPECT_EQ(r.get<std::uint16_t>(), 0xabcd);
  EXPECT_THROW(r.get<std::uint8_t>(), DataError);
}
