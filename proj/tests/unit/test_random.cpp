#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "semtest/random.hpp"

using semtest::Rng;
using semtest::SplitMix64;

TEST(SplitMix64, MatchesReferenceSequence) {
  SplitMix64 mix(1234567);
  EXPECT_EQ(mix.next(), 6457827717110365317ULL);
  EXPECT_EQ(mix.next(), 3203168211198807973ULL);
  EXPECT_EQ(mix.next(), 9817491932198370423ULL);
}

TEST(Fnv1a, ReferenceVectors) {
  EXPECT_EQ(semtest::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(semtest::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(semtest::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Xoshiro, MatchesIndependentImplementation) {
  Rng rng(42);
  EXPECT_EQ(rng.next_u64(), 1546998764402558742ULL);
  EXPECT_EQ(rng.next_u64(), 6990951692964543102ULL);
  EXPECT_EQ(rng.next_u64(), 12544586762248559009ULL);
}

TEST(DeriveSeed, DistinctTagsAndIndicesGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (const char* tag : {"synth", "train-generator", "inject-fault", "adv-train", "gen-tests"}) {
    EXPECT_TRUE(seen.insert(semtest::derive_seed(7, tag)).second) << tag;
  }
  for (std::uint64_t i = 0; i < 1000; ++i) EXPECT_TRUE(seen.insert(semtest::derive_seed(7, i)).second);
  EXPECT_NE(semtest::derive_seed(7, "synth"), semtest::derive_seed(8, "synth"));
  EXPECT_EQ(semtest::derive_seed(7, "synth"), semtest::derive_seed(7, "synth"));
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(1);
  double lo = 1, hi = 0, mean = 0;
  constexpr int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    mean += u / n;
  }
  EXPECT_LT(lo, 1e-3);
  EXPECT_GT(hi, 1 - 1e-3);
  EXPECT_NEAR(mean, 0.5, 0.01);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) counts[rng.below(7)]++;
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_EQ(rng.below(1), 0u);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  double mean = 0, sq = 0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    mean += v / n;
    sq += v * v / n;
  }
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> a(50), b(50);
  for (int i = 0; i < 50; ++i) a[i] = b[i] = i;
  Rng r1(9), r2(9);
  r1.shuffle(a.begin(), a.end());
  r2.shuffle(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 50u);
  std::vector<int> identity(50);
  for (int i = 0; i < 50; ++i) identity[i] = i;
  EXPECT_NE(a, identity);
}
