#include <gtest/gtest.h>

#include <set>

#include "gcgpn/errors.hpp"
#include "gcgpn/random.hpp"

using namespace gcgpn;

TEST(Random, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Random, SampleIsDistinctAndInRange) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_sample(20, 7, rng);
    ASSERT_EQ(s.size(), 7u);
    std::set<std::size_t> u(s.begin(), s.end());
    EXPECT_EQ(u.size(), 7u);
    EXPECT_LT(*u.rbegin(), 20u);
  }
}

TEST(Random, FullSampleIsPermutation) {
  Rng rng(4);
  auto s = random_sample(9, 9, rng);
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(s[i], i);
}

TEST(Random, OversampleThrows) {
  Rng rng(5);
  EXPECT_THROW(random_sample(3, 4, rng), SamplingError);
}
