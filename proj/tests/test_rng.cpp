#include <gtest/gtest.h>

#include "support.hpp"
#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

using namespace whisker;

namespace {

SalsaKey key_from(std::uint8_t first, std::uint8_t last) {
  SalsaKey k{};
  k[0] = first;
  k[31] = last;
  return k;
}

}  // namespace

TEST(Salsa20, EstreamSet1Vector0) {
  SalsaKey key = key_from(0x80, 0);
  EXPECT_EQ(to_hex(salsa20_block(key, {}, 0)), testkit::kEstreamSet1Vector0);
}

TEST(Salsa20, MatchesLibsodiumAcrossKeysNoncesAndCounters) {
  auto rng = testkit::seeded(7);
  for (int trial = 0; trial < 32; ++trial) {
    SalsaKey key{};
    SalsaNonce nonce{};
    rng.fill(key);
    rng.fill(nonce);
    std::uint64_t counter = trial < 16 ? static_cast<std::uint64_t>(trial) : (std::uint64_t{1} << 32) + trial - 1;
    auto ours = salsa20_block(key, nonce, counter);
    EXPECT_EQ(Bytes(ours.begin(), ours.end()), testkit::sodium_salsa20(key, nonce, counter, 64)) << trial;
  }
}

TEST(Salsa20, DeterministicAndCounterSensitive) {
  SalsaKey key = key_from(1, 2);
  SalsaNonce nonce{9, 8, 7, 6, 5, 4, 3, 2};
  EXPECT_EQ(salsa20_block(key, nonce, 0), salsa20_block(key, nonce, 0));
  EXPECT_NE(salsa20_block(key, nonce, 0), salsa20_block(key, nonce, 1));
  auto oracle = testkit::sodium_salsa20(key, nonce, 0, 128);
  auto b1 = salsa20_block(key, nonce, 1);
  EXPECT_EQ(Bytes(b1.begin(), b1.end()), Bytes(oracle.begin() + 64, oracle.end()));
}

TEST(Csprng, SeedSplitsIntoKeyAndNonce) {
  Bytes zero(40, 0);
  Csprng a(zero);
  EXPECT_EQ(a.key(), SalsaKey{});
  EXPECT_EQ(a.nonce(), SalsaNonce{});

  Bytes ramp(40);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<std::uint8_t>(i);
  Csprng b(ramp);
  EXPECT_EQ(Bytes(b.key().begin(), b.key().end()), Bytes(ramp.begin(), ramp.begin() + 32));
  EXPECT_EQ(Bytes(b.nonce().begin(), b.nonce().end()), Bytes(ramp.begin() + 32, ramp.end()));
  EXPECT_EQ(b.block_counter(), 0u);
}

TEST(Csprng, RejectsWrongSeedLength) {
  for (std::size_t n : {0, 39, 41, 64}) {
    Bytes seed(n, 1);
    try {
      Csprng rng(seed);
      FAIL() << n;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::seed_length);
    }
  }
}

TEST(Csprng, OutputIsTheKeystream) {
  Csprng rng(Bytes(40, 0));
  EXPECT_TRUE(rng.random_bytes(0).empty());
  EXPECT_EQ(rng.block_counter(), 0u);
  EXPECT_EQ(rng.random_bytes(96), testkit::sodium_salsa20({}, {}, 0, 96));
}

TEST(Csprng, SplitCallsMatchOneCall) {
  auto a = testkit::seeded(3);
  auto b = testkit::seeded(3);
  Bytes joined = a.random_bytes(32);
  append(joined, a.random_bytes(32));
  EXPECT_EQ(joined, b.random_bytes(64));

  // Odd-sized pieces across block boundaries.
  auto c = testkit::seeded(4);
  auto d = testkit::seeded(4);
  Bytes pieces;
  for (std::size_t n : {1, 63, 65, 7, 200, 0, 3}) append(pieces, c.random_bytes(n));
  EXPECT_EQ(pieces, d.random_bytes(pieces.size()));
}

TEST(Csprng, ReseedCeilingIsEnforced) {
  Csprng rng(Bytes(40, 5), 2);
  rng.random_bytes(100);
  EXPECT_EQ(rng.blocks_emitted(), 2u);
  rng.random_bytes(28);  // the rest of block 2 is still buffered
  try {
    rng.random_bytes(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::exhausted);
  }
  Csprng big(Bytes(40, 5), 2);
  EXPECT_THROW(big.random_bytes(129), Error);
  EXPECT_EQ(big.blocks_emitted(), 0u);  // nothing consumed by the failed request
}

TEST(Csprng, OsEntropySeedsDiffer) {
  auto a = Csprng::from_os_entropy();
  auto b = Csprng::from_os_entropy();
  EXPECT_NE(a.random_bytes(32), b.random_bytes(32));
}

TEST(RandomBelow, EdgeCases) {
  auto rng = testkit::seeded(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(random_below(rng, 1), 0);
  EXPECT_THROW(random_below(rng, 0), Error);
  EXPECT_THROW(random_below(rng, -5), Error);
  BigInt bound = BigInt(1) << 160;
  for (int i = 0; i < 1000; ++i) {
    BigInt v = random_below(rng, bound);
    EXPECT_GE(v, 0);
    EXPECT_LT(v, bound);
  }
}

TEST(RandomBelow, SixSidedFrequenciesWithinFourSigma) {
  auto rng = testkit::seeded(2);
  std::vector<std::uint64_t> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[random_below(rng, 6).get_ui()];
  double sigma = std::sqrt(60000.0 * (1.0 / 6) * (5.0 / 6));
  for (auto c : counts) EXPECT_LT(std::abs(static_cast<double>(c) - 10000.0), 4 * sigma);
  EXPECT_GT(testkit::chi_square_p(counts), 0.001);
}

TEST(RandomBelow, RangeIsInclusive) {
  auto rng = testkit::seeded(3);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 2000; ++i) {
    BigInt v = random_range(rng, 5, 8);
    EXPECT_GE(v, 5);
    EXPECT_LE(v, 8);
    saw_lo = saw_lo || v == 5;
    saw_hi = saw_hi || v == 8;
  }
  EXPECT_TRUE(saw_lo && saw_hi);
}
