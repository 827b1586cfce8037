#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "whisker/errors.hpp"
#include "whisker/numtheory.hpp"

using namespace whisker;

TEST(SmallPrimes, MatchSieve) {
  auto is_prime = testkit::sieve(1000);
  std::vector<std::uint32_t> expected;
  for (std::uint32_t n = 0; n < 1000; ++n) {
    if (is_prime[n]) expected.push_back(n);
  }
  EXPECT_EQ(std::vector<std::uint32_t>(kSmallPrimes.begin(), kSmallPrimes.end()), expected);
}

TEST(Primality, EdgeCases) {
  auto rng = testkit::seeded(1);
  for (const auto& profile : {KeygenProfile::baseline(), KeygenProfile::optimized()}) {
    EXPECT_FALSE(is_probable_prime(0, profile, rng));
    EXPECT_FALSE(is_probable_prime(1, profile, rng));
    EXPECT_TRUE(is_probable_prime(2, profile, rng));
    EXPECT_TRUE(is_probable_prime(3, profile, rng));
    EXPECT_FALSE(is_probable_prime(-7, profile, rng));
    EXPECT_TRUE(is_probable_prime(7919, profile, rng));
    EXPECT_FALSE(is_probable_prime(997 * 1009, profile, rng));
  }
}

TEST(Primality, TrialDivisionShortCircuitsSmallFactorComposites) {
  // With trial division on, a composite with a factor below 1000 is decided
  // before any Miller-Rabin round, so no randomness is consumed.
  auto rng = testkit::seeded(2);
  KeygenProfile td = KeygenProfile::optimized();
  EXPECT_FALSE(is_probable_prime(BigInt(997) * 1009, td, rng));
  EXPECT_EQ(rng.blocks_emitted(), 0u);
  KeygenProfile plain = KeygenProfile::baseline();
  EXPECT_FALSE(is_probable_prime(BigInt(997) * 1009, plain, rng));
  EXPECT_GT(rng.blocks_emitted(), 0u);
}

TEST(Primality, CarmichaelAndStrongPseudoprimes) {
  auto rng = testkit::seeded(3);
  KeygenProfile p = KeygenProfile::baseline();
  for (long n : {561L, 1105L, 1729L, 2047L, 3215031751L, 25326001L}) EXPECT_FALSE(is_probable_prime(n, p, rng)) << n;
}

TEST(Primality, AgreesWithGmpOnLargeValues) {
  auto rng = testkit::seeded(4);
  for (int i = 0; i < 200; ++i) {
    BigInt n = random_below(rng, BigInt(1) << 256) | 1;
    EXPECT_EQ(is_probable_prime(n, KeygenProfile::optimized(), rng), testkit::gmp_probable_prime(n, 50));
  }
  BigInt mersenne = (BigInt(1) << 521) - 1;
  EXPECT_TRUE(is_probable_prime(mersenne, KeygenProfile::baseline(), rng));
}

TEST(Primality, ZeroRoundsIsUsageError) {
  auto rng = testkit::seeded(5);
  KeygenProfile p = KeygenProfile::baseline();
  p.mr_rounds = 0;
  EXPECT_THROW(is_probable_prime(101, p, rng), Error);
}

TEST(Profiles, ByName) {
  EXPECT_FALSE(KeygenProfile::by_name("baseline").trial_division);
  EXPECT_FALSE(KeygenProfile::by_name("baseline").seedless);
  EXPECT_TRUE(KeygenProfile::by_name("optimized").trial_division);
  EXPECT_TRUE(KeygenProfile::by_name("optimized").seedless);
  EXPECT_TRUE(KeygenProfile::by_name("trialdiv").trial_division);
  EXPECT_FALSE(KeygenProfile::by_name("trialdiv").seedless);
  EXPECT_TRUE(KeygenProfile::by_name("seedless").seedless);
  EXPECT_THROW(KeygenProfile::by_name("fast"), Error);
}

class ParamGen : public ::testing::TestWithParam<std::string> {};

TEST_P(ParamGen, StructureHolds) {
  auto rng = testkit::seeded(10);
  std::vector<KeygenStage> stages;
  DsaParams params = generate_params(KeygenProfile::by_name(GetParam()), rng,
                                     [&](const KeygenStatus& s) { stages.push_back(s.stage); });
  EXPECT_EQ(bit_length(params.p), 1024u);
  EXPECT_EQ(bit_length(params.q), 160u);
  EXPECT_EQ((params.p - 1) % params.q, 0);
  EXPECT_GT(params.g, 1);
  EXPECT_EQ(powm(params.g, params.q, params.p), 1);
  EXPECT_TRUE(testkit::gmp_probable_prime(params.p, 64));
  EXPECT_TRUE(testkit::gmp_probable_prime(params.q, 64));
  ASSERT_FALSE(stages.empty());
  EXPECT_EQ(stages.back(), KeygenStage::done);
}

INSTANTIATE_TEST_SUITE_P(Profiles, ParamGen, ::testing::Values("baseline", "optimized", "trialdiv", "seedless"));

TEST(Keypair, PublicValueAndFreshness) {
  const auto& kp = testkit::keypair(0);
  EXPECT_EQ(kp.y, powm(kp.params.g, kp.x, kp.params.p));
  EXPECT_TRUE(dsa_public_key_consistent(kp.params, kp.y));
  auto rng = testkit::seeded(11);
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) seen.insert(to_hex(generate_keypair(kp.params, rng).x));
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Keypair, ForcedMaximalExponent) {
  const auto& params = testkit::keypair(0).params;
  // x = 1 + random_below(q - 1); a draw of q - 2 gives x = q - 1.
  testkit::ScriptedRandom stub(to_bytes_be(params.q - 2, 20));
  DsaKeyPair kp = generate_keypair(params, stub);
  EXPECT_EQ(kp.x, params.q - 1);
  EXPECT_EQ(kp.y, powm(params.g, params.q - 1, params.p));
}

TEST(Dsa, SignVerifyAndTamper) {
  const auto& kp = testkit::keypair(0);
  const auto& other = testkit::keypair(1);
  auto rng = testkit::seeded(12);
  for (int i = 0; i < 100; ++i) {
    Bytes msg = rng.random_bytes(1 + i);
    auto digest = dsa_digest(msg);
    DsaSignature sig = dsa_sign(kp, digest, rng);
    EXPECT_TRUE(dsa_verify(kp.params, kp.y, digest, sig));
    EXPECT_FALSE(dsa_verify(other.params, other.y, digest, sig));
    auto flipped = digest;
    flipped[static_cast<std::size_t>(i) % flipped.size()] ^= static_cast<std::uint8_t>(1u << (i % 8));
    EXPECT_FALSE(dsa_verify(kp.params, kp.y, flipped, sig));
  }
}

TEST(Dsa, RangeChecks) {
  const auto& kp = testkit::keypair(0);
  auto rng = testkit::seeded(13);
  auto digest = dsa_digest(to_bytes("range"));
  DsaSignature sig = dsa_sign(kp, digest, rng);
  EXPECT_FALSE(dsa_verify(kp.params, kp.y, digest, DsaSignature{0, sig.s}));
  EXPECT_FALSE(dsa_verify(kp.params, kp.y, digest, DsaSignature{sig.r, kp.params.q}));
  EXPECT_FALSE(dsa_verify(kp.params, kp.y, digest, DsaSignature{sig.r + kp.params.q, sig.s}));
  EXPECT_FALSE(dsa_verify(kp.params, kp.y, digest, DsaSignature{sig.r, -sig.s}));
  EXPECT_THROW(dsa_sign(kp, Bytes(19, 0), rng), Error);
}

TEST(Dsa, DigestIsTruncatedSha256) {
  Bytes msg = to_bytes("abc");
  auto oracle = testkit::sodium_sha256(msg);
  auto d = dsa_digest(msg);
  EXPECT_TRUE(std::equal(d.begin(), d.end(), oracle.begin()));
}

TEST(Dsa, PublicKeyConsistencyRejectsBadKeys) {
  const auto& kp = testkit::keypair(0);
  EXPECT_FALSE(dsa_public_key_consistent(kp.params, 1));
  EXPECT_FALSE(dsa_public_key_consistent(kp.params, kp.params.p));
  EXPECT_FALSE(dsa_public_key_consistent(kp.params, kp.params.p - 1));  // order 2, not q
  DsaParams bad = kp.params;
  bad.q += 2;
  EXPECT_FALSE(dsa_public_key_consistent(bad, kp.y));
}
