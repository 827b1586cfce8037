#include "whisker/numtheory.hpp"

#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"

namespace whisker {

KeygenProfile KeygenProfile::baseline() { return {"baseline", false, false, 40}; }

KeygenProfile KeygenProfile::optimized() { return {"optimized", true, true, 40}; }

KeygenProfile KeygenProfile::by_name(std::string_view name) {
  if (name == "baseline") return baseline();
  if (name == "optimized") return optimized();
  if (name == "trialdiv") return {"trialdiv", true, false, 40};
  if (name == "seedless") return {"seedless", false, true, 40};
  throw Error(Errc::usage, "unknown keygen profile '" + std::string(name) + "'");
}

bool is_probable_prime(const BigInt& n, const KeygenProfile& profile, RandomSource& rng) {
  if (profile.mr_rounds == 0) throw Error(Errc::usage, "mr_rounds must be at least 1");
  if (n < 2) return false;
  if (n < 4) return true;
  if (mpz_even_p(n.get_mpz_t())) return false;

  if (profile.trial_division) {
    for (auto prime : kSmallPrimes) {
      if (n == prime) return true;
      if (mpz_divisible_ui_p(n.get_mpz_t(), prime)) return false;
    }
  }

  const BigInt n_minus_1 = n - 1;
  const BigInt n_minus_2 = n - 2;
  auto s = mpz_scan1(n_minus_1.get_mpz_t(), 0);
  BigInt d = n_minus_1 >> s;

  for (unsigned round = 0; round < profile.mr_rounds; ++round) {
    BigInt a = random_range(rng, 2, n_minus_2);
    BigInt x = powm(a, d, n);
    if (x == 1 || x == n_minus_1) continue;
    bool witness = true;
    for (unsigned long i = 1; i < s; ++i) {
      x = x * x % n;
      if (x == n_minus_1) {
        witness = false;
        break;
      }
      if (x == 1) break;
    }
    if (witness) return false;
  }
  return true;
}

namespace {

void notify(const KeygenObserver& observer, KeygenStage stage, std::uint64_t q_candidates,
            std::uint64_t p_candidates) {
  if (observer) observer(KeygenStatus{stage, q_candidates, p_candidates});
}

BigInt find_generator(const DsaParams& params) {
  const BigInt exponent = (params.p - 1) / params.q;
  for (BigInt h = 2;; ++h) {
    BigInt g = powm(h, exponent, params.p);
    if (g > 1) return g;
  }
}

// Random candidates straight from the generator; no record of how they were
// derived is kept.
DsaParams generate_seedless(const KeygenProfile& profile, RandomSource& rng, const KeygenObserver& observer) {
  constexpr std::size_t kAttemptsPerQ = 4 * kDsaPrimeBits;
  std::uint64_t q_candidates = 0;
  std::uint64_t p_candidates = 0;
  Bytes q_bytes(kDsaSubgroupBits / 8);
  Bytes p_bytes(kDsaPrimeBits / 8);

  for (;;) {
    BigInt q;
    do {
      rng.fill(q_bytes);
      q_bytes.front() |= 0x80;
      q_bytes.back() |= 0x01;
      q = from_bytes_be(q_bytes);
      ++q_candidates;
    } while (!is_probable_prime(q, profile, rng));
    notify(observer, KeygenStage::subgroup_prime, q_candidates, p_candidates);

    const BigInt two_q = 2 * q;
    for (std::size_t attempt = 0; attempt < kAttemptsPerQ; ++attempt) {
      rng.fill(p_bytes);
      p_bytes.front() |= 0x80;
      BigInt p = from_bytes_be(p_bytes);
      BigInt rem = p % two_q;
      p = p - rem + 1;
      ++p_candidates;
      if ((p_candidates & 0x3f) == 0) notify(observer, KeygenStage::modulus_prime, q_candidates, p_candidates);
      if (bit_length(p) != kDsaPrimeBits) continue;
      if (!is_probable_prime(p, profile, rng)) continue;
      DsaParams params{std::move(p), q, 0};
      notify(observer, KeygenStage::generator, q_candidates, p_candidates);
      params.g = find_generator(params);
      return params;
    }
  }
}

// Verification-seed derivation: q and every p candidate are hash-chained
// from a 160-bit seed (SHA-256, outlen 256). The seed and counter would let a
// third party re-derive the primes.
DsaParams generate_seeded(const KeygenProfile& profile, RandomSource& rng, const KeygenObserver& observer) {
  constexpr std::size_t kSeedBytes = kDsaSubgroupBits / 8;
  constexpr std::size_t kOutBits = 256;
  constexpr std::size_t kBlocks = (kDsaPrimeBits + kOutBits - 1) / kOutBits - 1;  // n = 3
  constexpr std::size_t kTailBits = kDsaPrimeBits - 1 - kBlocks * kOutBits;      // b = 255
  constexpr std::size_t kAttemptsPerQ = 4 * kDsaPrimeBits;

  const BigInt seed_modulus = BigInt(1) << (8 * kSeedBytes);
  const BigInt q_floor = BigInt(1) << (kDsaSubgroupBits - 1);
  const BigInt p_floor = BigInt(1) << (kDsaPrimeBits - 1);
  const BigInt tail_modulus = BigInt(1) << kTailBits;

  std::uint64_t q_candidates = 0;
  std::uint64_t p_candidates = 0;

  auto hash_int = [](const BigInt& value) {
    auto digest = sha256(to_bytes_be(value, kSeedBytes));
    return from_bytes_be(digest);
  };

  for (;;) {
    BigInt seed = from_bytes_be(rng.bytes(kSeedBytes));
    BigInt u = hash_int(seed) % q_floor;
    BigInt q = q_floor + u + 1 - (u % 2);
    ++q_candidates;
    if (!is_probable_prime(q, profile, rng)) continue;
    notify(observer, KeygenStage::subgroup_prime, q_candidates, p_candidates);

    const BigInt two_q = 2 * q;
    std::size_t offset = 1;
    for (std::size_t counter = 0; counter < kAttemptsPerQ; ++counter) {
      BigInt w = 0;
      for (std::size_t j = 0; j <= kBlocks; ++j) {
        BigInt v = hash_int((seed + offset + j) % seed_modulus);
        if (j == kBlocks) v %= tail_modulus;
        w += v << (j * kOutBits);
      }
      BigInt x = w + p_floor;
      BigInt c = x % two_q;
      BigInt p = x - (c - 1);
      offset += kBlocks + 1;
      ++p_candidates;
      if ((p_candidates & 0x3f) == 0) notify(observer, KeygenStage::modulus_prime, q_candidates, p_candidates);
      if (p < p_floor) continue;
      if (!is_probable_prime(p, profile, rng)) continue;
      DsaParams params{std::move(p), q, 0};
      notify(observer, KeygenStage::generator, q_candidates, p_candidates);
      params.g = find_generator(params);
      return params;
    }
  }
}

}  // namespace

DsaParams generate_params(const KeygenProfile& profile, RandomSource& rng, const KeygenObserver& observer) {
  if (profile.mr_rounds == 0) throw Error(Errc::usage, "mr_rounds must be at least 1");
  DsaParams params =
      profile.seedless ? generate_seedless(profile, rng, observer) : generate_seeded(profile, rng, observer);
  notify(observer, KeygenStage::done, 0, 0);
  return params;
}

DsaKeyPair generate_keypair(const DsaParams& params, RandomSource& rng) {
  BigInt x = random_range(rng, 1, params.q - 1);
  BigInt y = powm(params.g, x, params.p);
  return DsaKeyPair{params, std::move(x), std::move(y)};
}

std::array<std::uint8_t, kDsaDigestSize> dsa_digest(ByteView message) {
  auto full = sha256(message);
  std::array<std::uint8_t, kDsaDigestSize> out{};
  std::copy_n(full.begin(), out.size(), out.begin());
  return out;
}

DsaSignature dsa_sign(const DsaKeyPair& key, ByteView digest, RandomSource& rng) {
  if (digest.size() != kDsaDigestSize) throw Error(Errc::usage, "DSA digest must be 20 bytes");
  const auto& [p, q, g] = key.params;
  const BigInt z = from_bytes_be(digest);
  for (;;) {
    BigInt k = random_range(rng, 1, q - 1);
    BigInt r = powm(g, k, p) % q;
    if (r == 0) continue;
    BigInt s = invert(k, q) * (z + key.x * r) % q;
    if (s == 0) continue;
    return DsaSignature{std::move(r), std::move(s)};
  }
}

bool dsa_verify(const DsaParams& params, const BigInt& y, ByteView digest, const DsaSignature& sig) {
  const auto& [p, q, g] = params;
  if (digest.size() != kDsaDigestSize) return false;
  if (q <= 1 || p <= 1) return false;
  if (sig.r <= 0 || sig.r >= q || sig.s <= 0 || sig.s >= q) return false;
  if (y <= 1 || y >= p) return false;
  BigInt w;
  if (mpz_invert(w.get_mpz_t(), sig.s.get_mpz_t(), q.get_mpz_t()) == 0) return false;
  const BigInt z = from_bytes_be(digest);
  BigInt u1 = z * w % q;
  BigInt u2 = sig.r * w % q;
  BigInt v = powm(g, u1, p) * powm(y, u2, p) % p % q;
  return v == sig.r;
}

bool dsa_public_key_consistent(const DsaParams& params, const BigInt& y) {
  const auto& [p, q, g] = params;
  if (bit_length(p) != kDsaPrimeBits || bit_length(q) != kDsaSubgroupBits) return false;
  if ((p - 1) % q != 0) return false;
  if (g <= 1 || g >= p || powm(g, q, p) != 1) return false;
  if (y <= 1 || y >= p || powm(y, q, p) != 1) return false;
  return true;
}

Bytes encode_public_key(const DsaParams& params, const BigInt& y) {
  Bytes out;
  append_lp(out, to_bytes_be(params.p));
  append_lp(out, to_bytes_be(params.q));
  append_lp(out, to_bytes_be(params.g));
  append_lp(out, to_bytes_be(y));
  return out;
}

}  // namespace whisker
