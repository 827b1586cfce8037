#pragma once

// Probable-prime testing and 1024/160-bit DSA: parameter generation (both
// the seedless fast path and the verification-seed baseline), key
// generation, signing and verification.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "whisker/bigint.hpp"
#include "whisker/bytes.hpp"
#include "whisker/rng.hpp"

namespace whisker {

namespace detail {
template <std::size_t Count>
constexpr std::array<std::uint32_t, Count> sieve_primes_below(std::uint32_t limit) {
  std::array<bool, 1000> composite{};
  std::array<std::uint32_t, Count> out{};
  std::size_t n = 0;
  for (std::uint32_t i = 2; i < limit; ++i) {
    if (composite[i]) continue;
    out[n++] = i;
    for (std::uint32_t j = i * i; j < limit; j += i) composite[j] = true;
  }
  return out;
}
}  // namespace detail

/// The 168 primes strictly below 1000.
inline constexpr auto kSmallPrimes = detail::sieve_primes_below<168>(1000);
static_assert(kSmallPrimes.back() == 997);

inline constexpr std::size_t kDsaPrimeBits = 1024;
inline constexpr std::size_t kDsaSubgroupBits = 160;
inline constexpr std::size_t kDsaDigestSize = 20;

struct KeygenProfile {
  std::string name;
  bool trial_division = true;
  bool seedless = true;
  unsigned mr_rounds = 40;

  /// Verification-seed candidate derivation, no trial division.
  static KeygenProfile baseline();
  /// Trial division plus seedless candidates.
  static KeygenProfile optimized();
  /// One of: baseline, optimized, trialdiv, seedless. Throws Errc::usage.
  static KeygenProfile by_name(std::string_view name);
};

/// Miller-Rabin with random bases in [2, n-2], optionally preceded by
/// trial division by kSmallPrimes. Throws Errc::usage if mr_rounds == 0.
bool is_probable_prime(const BigInt& n, const KeygenProfile& profile, RandomSource& rng);

struct DsaParams {
  BigInt p;
  BigInt q;
  BigInt g;

  friend bool operator==(const DsaParams&, const DsaParams&) = default;
};

struct DsaPublicKey {
  DsaParams params;
  BigInt y;

  friend bool operator==(const DsaPublicKey&, const DsaPublicKey&) = default;
};

struct DsaKeyPair {
  DsaParams params;
  BigInt x;
  BigInt y;

  DsaPublicKey public_key() const { return {params, y}; }
};

struct DsaSignature {
  BigInt r;
  BigInt s;

  friend bool operator==(const DsaSignature&, const DsaSignature&) = default;
};

enum class KeygenStage { subgroup_prime, modulus_prime, generator, done };

struct KeygenStatus {
  KeygenStage stage;
  std::uint64_t q_candidates = 0;
  std::uint64_t p_candidates = 0;
};

using KeygenObserver = std::function<void(const KeygenStatus&)>;

/// Generates (p, q, g) with bitlen(p) = 1024, bitlen(q) = 160, q | p-1 and g
/// of order q. The observer, if set, is called as the search progresses.
DsaParams generate_params(const KeygenProfile& profile, RandomSource& rng, const KeygenObserver& observer = {});

DsaKeyPair generate_keypair(const DsaParams& params, RandomSource& rng);

/// SHA-256 of the message truncated to its leftmost 160 bits.
std::array<std::uint8_t, kDsaDigestSize> dsa_digest(ByteView message);

/// Throws Errc::usage unless digest is 20 bytes.
DsaSignature dsa_sign(const DsaKeyPair& key, ByteView digest, RandomSource& rng);
bool dsa_verify(const DsaParams& params, const BigInt& y, ByteView digest, const DsaSignature& sig);

/// Cheap structural check: bit lengths, q | p-1, 1 < g < p, g^q = 1 mod p,
/// 1 < y < p and y^q = 1 mod p. No primality testing.
bool dsa_public_key_consistent(const DsaParams& params, const BigInt& y);

/// Canonical public-key encoding: length-prefixed big-endian p, q, g, y.
Bytes encode_public_key(const DsaParams& params, const BigInt& y);

}  // namespace whisker
