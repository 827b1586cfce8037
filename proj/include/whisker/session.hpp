#pragma once

// One-to-one encrypted sessions: a signed ephemeral Diffie-Hellman exchange
// over a fixed 1536-bit MODP group, directional AES-256-CTR + HMAC-SHA512
// message protection, the extra symmetric key used for file transfer, and
// human-facing fingerprints and color codes.

#include <array>
#include <cstdint>
#include <set>
#include <string>

#include "whisker/bigint.hpp"
#include "whisker/bytes.hpp"
#include "whisker/crypto.hpp"
#include "whisker/numtheory.hpp"
#include "whisker/rng.hpp"

namespace whisker {

/// RFC 3526 group 5: 1536-bit safe prime, generator 2.
struct DhGroup {
  static constexpr std::size_t kBytes = 192;
  static const BigInt& prime();
  static const BigInt& generator();
  /// (p - 1) / 2, prime.
  static const BigInt& subgroup_order();
};

/// 2 <= value <= p - 2.
bool dh_value_in_range(const BigInt& value);
/// Fixed-width 192-byte big-endian encoding.
Bytes encode_dh(const BigInt& value);

using Key256 = std::array<std::uint8_t, 32>;

struct SessionKeys {
  Key256 send_enc{};
  Key256 send_mac{};
  Key256 recv_enc{};
  Key256 recv_mac{};
  Key256 extra_key{};
  std::uint64_t send_counter = 0;
  std::set<std::uint64_t> recv_window;
  /// SHA-256 of the exchange transcript; identical on both ends.
  Sha256Digest session_id{};
};

struct AkeMessage1 {
  BigInt dh_public;
  DsaPublicKey identity;
};

struct AkeMessage2 {
  BigInt dh_public;
  DsaPublicKey identity;
  DsaSignature sig;
};

/// Carries the initiator's signature over the full transcript.
struct AkeMessage3 {
  DsaSignature sig;
};

struct AkeInitiatorState {
  DsaKeyPair me;
  BigInt dh_private;
  BigInt dh_public;
};

struct AkeResponderState {
  SessionKeys keys;
  DsaPublicKey peer;
  Bytes transcript;
};

struct AkeStart {
  AkeInitiatorState state;
  AkeMessage1 message;
};

struct AkeResponse {
  AkeResponderState state;
  AkeMessage2 message;
};

struct AkeCompletion {
  SessionKeys keys;
  DsaPublicKey peer;
  AkeMessage3 message;
};

AkeStart ake_initiate(const DsaKeyPair& me, RandomSource& rng);
/// Throws Errc::protocol if the initiator's DH value is out of range.
AkeResponse ake_respond(const DsaKeyPair& me, const AkeMessage1& msg1, RandomSource& rng);
/// Throws Errc::protocol on a bad DH value and Errc::authentication if the
/// responder's signature does not verify.
AkeCompletion ake_finalize(const AkeInitiatorState& state, const AkeMessage2& msg2, RandomSource& rng);
/// Throws Errc::authentication if the initiator's signature does not verify.
SessionKeys ake_confirm(AkeResponderState state, const AkeMessage3& msg3);

struct SealedMessage {
  std::array<std::uint8_t, 16> iv{};  // 8 random bytes || 64-bit big-endian counter
  Bytes ciphertext;
  std::array<std::uint8_t, 32> tag{};
};

SealedMessage seal_message(SessionKeys& keys, ByteView plaintext, RandomSource& rng);
/// Throws Errc::forgery on a bad tag and Errc::replay on a repeated counter.
Bytes open_message(SessionKeys& keys, const SealedMessage& sealed);

struct Fingerprint {
  Sha256Digest digest{};
  std::string display;  // 64 lowercase hex chars in 8 space-separated groups

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

Fingerprint fingerprint(const DsaParams& params, const BigInt& y);
inline Fingerprint fingerprint(const DsaPublicKey& key) { return fingerprint(key.params, key.y); }
std::string format_fingerprint(const Sha256Digest& digest);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
  std::string hex() const;
};

struct ColorCode {
  std::array<Rgb, 4> colors{};

  friend bool operator==(const ColorCode&, const ColorCode&) = default;
};

/// colors[i] = digest bytes 3i, 3i+1, 3i+2.
ColorCode color_code(const Fingerprint& fp);

}  // namespace whisker
