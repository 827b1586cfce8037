#pragma once

// Multiparty room encryption. Each message is encrypted once under a fresh
// message key; the message key is wrapped for every recipient under the
// pairwise Diffie-Hellman key shared with that recipient, and the whole
// message is DSA-signed by the sender.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "whisker/bigint.hpp"
#include "whisker/bytes.hpp"
#include "whisker/numtheory.hpp"
#include "whisker/rng.hpp"
#include "whisker/session.hpp"

namespace whisker {

struct GroupIdentity {
  BigInt dh_private;
  BigInt dh_public;
  DsaKeyPair dsa;
  std::string nickname;
};

/// Fresh DH key in the session group. Throws Errc::validation on a bad
/// nickname.
GroupIdentity make_group_identity(DsaKeyPair dsa, std::string nickname, RandomSource& rng);

struct PairwiseKeys {
  Key256 enc{};
  Key256 mac{};

  friend bool operator==(const PairwiseKeys&, const PairwiseKeys&) = default;
};

/// SHA-512 of the shared DH secret split into (enc, mac). Symmetric in the
/// pair. Throws Errc::protocol if the peer value is outside [2, p-2].
PairwiseKeys pairwise_key(const GroupIdentity& me, const BigInt& peer_dh_public);

struct RosterEntry {
  BigInt dh_public;
  DsaPublicKey dsa;
};

using Roster = std::map<std::string, RosterEntry>;

struct WrappedKey {
  std::array<std::uint8_t, 16> wrap_iv{};
  std::array<std::uint8_t, 32> wrapped{};
  std::array<std::uint8_t, 32> tag{};

  static constexpr std::size_t kEncodedSize = 80;
  Bytes encode() const;
  /// Throws Errc::malformed unless exactly 80 bytes.
  static WrappedKey decode(ByteView data);
};

struct GroupMessage {
  std::string sender;
  std::array<std::uint8_t, 16> iv{};
  Bytes ciphertext;
  std::map<std::string, WrappedKey> wrapped_keys;
  std::uint64_t counter = 0;
  DsaSignature sig;
};

/// Length-prefixed sender, iv, ciphertext, recipient count, each
/// (nickname, wrapped entry) in nickname order, then the 64-bit counter.
/// This is the byte string the sender signs.
Bytes canonical_encoding(const GroupMessage& msg);

/// Per-room counter bookkeeping for one member.
struct GroupCounters {
  std::uint64_t sent = 0;
  std::map<std::string, std::uint64_t> last_seen;
};

/// Throws Errc::usage when the roster is empty.
GroupMessage group_seal(const GroupIdentity& me, const Roster& roster, ByteView plaintext, GroupCounters& counters,
                        RandomSource& rng);

/// Verifies the sender's signature, this member's wrapped-key tag and the
/// sender's counter before decrypting. Errors: Errc::authentication (bad
/// signature), Errc::no_key (no entry for me), Errc::forgery (bad tag),
/// Errc::replay (non-increasing counter).
Bytes group_open(const GroupIdentity& me, const RosterEntry& sender, const GroupMessage& msg,
                 GroupCounters& counters);

/// SHA-256 over the length-prefixed canonical encodings (signature
/// included) of a member's received messages, in order.
Sha256Digest transcript_digest(std::span<const GroupMessage> log);

/// True iff every member's log digest is identical.
bool transcript_consistency_check(std::span<const std::vector<GroupMessage>> logs);

}  // namespace whisker
