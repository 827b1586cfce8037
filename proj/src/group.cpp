#include "whisker/group.hpp"

#include <algorithm>

#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"
#include "whisker/names.hpp"

namespace whisker {

GroupIdentity make_group_identity(DsaKeyPair dsa, std::string nickname, RandomSource& rng) {
  if (!valid_nickname(nickname)) throw Error(Errc::validation, "invalid nickname");
  BigInt x = random_range(rng, 1, DhGroup::subgroup_order() - 1);
  BigInt gx = powm(DhGroup::generator(), x, DhGroup::prime());
  return GroupIdentity{std::move(x), std::move(gx), std::move(dsa), std::move(nickname)};
}

PairwiseKeys pairwise_key(const GroupIdentity& me, const BigInt& peer_dh_public) {
  if (!dh_value_in_range(peer_dh_public)) throw Error(Errc::protocol, "peer DH value out of range");
  Bytes shared = encode_dh(powm(peer_dh_public, me.dh_private, DhGroup::prime()));
  auto expanded = sha512(shared);
  std::fill(shared.begin(), shared.end(), 0);
  PairwiseKeys out;
  std::copy_n(expanded.begin(), 32, out.enc.begin());
  std::copy_n(expanded.begin() + 32, 32, out.mac.begin());
  return out;
}

Bytes WrappedKey::encode() const {
  Bytes out;
  out.reserve(kEncodedSize);
  append(out, wrap_iv);
  append(out, wrapped);
  append(out, tag);
  return out;
}

WrappedKey WrappedKey::decode(ByteView data) {
  if (data.size() != kEncodedSize) throw Error(Errc::malformed, "wrapped key entry must be 80 bytes");
  WrappedKey out;
  std::copy_n(data.begin(), 16, out.wrap_iv.begin());
  std::copy_n(data.begin() + 16, 32, out.wrapped.begin());
  std::copy_n(data.begin() + 48, 32, out.tag.begin());
  return out;
}

Bytes canonical_encoding(const GroupMessage& msg) {
  Bytes out = to_bytes("whisker-group-v1");
  append_lp(out, to_bytes(msg.sender));
  append_lp(out, msg.iv);
  append_lp(out, msg.ciphertext);
  append_u32be(out, static_cast<std::uint32_t>(msg.wrapped_keys.size()));
  for (const auto& [nick, entry] : msg.wrapped_keys) {
    append_lp(out, to_bytes(nick));
    append_lp(out, entry.encode());
  }
  append_u64be(out, msg.counter);
  return out;
}

namespace {

std::array<std::uint8_t, 32> wrap_tag(const PairwiseKeys& pair, const WrappedKey& entry, const GroupMessage& msg) {
  Bytes input;
  append(input, entry.wrap_iv);
  append(input, entry.wrapped);
  append(input, msg.iv);
  append(input, msg.ciphertext);
  append_u64be(input, msg.counter);
  auto full = hmac_sha512(pair.mac, input);
  std::array<std::uint8_t, 32> out{};
  std::copy_n(full.begin(), 32, out.begin());
  return out;
}

}  // namespace

GroupMessage group_seal(const GroupIdentity& me, const Roster& roster, ByteView plaintext, GroupCounters& counters,
                        RandomSource& rng) {
  if (roster.empty()) throw Error(Errc::usage, "group message needs at least one recipient");

  Key256 message_key{};
  rng.fill(message_key);

  GroupMessage msg;
  msg.sender = me.nickname;
  rng.fill(msg.iv);
  msg.ciphertext = aes256_ctr(message_key, msg.iv, plaintext);
  msg.counter = counters.sent + 1;

  for (const auto& [nick, entry] : roster) {
    PairwiseKeys pair = pairwise_key(me, entry.dh_public);
    WrappedKey wrapped;
    rng.fill(wrapped.wrap_iv);
    Bytes sealed_key = aes256_ctr(pair.enc, wrapped.wrap_iv, message_key);
    std::copy_n(sealed_key.begin(), 32, wrapped.wrapped.begin());
    wrapped.tag = wrap_tag(pair, wrapped, msg);
    msg.wrapped_keys.emplace(nick, wrapped);
  }
  std::fill(message_key.begin(), message_key.end(), 0);

  msg.sig = dsa_sign(me.dsa, dsa_digest(canonical_encoding(msg)), rng);
  counters.sent = msg.counter;
  return msg;
}

Bytes group_open(const GroupIdentity& me, const RosterEntry& sender, const GroupMessage& msg,
                 GroupCounters& counters) {
  if (!dsa_verify(sender.dsa.params, sender.dsa.y, dsa_digest(canonical_encoding(msg)), msg.sig)) {
    throw Error(Errc::authentication, "group message signature does not verify");
  }
  auto mine = msg.wrapped_keys.find(me.nickname);
  if (mine == msg.wrapped_keys.end()) throw Error(Errc::no_key, "message carries no key for this member");

  PairwiseKeys pair = pairwise_key(me, sender.dh_public);
  if (!ct_equal(wrap_tag(pair, mine->second, msg), mine->second.tag)) {
    throw Error(Errc::forgery, "wrapped key tag does not verify");
  }
  auto last = counters.last_seen.find(msg.sender);
  if (last != counters.last_seen.end() && msg.counter <= last->second) {
    throw Error(Errc::replay, "stale group message counter");
  }

  Bytes message_key = aes256_ctr(pair.enc, mine->second.wrap_iv, mine->second.wrapped);
  Bytes plaintext = aes256_ctr(message_key, msg.iv, msg.ciphertext);
  std::fill(message_key.begin(), message_key.end(), 0);
  counters.last_seen[msg.sender] = msg.counter;
  return plaintext;
}

Sha256Digest transcript_digest(std::span<const GroupMessage> log) {
  Bytes all;
  for (const auto& msg : log) {
    Bytes enc = canonical_encoding(msg);
    append_lp(enc, to_bytes_be(msg.sig.r));
    append_lp(enc, to_bytes_be(msg.sig.s));
    append_lp(all, enc);
  }
  return sha256(all);
}

bool transcript_consistency_check(std::span<const std::vector<GroupMessage>> logs) {
  if (logs.empty()) return true;
  const auto first = transcript_digest(logs.front());
  return std::all_of(logs.begin() + 1, logs.end(),
                     [&](const auto& log) { return transcript_digest(log) == first; });
}

}  // namespace whisker
