#include "whisker/session.hpp"

#include <algorithm>

#include "whisker/errors.hpp"

namespace whisker {

namespace {

constexpr const char* kModp1536Hex =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA237327FFFFFFFFFFFFFFFF";

template <std::size_t N>
std::array<std::uint8_t, N> take(ByteView data, std::size_t offset) {
  std::array<std::uint8_t, N> out{};
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(offset), N, out.begin());
  return out;
}

Bytes transcript_of(const BigInt& initiator_dh, const BigInt& responder_dh, const DsaPublicKey& initiator,
                    const DsaPublicKey& responder) {
  Bytes t = to_bytes("whisker-ake-v1");
  append_lp(t, encode_dh(initiator_dh));
  append_lp(t, encode_dh(responder_dh));
  append_lp(t, encode_public_key(initiator.params, initiator.y));
  append_lp(t, encode_public_key(responder.params, responder.y));
  return t;
}

std::array<std::uint8_t, kDsaDigestSize> role_digest(char role, ByteView transcript) {
  Bytes m{static_cast<std::uint8_t>(role)};
  append(m, transcript);
  return dsa_digest(m);
}

// Keys for the initiator's point of view; the responder swaps directions.
SessionKeys derive_keys(const BigInt& shared, ByteView transcript, bool initiator) {
  Bytes shared_bytes = encode_dh(shared);
  auto i2r = sha512(shared_bytes);
  Bytes r2i_input = to_bytes("responder");
  append(r2i_input, shared_bytes);
  auto r2i = sha512(r2i_input);
  Bytes extra_input = to_bytes("extra");
  append(extra_input, shared_bytes);
  auto extra = sha512(extra_input);

  SessionKeys keys;
  const auto& send = initiator ? i2r : r2i;
  const auto& recv = initiator ? r2i : i2r;
  keys.send_enc = take<32>(send, 0);
  keys.send_mac = take<32>(send, 32);
  keys.recv_enc = take<32>(recv, 0);
  keys.recv_mac = take<32>(recv, 32);
  keys.extra_key = take<32>(extra, 0);
  keys.session_id = sha256(transcript);
  std::fill(shared_bytes.begin(), shared_bytes.end(), 0);
  return keys;
}

void check_identity(const DsaPublicKey& key) {
  if (!dsa_public_key_consistent(key.params, key.y)) throw Error(Errc::protocol, "malformed DSA identity");
}

}  // namespace

const BigInt& DhGroup::prime() {
  static const BigInt p = bigint_from_hex(kModp1536Hex);
  return p;
}

const BigInt& DhGroup::generator() {
  static const BigInt g = 2;
  return g;
}

const BigInt& DhGroup::subgroup_order() {
  static const BigInt q = (prime() - 1) / 2;
  return q;
}

bool dh_value_in_range(const BigInt& value) { return value >= 2 && value <= DhGroup::prime() - 2; }

Bytes encode_dh(const BigInt& value) { return to_bytes_be(value, DhGroup::kBytes); }

AkeStart ake_initiate(const DsaKeyPair& me, RandomSource& rng) {
  BigInt a = random_range(rng, 1, DhGroup::subgroup_order() - 1);
  BigInt ga = powm(DhGroup::generator(), a, DhGroup::prime());
  AkeMessage1 msg{ga, me.public_key()};
  return AkeStart{AkeInitiatorState{me, std::move(a), std::move(ga)}, std::move(msg)};
}

AkeResponse ake_respond(const DsaKeyPair& me, const AkeMessage1& msg1, RandomSource& rng) {
  if (!dh_value_in_range(msg1.dh_public)) throw Error(Errc::protocol, "initiator DH value out of range");
  check_identity(msg1.identity);

  BigInt b = random_range(rng, 1, DhGroup::subgroup_order() - 1);
  BigInt gb = powm(DhGroup::generator(), b, DhGroup::prime());
  BigInt shared = powm(msg1.dh_public, b, DhGroup::prime());

  DsaPublicKey mine = me.public_key();
  Bytes transcript = transcript_of(msg1.dh_public, gb, msg1.identity, mine);
  auto digest = role_digest('R', transcript);
  DsaSignature sig = dsa_sign(me, digest, rng);

  AkeResponse out;
  out.state.keys = derive_keys(shared, transcript, false);
  out.state.peer = msg1.identity;
  out.state.transcript = std::move(transcript);
  out.message = AkeMessage2{std::move(gb), std::move(mine), std::move(sig)};
  return out;
}

AkeCompletion ake_finalize(const AkeInitiatorState& state, const AkeMessage2& msg2, RandomSource& rng) {
  if (!dh_value_in_range(msg2.dh_public)) throw Error(Errc::protocol, "responder DH value out of range");
  check_identity(msg2.identity);

  Bytes transcript = transcript_of(state.dh_public, msg2.dh_public, state.me.public_key(), msg2.identity);
  auto digest = role_digest('R', transcript);
  if (!dsa_verify(msg2.identity.params, msg2.identity.y, digest, msg2.sig)) {
    throw Error(Errc::authentication, "responder signature does not verify");
  }
  BigInt shared = powm(msg2.dh_public, state.dh_private, DhGroup::prime());
  auto my_digest = role_digest('I', transcript);

  AkeCompletion out;
  out.keys = derive_keys(shared, transcript, true);
  out.peer = msg2.identity;
  out.message = AkeMessage3{dsa_sign(state.me, my_digest, rng)};
  return out;
}

SessionKeys ake_confirm(AkeResponderState state, const AkeMessage3& msg3) {
  auto digest = role_digest('I', state.transcript);
  if (!dsa_verify(state.peer.params, state.peer.y, digest, msg3.sig)) {
    throw Error(Errc::authentication, "initiator signature does not verify");
  }
  return std::move(state.keys);
}

namespace {

std::array<std::uint8_t, 32> message_tag(const Key256& mac_key, ByteView iv, ByteView ciphertext) {
  Bytes input(iv.begin(), iv.end());
  append(input, ciphertext);
  auto full = hmac_sha512(mac_key, input);
  return take<32>(full, 0);
}

}  // namespace

SealedMessage seal_message(SessionKeys& keys, ByteView plaintext, RandomSource& rng) {
  SealedMessage out;
  rng.fill(std::span(out.iv.data(), 8));
  std::uint64_t counter = ++keys.send_counter;
  for (int i = 0; i < 8; ++i) out.iv[8 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  out.ciphertext = aes256_ctr(keys.send_enc, out.iv, plaintext);
  out.tag = message_tag(keys.send_mac, out.iv, out.ciphertext);
  return out;
}

Bytes open_message(SessionKeys& keys, const SealedMessage& sealed) {
  auto expected = message_tag(keys.recv_mac, sealed.iv, sealed.ciphertext);
  if (!ct_equal(expected, sealed.tag)) throw Error(Errc::forgery, "message tag does not verify");
  std::uint64_t counter = load_u64be(ByteView(sealed.iv).subspan(8));
  if (!keys.recv_window.insert(counter).second) throw Error(Errc::replay, "replayed message counter");
  return aes256_ctr(keys.recv_enc, sealed.iv, sealed.ciphertext);
}

std::string format_fingerprint(const Sha256Digest& digest) {
  std::string hex = to_hex(digest);
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 8) {
    if (i) out.push_back(' ');
    out.append(hex, i, 8);
  }
  return out;
}

Fingerprint fingerprint(const DsaParams& params, const BigInt& y) {
  Fingerprint fp;
  fp.digest = sha256(encode_public_key(params, y));
  fp.display = format_fingerprint(fp.digest);
  return fp;
}

std::string Rgb::hex() const {
  std::array<std::uint8_t, 3> rgb{r, g, b};
  return "#" + to_hex(rgb);
}

ColorCode color_code(const Fingerprint& fp) {
  ColorCode out;
  for (std::size_t i = 0; i < out.colors.size(); ++i) {
    out.colors[i] = Rgb{fp.digest[3 * i], fp.digest[3 * i + 1], fp.digest[3 * i + 2]};
  }
  return out;
}

}  // namespace whisker
