#pragma once

// JSON forms of every protocol message. Integers travel as base64 of their
// minimal big-endian bytes, byte strings as padded standard base64.

#include <json.hpp>

#include <string>

#include "whisker/bigint.hpp"
#include "whisker/errors.hpp"
#include "whisker/group.hpp"
#include "whisker/numtheory.hpp"
#include "whisker/session.hpp"
#include "whisker/smp.hpp"
#include "whisker/xfer.hpp"

namespace whisker {

using Json = nlohmann::json;

std::string encode_int(const BigInt& value);
BigInt decode_int(const Json& value);
Bytes decode_b64(const Json& value);

template <std::size_t N>
std::array<std::uint8_t, N> decode_fixed(const Json& value) {
  Bytes raw = decode_b64(value);
  if (raw.size() != N) throw Error(Errc::malformed, "field has wrong length");
  std::array<std::uint8_t, N> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

Json to_json(const DsaPublicKey& key);
Json to_json(const DsaSignature& sig);
Json to_json(const AkeMessage1& msg);
Json to_json(const AkeMessage2& msg);
Json to_json(const AkeMessage3& msg);
Json to_json(const SealedMessage& msg);
Json to_json(const GroupMessage& msg);
Json to_json(const SmpMsg1& msg);
Json to_json(const SmpMsg2& msg);
Json to_json(const SmpMsg3& msg);
Json to_json(const SmpMsg4& msg);
Json to_json(const IbbFrame& frame);

// Decoders throw Errc::malformed on any missing or ill-typed field.
DsaPublicKey dsa_public_key_from_json(const Json& j);
DsaSignature dsa_signature_from_json(const Json& j);
AkeMessage1 ake1_from_json(const Json& j);
AkeMessage2 ake2_from_json(const Json& j);
AkeMessage3 ake3_from_json(const Json& j);
SealedMessage sealed_from_json(const Json& j);
GroupMessage group_message_from_json(const Json& j);
SmpMsg1 smp1_from_json(const Json& j);
SmpMsg2 smp2_from_json(const Json& j);
SmpMsg3 smp3_from_json(const Json& j);
SmpMsg4 smp4_from_json(const Json& j);
IbbFrame ibb_frame_from_json(const Json& j);

/// Parses JSON text, mapping parse failures to Errc::malformed.
Json parse_json(std::string_view text);

/// Runs a decoder, converting nlohmann exceptions into Errc::malformed.
template <typename F>
auto decode_or_malformed(F&& decode) -> decltype(decode()) {
  try {
    return decode();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("malformed message: ") + e.what());
  }
}

}  // namespace whisker
