#include "whisker/codec.hpp"

namespace whisker {

std::string encode_int(const BigInt& value) { return base64_encode(to_bytes_be(value)); }

Bytes decode_b64(const Json& value) {
  if (!value.is_string()) throw Error(Errc::malformed, "expected a base64 string");
  return base64_decode(value.get_ref<const std::string&>());
}

BigInt decode_int(const Json& value) {
  Bytes raw = decode_b64(value);
  if (raw.empty()) throw Error(Errc::malformed, "empty integer field");
  return from_bytes_be(raw);
}

Json parse_json(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::malformed, "invalid JSON");
  return j;
}

namespace {

const Json& field(const Json& j, const char* name) {
  if (!j.is_object()) throw Error(Errc::malformed, "expected a JSON object");
  auto it = j.find(name);
  if (it == j.end()) throw Error(Errc::malformed, std::string("missing field '") + name + "'");
  return *it;
}

BigInt int_field(const Json& j, const char* name) { return decode_int(field(j, name)); }

}  // namespace

Json to_json(const DsaPublicKey& key) {
  return Json{{"p", encode_int(key.params.p)},
              {"q", encode_int(key.params.q)},
              {"g", encode_int(key.params.g)},
              {"y", encode_int(key.y)}};
}

Json to_json(const DsaSignature& sig) { return Json{{"r", encode_int(sig.r)}, {"s", encode_int(sig.s)}}; }

Json to_json(const AkeMessage1& msg) {
  return Json{{"dh", encode_int(msg.dh_public)}, {"identity", to_json(msg.identity)}};
}

Json to_json(const AkeMessage2& msg) {
  return Json{{"dh", encode_int(msg.dh_public)}, {"identity", to_json(msg.identity)}, {"sig", to_json(msg.sig)}};
}

Json to_json(const AkeMessage3& msg) { return Json{{"sig", to_json(msg.sig)}}; }

Json to_json(const SealedMessage& msg) {
  return Json{{"iv", base64_encode(msg.iv)}, {"ct", base64_encode(msg.ciphertext)}, {"tag", base64_encode(msg.tag)}};
}

Json to_json(const GroupMessage& msg) {
  Json keys = Json::object();
  for (const auto& [nick, entry] : msg.wrapped_keys) keys[nick] = base64_encode(entry.encode());
  return Json{{"sender", msg.sender},     {"iv", base64_encode(msg.iv)}, {"ct", base64_encode(msg.ciphertext)},
              {"keys", std::move(keys)}, {"counter", msg.counter},      {"sig", to_json(msg.sig)}};
}

Json to_json(const SmpMsg1& msg) {
  Json j{{"g2a", encode_int(msg.g2a)}, {"c2", encode_int(msg.c2)}, {"d2", encode_int(msg.d2)},
         {"g3a", encode_int(msg.g3a)}, {"c3", encode_int(msg.c3)}, {"d3", encode_int(msg.d3)}};
  if (msg.question) j["question"] = *msg.question;
  return j;
}

Json to_json(const SmpMsg2& msg) {
  return Json{{"g2b", encode_int(msg.g2b)}, {"c2", encode_int(msg.c2)}, {"d2", encode_int(msg.d2)},
              {"g3b", encode_int(msg.g3b)}, {"c3", encode_int(msg.c3)}, {"d3", encode_int(msg.d3)},
              {"pb", encode_int(msg.pb)},   {"qb", encode_int(msg.qb)}, {"cp", encode_int(msg.cp)},
              {"d5", encode_int(msg.d5)},   {"d6", encode_int(msg.d6)}};
}

Json to_json(const SmpMsg3& msg) {
  return Json{{"pa", encode_int(msg.pa)}, {"qa", encode_int(msg.qa)}, {"cp", encode_int(msg.cp)},
              {"d5", encode_int(msg.d5)}, {"d6", encode_int(msg.d6)}, {"ra", encode_int(msg.ra)},
              {"cr", encode_int(msg.cr)}, {"d7", encode_int(msg.d7)}};
}

Json to_json(const SmpMsg4& msg) {
  return Json{{"rb", encode_int(msg.rb)}, {"cr", encode_int(msg.cr)}, {"d7", encode_int(msg.d7)}};
}

Json to_json(const IbbFrame& frame) {
  Json j{{"sid", frame.sid}};
  switch (frame.kind) {
    case FrameKind::open:
      j["kind"] = "open";
      j["block_size"] = frame.block_size;
      if (frame.meta) {
        j["meta"] = Json{{"name", frame.meta->name}, {"size", frame.meta->size}, {"iv", base64_encode(frame.meta->iv)}};
      }
      break;
    case FrameKind::data:
      j["kind"] = "data";
      j["seq"] = frame.seq;
      j["payload"] = base64_encode(frame.payload);
      break;
    case FrameKind::close:
      j["kind"] = "close";
      j["mac"] = base64_encode(frame.mac);
      break;
  }
  return j;
}

DsaPublicKey dsa_public_key_from_json(const Json& j) {
  return decode_or_malformed([&] {
    return DsaPublicKey{DsaParams{int_field(j, "p"), int_field(j, "q"), int_field(j, "g")}, int_field(j, "y")};
  });
}

DsaSignature dsa_signature_from_json(const Json& j) {
  return decode_or_malformed([&] { return DsaSignature{int_field(j, "r"), int_field(j, "s")}; });
}

AkeMessage1 ake1_from_json(const Json& j) {
  return decode_or_malformed(
      [&] { return AkeMessage1{int_field(j, "dh"), dsa_public_key_from_json(field(j, "identity"))}; });
}

AkeMessage2 ake2_from_json(const Json& j) {
  return decode_or_malformed([&] {
    return AkeMessage2{int_field(j, "dh"), dsa_public_key_from_json(field(j, "identity")),
                       dsa_signature_from_json(field(j, "sig"))};
  });
}

AkeMessage3 ake3_from_json(const Json& j) {
  return decode_or_malformed([&] { return AkeMessage3{dsa_signature_from_json(field(j, "sig"))}; });
}

SealedMessage sealed_from_json(const Json& j) {
  return decode_or_malformed([&] {
    SealedMessage msg;
    msg.iv = decode_fixed<16>(field(j, "iv"));
    msg.ciphertext = decode_b64(field(j, "ct"));
    msg.tag = decode_fixed<32>(field(j, "tag"));
    return msg;
  });
}

GroupMessage group_message_from_json(const Json& j) {
  return decode_or_malformed([&] {
    GroupMessage msg;
    msg.sender = field(j, "sender").get<std::string>();
    msg.iv = decode_fixed<16>(field(j, "iv"));
    msg.ciphertext = decode_b64(field(j, "ct"));
    const Json& keys = field(j, "keys");
    if (!keys.is_object()) throw Error(Errc::malformed, "keys must be an object");
    for (const auto& [nick, entry] : keys.items()) msg.wrapped_keys.emplace(nick, WrappedKey::decode(decode_b64(entry)));
    const Json& counter = field(j, "counter");
    if (!counter.is_number_unsigned()) throw Error(Errc::malformed, "counter must be unsigned");
    msg.counter = counter.get<std::uint64_t>();
    msg.sig = dsa_signature_from_json(field(j, "sig"));
    return msg;
  });
}

SmpMsg1 smp1_from_json(const Json& j) {
  return decode_or_malformed([&] {
    SmpMsg1 msg{int_field(j, "g2a"), int_field(j, "c2"), int_field(j, "d2"),
                int_field(j, "g3a"), int_field(j, "c3"), int_field(j, "d3"), std::nullopt};
    if (j.contains("question")) msg.question = j.at("question").get<std::string>();
    return msg;
  });
}

SmpMsg2 smp2_from_json(const Json& j) {
  return decode_or_malformed([&] {
    return SmpMsg2{int_field(j, "g2b"), int_field(j, "c2"), int_field(j, "d2"), int_field(j, "g3b"),
                   int_field(j, "c3"),  int_field(j, "d3"), int_field(j, "pb"), int_field(j, "qb"),
                   int_field(j, "cp"),  int_field(j, "d5"), int_field(j, "d6")};
  });
}

SmpMsg3 smp3_from_json(const Json& j) {
  return decode_or_malformed([&] {
    return SmpMsg3{int_field(j, "pa"), int_field(j, "qa"), int_field(j, "cp"), int_field(j, "d5"),
                   int_field(j, "d6"), int_field(j, "ra"), int_field(j, "cr"), int_field(j, "d7")};
  });
}

SmpMsg4 smp4_from_json(const Json& j) {
  return decode_or_malformed(
      [&] { return SmpMsg4{int_field(j, "rb"), int_field(j, "cr"), int_field(j, "d7")}; });
}

IbbFrame ibb_frame_from_json(const Json& j) {
  return decode_or_malformed([&] {
    IbbFrame frame;
    frame.sid = field(j, "sid").get<std::string>();
    const auto kind = field(j, "kind").get<std::string>();
    if (kind == "open") {
      frame.kind = FrameKind::open;
      frame.block_size = field(j, "block_size").get<std::uint32_t>();
      const Json& meta = field(j, "meta");
      FileMeta m;
      m.name = field(meta, "name").get<std::string>();
      m.size = field(meta, "size").get<std::uint64_t>();
      m.iv = decode_fixed<16>(field(meta, "iv"));
      frame.meta = std::move(m);
    } else if (kind == "data") {
      frame.kind = FrameKind::data;
      const Json& seq = field(j, "seq");
      if (!seq.is_number_unsigned() || seq.get<std::uint64_t>() > 0xffff) {
        throw Error(Errc::malformed, "seq must be a 16-bit unsigned integer");
      }
      frame.seq = seq.get<std::uint16_t>();
      frame.payload = decode_b64(field(j, "payload"));
    } else if (kind == "close") {
      frame.kind = FrameKind::close;
      frame.mac = decode_b64(field(j, "mac"));
      if (frame.mac.size() != 64) throw Error(Errc::malformed, "close mac must be 64 bytes");
    } else {
      throw Error(Errc::malformed, "unknown frame kind");
    }
    return frame;
  });
}

}  // namespace whisker
