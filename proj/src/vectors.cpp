#include "whisker/vectors.hpp"

#include "whisker/bytes.hpp"
#include "whisker/crypto.hpp"
#include "whisker/rng.hpp"
#include "whisker/session.hpp"
#include "whisker/xfer.hpp"

namespace whisker {

namespace {

struct SalsaCase {
  const char* name;
  SalsaKey key;
  SalsaNonce nonce;
  std::uint64_t counter;
};

std::vector<SalsaCase> salsa_cases() {
  std::vector<SalsaCase> cases;
  SalsaKey high_bit{};
  high_bit[0] = 0x80;
  cases.push_back({"salsa20.1", high_bit, {}, 0});
  SalsaKey low_bit{};
  low_bit[31] = 0x01;
  cases.push_back({"salsa20.2", low_bit, {}, 0});
  SalsaKey ramp{};
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<std::uint8_t>(i);
  SalsaNonce nonce{0, 1, 2, 3, 4, 5, 6, 7};
  cases.push_back({"salsa20.3", ramp, nonce, 0});
  cases.push_back({"salsa20.4", ramp, nonce, 7});
  return cases;
}

}  // namespace

std::vector<VectorLine> known_answer_vectors() {
  std::vector<VectorLine> out;
  for (const auto& c : salsa_cases()) {
    std::string n = c.name;
    out.push_back({n + ".key", to_hex(c.key)});
    out.push_back({n + ".nonce", to_hex(c.nonce)});
    out.push_back({n + ".counter", std::to_string(c.counter)});
    out.push_back({n + ".block", to_hex(salsa20_block(c.key, c.nonce, c.counter))});
  }

  Bytes zero_key(32, 0);
  FileKeys keys = derive_file_keys(zero_key);
  out.push_back({"file_keys.extra_key", to_hex(zero_key)});
  out.push_back({"file_keys.enc", to_hex(keys.enc)});
  out.push_back({"file_keys.mac", to_hex(keys.mac)});

  Bytes iv(16);
  for (std::size_t i = 0; i < iv.size(); ++i) iv[i] = static_cast<std::uint8_t>(0xf0 + i);
  Bytes content = to_bytes("whisker file transfer vector: 64 bytes of plaintext for AES-CTR.");
  EncryptedFile enc = encrypt_file(keys, iv, content);
  out.push_back({"file.iv", to_hex(iv)});
  out.push_back({"file.plaintext", to_hex(content)});
  out.push_back({"file.ciphertext", to_hex(enc.ciphertext)});
  out.push_back({"file.mac", to_hex(enc.mac)});

  Sha256Digest digest = sha256(to_bytes("fingerprint vector"));
  out.push_back({"fingerprint.digest", to_hex(digest)});
  out.push_back({"fingerprint.display", format_fingerprint(digest)});
  return out;
}

std::string render_vectors() {
  std::string out;
  for (const auto& line : known_answer_vectors()) out += line.label + " = " + line.hex + "\n";
  return out;
}

}  // namespace whisker
