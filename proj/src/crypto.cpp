#include "whisker/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>
#include <sys/random.h>

#include <cerrno>
#include <memory>

#include "whisker/errors.hpp"

namespace whisker {

Sha256Digest sha256(ByteView data) {
  Sha256Digest out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Sha512Digest sha512(ByteView data) {
  Sha512Digest out{};
  SHA512(data.data(), data.size(), out.data());
  return out;
}

Sha512Digest hmac_sha512(ByteView key, ByteView data) {
  Sha512Digest out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha512(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(),
           &len) == nullptr) {
    throw Error(Errc::io, "HMAC-SHA512 failed");
  }
  return out;
}

Bytes aes256_ctr(ByteView key, ByteView iv, ByteView data) {
  if (key.size() != 32) throw Error(Errc::usage, "AES-256 key must be 32 bytes");
  if (iv.size() != 16) throw Error(Errc::usage, "AES-CTR iv must be 16 bytes");
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.data(), iv.data()) != 1) {
    throw Error(Errc::io, "AES-256-CTR init failed");
  }
  Bytes out(data.size());
  std::size_t done = 0;
  // EVP_EncryptUpdate takes an int length.
  constexpr std::size_t kStep = 1 << 30;
  while (done < data.size()) {
    int chunk = static_cast<int>(std::min(kStep, data.size() - done));
    int written = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data() + done, &written, data.data() + done, chunk) != 1) {
      throw Error(Errc::io, "AES-256-CTR update failed");
    }
    done += static_cast<std::size_t>(written);
  }
  return out;
}

bool ct_equal(ByteView a, ByteView b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string base64_encode(ByteView data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

namespace {
bool is_b64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' || c == '/';
}
}  // namespace

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::malformed, "base64 length not a multiple of 4");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') pad = (text.size() >= 2 && text[text.size() - 2] == '=') ? 2 : 1;
  for (std::size_t i = 0; i < text.size() - pad; ++i) {
    if (!is_b64_char(text[i])) throw Error(Errc::malformed, "invalid base64 character");
  }
  Bytes out(3 * (text.size() / 4));
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::malformed, "invalid base64");
  out.resize(static_cast<std::size_t>(n) - pad);
  if (base64_encode(out) != text) throw Error(Errc::malformed, "non-canonical base64");
  return out;
}

Bytes os_entropy(std::size_t n) {
  Bytes out(n);
  std::size_t done = 0;
  while (done < n) {
    ssize_t got = getrandom(out.data() + done, n - done, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::io, "getrandom failed");
    }
    done += static_cast<std::size_t>(got);
  }
  return out;
}

}  // namespace whisker
