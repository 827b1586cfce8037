#pragma once

// Symmetric primitives and encodings shared by the session, group and
// file-transfer layers. Thin wrappers over OpenSSL libcrypto.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "whisker/bytes.hpp"

namespace whisker {

using Sha256Digest = std::array<std::uint8_t, 32>;
using Sha512Digest = std::array<std::uint8_t, 64>;

Sha256Digest sha256(ByteView data);
Sha512Digest sha512(ByteView data);
Sha512Digest hmac_sha512(ByteView key, ByteView data);

/// AES-256 in counter mode. The 16-byte iv is the initial counter block,
/// incremented as a 128-bit big-endian integer per block. Encryption and
/// decryption are the same operation.
Bytes aes256_ctr(ByteView key, ByteView iv, ByteView data);

/// Constant-time equality; unequal lengths compare false.
bool ct_equal(ByteView a, ByteView b);

std::string base64_encode(ByteView data);
/// Standard alphabet with padding. Throws Errc::malformed on invalid input.
Bytes base64_decode(std::string_view text);

/// Reads n bytes from the operating system entropy source.
Bytes os_entropy(std::size_t n);

}  // namespace whisker
