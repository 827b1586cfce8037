#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <string>

#include "whisker/bytes.hpp"

namespace whisker {

using BigInt = mpz_class;

/// Unsigned big-endian import.
BigInt from_bytes_be(ByteView data);
/// Minimal big-endian encoding (zero encodes as a single 0x00 byte).
Bytes to_bytes_be(const BigInt& value);
/// Fixed-width big-endian encoding, left-padded with zeros. Throws
/// Errc::domain if the value does not fit.
Bytes to_bytes_be(const BigInt& value, std::size_t width);
std::size_t bit_length(const BigInt& value);
BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod);
/// Throws Errc::domain if no inverse exists.
BigInt invert(const BigInt& value, const BigInt& mod);

std::string to_hex(const BigInt& value);
BigInt bigint_from_hex(const std::string& hex);

}  // namespace whisker
