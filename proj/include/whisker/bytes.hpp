#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace whisker {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView data);
/// Throws Errc::malformed on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

Bytes to_bytes(std::string_view text);
std::string to_string(ByteView data);

void append(Bytes& out, ByteView data);
void append_u32be(Bytes& out, std::uint32_t value);
void append_u64be(Bytes& out, std::uint64_t value);
/// Appends a 4-byte big-endian length followed by the data.
void append_lp(Bytes& out, ByteView data);
std::uint64_t load_u64be(ByteView data);

}  // namespace whisker
