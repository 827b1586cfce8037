#pragma once

#include <string_view>

namespace whisker {

inline constexpr std::size_t kMaxNicknameLength = 32;
inline constexpr std::size_t kMaxRoomLength = 64;

/// 1-32 printable ASCII characters, no whitespace.
constexpr bool valid_nickname(std::string_view nick) {
  if (nick.empty() || nick.size() > kMaxNicknameLength) return false;
  for (char c : nick) {
    if (c < 0x21 || c > 0x7e) return false;
  }
  return true;
}

constexpr bool valid_room_name(std::string_view room) {
  if (room.empty() || room.size() > kMaxRoomLength) return false;
  for (char c : room) {
    if (c < 0x21 || c > 0x7e) return false;
  }
  return true;
}

}  // namespace whisker
