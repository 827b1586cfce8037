#pragma once

// Blocking sockets and the length-prefixed framing shared by the relay wire
// and the engine's local API: a 4-byte big-endian length, then that many
// bytes of UTF-8 JSON.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace whisker {

inline constexpr std::size_t kMaxFrameSize = 256 * 1024;

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  /// Unblocks readers and writers on other threads without closing the fd.
  void shutdown() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// "host:port" or ":port". Throws Errc::usage.
Endpoint parse_endpoint(std::string_view text);

/// Throws Errc::io on failure.
Socket listen_tcp(const Endpoint& endpoint, int backlog = 128);
Socket connect_tcp(const Endpoint& endpoint);
Socket listen_unix(const std::string& path);
Socket connect_unix(const std::string& path);
std::uint16_t local_port(const Socket& socket);
std::string peer_address(const Socket& socket);

/// nullopt on orderly EOF before a frame starts. Throws Errc::io on I/O
/// errors or truncation, Errc::size if the frame exceeds max_size.
std::optional<std::string> read_frame(int fd, std::size_t max_size = kMaxFrameSize);
/// Throws Errc::io.
void write_frame(int fd, std::string_view body);

}  // namespace whisker
