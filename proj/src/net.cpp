#include "whisker/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "whisker/errors.hpp"

namespace whisker {

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() noexcept {
  int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Endpoint parse_endpoint(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error(Errc::usage, "endpoint must be host:port");
  Endpoint out;
  if (colon > 0) out.host = std::string(text.substr(0, colon));
  auto port_text = text.substr(colon + 1);
  if (port_text.empty() || port_text.size() > 5) throw Error(Errc::usage, "invalid port");
  unsigned long port = 0;
  for (char c : port_text) {
    if (c < '0' || c > '9') throw Error(Errc::usage, "invalid port");
    port = port * 10 + static_cast<unsigned long>(c - '0');
  }
  if (port > 65535) throw Error(Errc::usage, "invalid port");
  out.port = static_cast<std::uint16_t>(port);
  return out;
}

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(Errc::io, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const Endpoint& endpoint) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(endpoint.port);
  std::string host = endpoint.host == "localhost" ? "127.0.0.1" : endpoint.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &result) != 0 || result == nullptr) {
    throw Error(Errc::io, "cannot resolve host '" + endpoint.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return addr;
}

sockaddr_un unix_address(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw Error(Errc::usage, "socket path too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

bool read_all(int fd, char* data, std::size_t size, bool allow_eof_at_start) {
  std::size_t done = 0;
  while (done < size) {
    ssize_t n = ::recv(fd, data + done, size - done, 0);
    if (n == 0) {
      if (done == 0 && allow_eof_at_start) return false;
      throw Error(Errc::io, "connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

Socket listen_tcp(const Endpoint& endpoint, int backlog) {
  Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) throw_errno("socket");
  int one = 1;
  ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(endpoint);
  if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw_errno("bind " + endpoint.str());
  }
  if (::listen(sock.fd(), backlog) != 0) throw_errno("listen");
  return sock;
}

Socket connect_tcp(const Endpoint& endpoint) {
  Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) throw_errno("socket");
  sockaddr_in addr = resolve(endpoint);
  if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw_errno("connect " + endpoint.str());
  }
  int one = 1;
  ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return sock;
}

Socket listen_unix(const std::string& path) {
  Socket sock(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) throw_errno("socket");
  sockaddr_un addr = unix_address(path);
  ::unlink(path.c_str());
  if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) throw_errno("bind " + path);
  if (::listen(sock.fd(), 16) != 0) throw_errno("listen");
  return sock;
}

Socket connect_unix(const std::string& path) {
  Socket sock(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) throw_errno("socket");
  sockaddr_un addr = unix_address(path);
  if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) throw_errno("connect " + path);
  return sock;
}

std::uint16_t local_port(const Socket& socket) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw_errno("getsockname");
  return ntohs(addr.sin_port);
}

std::string peer_address(const Socket& socket) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getpeername(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "unknown";
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof(buf));
  return buf;
}

std::optional<std::string> read_frame(int fd, std::size_t max_size) {
  unsigned char header[4];
  if (!read_all(fd, reinterpret_cast<char*>(header), 4, true)) return std::nullopt;
  std::size_t len = (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) | (std::size_t{header[2]} << 8) |
                    std::size_t{header[3]};
  if (len > max_size) throw Error(Errc::size, "frame exceeds size limit");
  std::string body(len, '\0');
  read_all(fd, body.data(), len, false);
  return body;
}

void write_frame(int fd, std::string_view body) {
  if (body.size() > 0xffffffffu) throw Error(Errc::size, "frame too large");
  std::string buf;
  buf.reserve(body.size() + 4);
  auto len = static_cast<std::uint32_t>(body.size());
  buf.push_back(static_cast<char>(len >> 24));
  buf.push_back(static_cast<char>(len >> 16));
  buf.push_back(static_cast<char>(len >> 8));
  buf.push_back(static_cast<char>(len));
  buf.append(body);
  std::size_t done = 0;
  while (done < buf.size()) {
    ssize_t n = ::send(fd, buf.data() + done, buf.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace whisker
