#pragma once

// The relay server: credential-free ephemeral registration, named rooms with
// unique nicknames, and verbatim fan-out of opaque payloads. Nothing is
// persisted; a room exists exactly while it has occupants.

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "whisker/net.hpp"

namespace whisker {

struct RelayConfig {
  Endpoint listen{"127.0.0.1", 5280};
  unsigned registrations_per_window = 30;
  std::chrono::milliseconds registration_window{60'000};
  double messages_per_second = 10;
  std::size_t max_payload = 128 * 1024;
  std::size_t max_occupants = 64;
  std::size_t max_outbox = 4096;  // queued frames before a slow reader is dropped
  bool log_connections = false;

  /// Unknown keys are rejected with Errc::usage.
  static RelayConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Test and operator hook: live counts only.
struct RelayStats {
  std::size_t connections = 0;
  std::size_t identities = 0;
  std::size_t rooms = 0;
  std::size_t occupants = 0;
  std::size_t throttle_entries = 0;
  std::uint64_t relayed = 0;
};

class RelayServer {
 public:
  explicit RelayServer(RelayConfig config = {});
  ~RelayServer();
  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  /// Binds and starts accepting. Throws Errc::io if the address is taken.
  void start();
  /// Closes the listener and every connection, then joins all threads.
  void stop();
  std::uint16_t port() const;
  Endpoint endpoint() const;
  RelayStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace whisker
