#pragma once

// The engine's local API: length-prefixed JSON over a Unix-domain socket
// (mode 0600). Requests are {"id", "method", "params"}; replies are
// {"id", "result"} or {"id", "error": {"code", "message"}}. After
// subscribe_events the connection also carries {"event": {...}} frames in
// occurrence order.

#include <chrono>
#include <deque>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "whisker/engine.hpp"
#include "whisker/net.hpp"

namespace whisker {

class ApiServer {
 public:
  /// join_room falls back to default_server when the request names none.
  ApiServer(Engine& engine, std::string socket_path, std::optional<Endpoint> default_server = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Throws Errc::io if the socket cannot be bound.
  void start();
  void stop();
  const std::string& path() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Executes one request against the engine. Exposed for tests.
nlohmann::json handle_api_request(Engine& engine, const nlohmann::json& request,
                                  const std::optional<Endpoint>& default_server = {});

class ApiClient {
 public:
  explicit ApiClient(const std::string& socket_path);

  /// Throws whisker::Error carrying the server's error code.
  nlohmann::json call(const std::string& method, nlohmann::json params = nlohmann::json::object());
  /// Next streamed event; nullopt on timeout.
  std::optional<nlohmann::json> next_event(std::chrono::milliseconds timeout);

 private:
  std::optional<nlohmann::json> read_one(std::chrono::milliseconds timeout);

  Socket socket_;
  std::uint64_t next_id_ = 0;
  std::deque<nlohmann::json> events_;
};

}  // namespace whisker
