#pragma once

// The client engine. Owns the ephemeral identity, the relay connection and
// all per-buddy cryptographic state. Only encrypted payloads leave the
// engine; inbound stanzas that fail to decrypt or authenticate are dropped
// and reported as warning events.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "whisker/net.hpp"
#include "whisker/numtheory.hpp"
#include "whisker/session.hpp"

namespace whisker {

struct EngineConfig {
  KeygenProfile keygen = KeygenProfile::optimized();
  /// Outbound chat stanzas per second; stays under the relay's limit.
  double send_rate = 8.0;
  std::chrono::milliseconds join_timeout{10'000};
  unsigned smp_runs_per_minute = 3;
};

enum class AuthStatus { unverified, smp_verified, fingerprint_verified };

enum class EventKind {
  keygen_progress,
  joined,
  buddy_joined,
  buddy_left,
  message,
  smp_request,
  smp_result,
  file_offer,
  file_progress,
  file_done,
  warning,
  error,
};

std::string_view to_string(AuthStatus status);
std::string_view to_string(EventKind kind);

struct EngineEvent {
  std::uint64_t index = 0;
  EventKind kind = EventKind::warning;
  nlohmann::json payload;

  nlohmann::json to_json() const;
};

struct BuddyView {
  std::string nickname;
  std::string fingerprint;
  ColorCode color;
  AuthStatus auth = AuthStatus::unverified;
  bool session_ready = false;
};

struct MessageView {
  std::string sender;
  std::string text;
  bool is_private = false;
  std::string to;  // private messages only
  std::int64_t timestamp_ms = 0;
  std::string delivery;  // "received" or "sent"
};

struct ConversationView {
  std::string room;
  std::string me;
  std::vector<BuddyView> buddies;
  std::vector<MessageView> messages;
};

class Engine {
 public:
  explicit Engine(EngineConfig config = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Starts key generation on a background thread and returns at once.
  /// Progress arrives as keygen_progress events.
  void start_session();
  bool ready() const;
  bool wait_ready(std::chrono::milliseconds timeout) const;

  nlohmann::json status() const;
  ConversationView view() const;

  // Commands. Usage problems throw whisker::Error; asynchronous failures
  // surface as warning/error events.
  void join_room(const Endpoint& server, const std::string& room, const std::string& nickname);
  void send_group(const std::string& text);
  void send_private(const std::string& nickname, const std::string& text);
  void start_smp(const std::string& nickname, const std::string& question, const std::string& answer);
  void answer_smp(const std::string& nickname, const std::string& answer);
  /// Returns the offer id.
  std::string offer_file(const std::string& nickname, const std::string& path);
  void accept_file(const std::string& offer_id, const std::string& dest_path);
  void verify_fingerprint(const std::string& nickname);
  void leave_room();

  // Event stream. Listeners run on engine threads and must not call back
  // into the engine.
  using Listener = std::function<void(const EngineEvent&)>;
  std::uint64_t subscribe(Listener listener);
  void unsubscribe(std::uint64_t id);
  std::vector<EngineEvent> events(std::uint64_t from_index = 0) const;
  /// First event at or after from_index matching the predicate.
  std::optional<EngineEvent> wait_event(const std::function<bool(const EngineEvent&)>& predicate,
                                        std::uint64_t from_index, std::chrono::milliseconds timeout) const;

  /// Test hook: processes a stanza exactly as if it came from the relay.
  void inject_inbound(std::string_view stanza);
  /// Test hook: sees every inbound relay stanza after it is processed.
  void set_inbound_tap(std::function<void(const std::string&)> tap);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace whisker
