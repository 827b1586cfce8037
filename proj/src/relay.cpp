#include "whisker/relay.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <list>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"
#include "whisker/names.hpp"

namespace whisker {

using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

RelayConfig RelayConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::usage, "relay config must be a JSON object");
  RelayConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "listen") {
        c.listen = parse_endpoint(value.get<std::string>());
      } else if (key == "registrations_per_minute") {
        c.registrations_per_window = value.get<unsigned>();
      } else if (key == "registration_window_ms") {
        c.registration_window = std::chrono::milliseconds(value.get<std::int64_t>());
      } else if (key == "messages_per_second") {
        c.messages_per_second = value.get<double>();
      } else if (key == "max_payload") {
        c.max_payload = value.get<std::size_t>();
      } else if (key == "max_occupants") {
        c.max_occupants = value.get<std::size_t>();
      } else if (key == "log_connections") {
        c.log_connections = value.get<bool>();
      } else {
        throw Error(Errc::usage, "unknown relay config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::usage, std::string("bad relay config: ") + e.what());
  }
  if (c.messages_per_second <= 0) throw Error(Errc::usage, "messages_per_second must be positive");
  return c;
}

Json RelayConfig::to_json() const {
  return Json{{"listen", listen.str()},
              {"registrations_per_minute", registrations_per_window},
              {"registration_window_ms", registration_window.count()},
              {"messages_per_second", messages_per_second},
              {"max_payload", max_payload},
              {"max_occupants", max_occupants},
              {"log_connections", log_connections}};
}

namespace {

struct Connection {
  std::uint64_t serial = 0;
  Socket socket;
  std::string address;

  std::optional<std::string> identity;
  std::string room;
  std::string nick;

  double tokens = 0;
  Clock::time_point last_refill = Clock::now();

  std::mutex out_mu;
  std::condition_variable out_cv;
  std::deque<std::string> outbox;
  bool out_closed = false;

  std::thread reader;
  std::thread writer;
  std::atomic<bool> finished{false};
};

using ConnPtr = std::shared_ptr<Connection>;

struct Room {
  std::string name;
  Clock::time_point created_at = Clock::now();
  std::mutex mu;
  std::map<std::string, ConnPtr> occupants;
  std::uint64_t seq = 0;
  bool alive = true;
};

using RoomPtr = std::shared_ptr<Room>;

}  // namespace

struct RelayServer::Impl {
  explicit Impl(RelayConfig c) : config(std::move(c)) {}

  RelayConfig config;
  Socket listener;
  std::uint16_t bound_port = 0;
  std::atomic<bool> stopping{false};
  std::thread acceptor;

  mutable std::mutex conns_mu;
  std::list<ConnPtr> conns;
  std::uint64_t next_serial = 0;

  mutable std::mutex rooms_mu;
  std::map<std::string, RoomPtr> rooms;

  mutable std::mutex ident_mu;
  std::map<std::string, Clock::time_point> identities;
  std::map<std::string, std::deque<Clock::time_point>> registrations;

  std::atomic<std::uint64_t> relayed{0};

  void log(const std::string& line) const {
    if (config.log_connections) std::cerr << "[relay] " << line << '\n';
  }

  // --- outbound -----------------------------------------------------------

  void enqueue(Connection& conn, const Json& stanza) {
    std::string body = stanza.dump();
    std::lock_guard lock(conn.out_mu);
    if (conn.out_closed) return;
    if (conn.outbox.size() >= config.max_outbox) {
      // Slow consumer: drop the connection rather than grow without bound.
      conn.out_closed = true;
      conn.outbox.clear();
      conn.socket.shutdown();
      conn.out_cv.notify_all();
      return;
    }
    conn.outbox.push_back(std::move(body));
    conn.out_cv.notify_one();
  }

  void writer_loop(Connection& conn) {
    for (;;) {
      std::string body;
      {
        std::unique_lock lock(conn.out_mu);
        conn.out_cv.wait(lock, [&] { return conn.out_closed || !conn.outbox.empty(); });
        if (conn.outbox.empty()) return;
        body = std::move(conn.outbox.front());
        conn.outbox.pop_front();
      }
      try {
        write_frame(conn.socket.fd(), body);
      } catch (const Error&) {
        conn.socket.shutdown();
        std::lock_guard lock(conn.out_mu);
        conn.out_closed = true;
        conn.outbox.clear();
        return;
      }
    }
  }

  void error(Connection& conn, const Json& request, Errc code, const std::string& message) {
    Json reply{{"type", "error"}, {"code", std::string(to_string(code))}, {"message", message}};
    if (request.is_object()) {
      if (auto t = request.find("type"); t != request.end()) reply["ref"] = *t;
      if (auto id = request.find("id"); id != request.end()) reply["id"] = *id;
    }
    enqueue(conn, reply);
  }

  static Json reply_to(const Json& request, Json reply) {
    if (auto id = request.find("id"); id != request.end()) reply["id"] = *id;
    return reply;
  }

  // --- registration -------------------------------------------------------

  void handle_register(Connection& conn, const Json& request) {
    if (conn.identity) {
      enqueue(conn, reply_to(request, {{"type", "register"}, {"conn_id", *conn.identity}}));
      return;
    }
    auto now = Clock::now();
    std::string token;
    {
      std::lock_guard lock(ident_mu);
      auto& recent = registrations[conn.address];
      while (!recent.empty() && now - recent.front() >= config.registration_window) recent.pop_front();
      if (recent.size() >= config.registrations_per_window) {
        error(conn, request, Errc::throttle, "too many registrations from this address");
        return;
      }
      recent.push_back(now);
      do {
        token = to_hex(os_entropy(16));
      } while (identities.count(token));
      identities.emplace(token, now);
    }
    conn.identity = token;
    enqueue(conn, reply_to(request, {{"type", "register"}, {"conn_id", token}}));
  }

  void prune_registrations() {
    auto now = Clock::now();
    std::lock_guard lock(ident_mu);
    for (auto it = registrations.begin(); it != registrations.end();) {
      auto& recent = it->second;
      while (!recent.empty() && now - recent.front() >= config.registration_window) recent.pop_front();
      it = recent.empty() ? registrations.erase(it) : std::next(it);
    }
  }

  // --- rooms --------------------------------------------------------------

  void handle_join(const ConnPtr& conn, const Json& request) {
    if (!conn->identity) return error(*conn, request, Errc::authorization, "register before joining");
    if (!conn->room.empty()) return error(*conn, request, Errc::conflict, "already in a room");
    auto room_it = request.find("room");
    auto nick_it = request.find("nick");
    if (room_it == request.end() || nick_it == request.end() || !room_it->is_string() || !nick_it->is_string()) {
      return error(*conn, request, Errc::validation, "join needs room and nick");
    }
    const auto& room_name = room_it->get_ref<const std::string&>();
    const auto& nick = nick_it->get_ref<const std::string&>();
    if (!valid_room_name(room_name)) return error(*conn, request, Errc::validation, "invalid room name");
    if (!valid_nickname(nick)) return error(*conn, request, Errc::validation, "invalid nickname");

    std::lock_guard rooms_lock(rooms_mu);
    RoomPtr& slot = rooms[room_name];
    if (!slot) {
      slot = std::make_shared<Room>();
      slot->name = room_name;
    }
    RoomPtr room = slot;
    std::lock_guard room_lock(room->mu);
    if (room->occupants.count(nick)) {
      if (room->occupants.empty()) rooms.erase(room_name);
      return error(*conn, request, Errc::conflict, "nickname in use");
    }
    if (room->occupants.size() >= config.max_occupants) {
      return error(*conn, request, Errc::conflict, "room is full");
    }
    std::uint64_t seq = ++room->seq;
    Json presence{{"type", "presence"}, {"room", room_name}, {"from", nick}, {"status", "join"}, {"seq", seq}};
    Json occupants = Json::array();
    for (const auto& [other_nick, other] : room->occupants) {
      occupants.push_back(other_nick);
      enqueue(*other, presence);
    }
    occupants.push_back(nick);
    room->occupants.emplace(nick, conn);
    conn->room = room_name;
    conn->nick = nick;
    enqueue(*conn, reply_to(request, {{"type", "joined"},
                                      {"room", room_name},
                                      {"nick", nick},
                                      {"occupants", std::move(occupants)},
                                      {"seq", seq}}));
  }

  // Removes the connection from its room; destroys the room when empty.
  void leave_room(Connection& conn, const Json* request) {
    if (conn.room.empty()) {
      if (request) error(conn, *request, Errc::authorization, "not in a room");
      return;
    }
    std::lock_guard rooms_lock(rooms_mu);
    auto it = rooms.find(conn.room);
    if (it != rooms.end()) {
      RoomPtr room = it->second;
      std::lock_guard room_lock(room->mu);
      room->occupants.erase(conn.nick);
      std::uint64_t seq = ++room->seq;
      Json presence{{"type", "presence"}, {"room", conn.room}, {"from", conn.nick}, {"status", "leave"}, {"seq", seq}};
      for (const auto& [nick, other] : room->occupants) enqueue(*other, presence);
      if (room->occupants.empty()) {
        room->alive = false;
        rooms.erase(it);
      }
    }
    if (request) enqueue(conn, reply_to(*request, {{"type", "left"}, {"room", conn.room}}));
    conn.room.clear();
    conn.nick.clear();
  }

  bool take_token(Connection& conn) {
    auto now = Clock::now();
    double capacity = std::max(1.0, config.messages_per_second);
    double elapsed = std::chrono::duration<double>(now - conn.last_refill).count();
    conn.tokens = std::min(capacity, conn.tokens + elapsed * config.messages_per_second);
    conn.last_refill = now;
    if (conn.tokens < 1.0) return false;
    conn.tokens -= 1.0;
    return true;
  }

  void handle_relay(Connection& conn, const Json& request, bool is_private) {
    if (conn.room.empty()) return error(conn, request, Errc::authorization, "not an occupant");
    auto payload = request.find("payload");
    if (payload == request.end() || !payload->is_string()) {
      return error(conn, request, Errc::validation, "payload must be a string");
    }
    if (payload->get_ref<const std::string&>().size() > config.max_payload) {
      return error(conn, request, Errc::size, "payload exceeds size limit");
    }
    std::string to;
    if (is_private) {
      auto t = request.find("to");
      if (t == request.end() || !t->is_string()) return error(conn, request, Errc::validation, "private needs 'to'");
      to = t->get<std::string>();
    }
    if (!take_token(conn)) return error(conn, request, Errc::throttle, "message rate exceeded");

    RoomPtr room;
    {
      std::lock_guard rooms_lock(rooms_mu);
      auto it = rooms.find(conn.room);
      if (it != rooms.end()) room = it->second;
    }
    if (!room) return error(conn, request, Errc::authorization, "not an occupant");

    std::lock_guard room_lock(room->mu);
    if (!room->alive || !room->occupants.count(conn.nick)) {
      return error(conn, request, Errc::authorization, "not an occupant");
    }
    if (is_private) {
      auto target = room->occupants.find(to);
      if (target == room->occupants.end()) return error(conn, request, Errc::delivery, "no such occupant");
      std::uint64_t seq = ++room->seq;
      enqueue(*target->second, {{"type", "private"},
                                 {"room", room->name},
                                 {"from", conn.nick},
                                 {"to", to},
                                 {"payload", *payload},
                                 {"seq", seq}});
      ++relayed;
      return;
    }
    std::uint64_t seq = ++room->seq;
    Json out{{"type", "groupchat"}, {"room", room->name}, {"from", conn.nick}, {"payload", *payload}, {"seq", seq}};
    for (const auto& [nick, other] : room->occupants) {
      if (other.get() == &conn) continue;
      enqueue(*other, out);
      ++relayed;
    }
  }

  // --- connection lifecycle -----------------------------------------------

  void handle(const ConnPtr& conn, const std::string& body) {
    Json request = Json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.is_object() || !request.contains("type") || !request["type"].is_string()) {
      return error(*conn, Json::object(), Errc::malformed, "stanza must be a JSON object with a type");
    }
    const auto& type = request["type"].get_ref<const std::string&>();
    if (type == "ping") return enqueue(*conn, reply_to(request, {{"type", "pong"}}));
    if (type == "register") return handle_register(*conn, request);
    if (type == "join") return handle_join(conn, request);
    if (type == "leave") return leave_room(*conn, &request);
    if (type == "groupchat") return handle_relay(*conn, request, false);
    if (type == "private") return handle_relay(*conn, request, true);
    error(*conn, request, Errc::malformed, "unknown stanza type");
  }

  void reader_loop(const ConnPtr& conn) {
    log("connection " + std::to_string(conn->serial) + " opened");
    try {
      while (!stopping) {
        auto body = read_frame(conn->socket.fd(), config.max_payload + 16 * 1024);
        if (!body) break;
        handle(conn, *body);
      }
    } catch (const Error&) {
      // I/O failure or oversize frame: drop the connection.
    }
    leave_room(*conn, nullptr);
    if (conn->identity) {
      std::lock_guard lock(ident_mu);
      identities.erase(*conn->identity);
      conn->identity.reset();
    }
    conn->socket.shutdown();
    {
      std::lock_guard lock(conn->out_mu);
      conn->out_closed = true;
      conn->outbox.clear();
      conn->out_cv.notify_all();
    }
    if (conn->writer.joinable()) conn->writer.join();
    log("connection " + std::to_string(conn->serial) + " closed");
    conn->finished = true;
  }

  void reap(bool all) {
    std::vector<ConnPtr> done;
    {
      std::lock_guard lock(conns_mu);
      for (auto it = conns.begin(); it != conns.end();) {
        if (all || (*it)->finished) {
          done.push_back(*it);
          it = conns.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& conn : done) {
      if (conn->reader.joinable()) conn->reader.join();
    }
  }

  void accept_loop() {
    while (!stopping) {
      pollfd pfd{listener.fd(), POLLIN, 0};
      int ready = ::poll(&pfd, 1, 100);
      reap(false);
      prune_registrations();
      if (ready <= 0 || stopping) continue;
      int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      auto conn = std::make_shared<Connection>();
      conn->socket = Socket(fd);
      conn->address = peer_address(conn->socket);
      conn->tokens = std::max(1.0, config.messages_per_second);
      std::lock_guard lock(conns_mu);
      conn->serial = ++next_serial;
      conn->writer = std::thread([this, c = conn.get()] { writer_loop(*c); });
      conn->reader = std::thread([this, conn] { reader_loop(conn); });
      conns.push_back(std::move(conn));
    }
  }
};

RelayServer::RelayServer(RelayConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

RelayServer::~RelayServer() { stop(); }

void RelayServer::start() {
  impl_->listener = listen_tcp(impl_->config.listen);
  impl_->bound_port = local_port(impl_->listener);
  impl_->stopping = false;
  impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
}

void RelayServer::stop() {
  if (!impl_ || !impl_->acceptor.joinable()) return;
  impl_->stopping = true;
  impl_->acceptor.join();
  impl_->listener.close();
  {
    std::lock_guard lock(impl_->conns_mu);
    for (auto& conn : impl_->conns) conn->socket.shutdown();
  }
  impl_->reap(true);
}

std::uint16_t RelayServer::port() const { return impl_->bound_port; }

Endpoint RelayServer::endpoint() const { return Endpoint{impl_->config.listen.host, impl_->bound_port}; }

RelayStats RelayServer::stats() const {
  RelayStats s;
  {
    std::lock_guard lock(impl_->conns_mu);
    for (const auto& conn : impl_->conns) s.connections += conn->finished ? 0 : 1;
  }
  {
    std::lock_guard lock(impl_->rooms_mu);
    s.rooms = impl_->rooms.size();
    for (const auto& [name, room] : impl_->rooms) {
      std::lock_guard room_lock(room->mu);
      s.occupants += room->occupants.size();
    }
  }
  {
    std::lock_guard lock(impl_->ident_mu);
    s.identities = impl_->identities.size();
    s.throttle_entries = impl_->registrations.size();
  }
  s.relayed = impl_->relayed;
  return s;
}

}  // namespace whisker
