#include "whisker/api.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <list>
#include <mutex>
#include <thread>

#include "whisker/codec.hpp"
#include "whisker/errors.hpp"

namespace whisker {

namespace {

const std::string& str_param(const Json& params, const char* name) {
  const auto& v = params.at(name);
  if (!v.is_string()) throw Error(Errc::usage, std::string("parameter '") + name + "' must be a string");
  return v.get_ref<const std::string&>();
}

std::string opt_param(const Json& params, const char* name) {
  return params.contains(name) ? str_param(params, name) : std::string();
}

Json dispatch(Engine& engine, const std::string& method, const Json& params,
              const std::optional<Endpoint>& default_server) {
  if (method == "status") return engine.status();
  if (method == "join_room") {
    Endpoint server;
    if (params.contains("server")) {
      server = parse_endpoint(str_param(params, "server"));
    } else if (default_server) {
      server = *default_server;
    } else {
      throw Error(Errc::usage, "no server given and the engine has no default");
    }
    engine.join_room(server, str_param(params, "room"), str_param(params, "nick"));
    return engine.status();
  }
  if (method == "send_group") {
    engine.send_group(str_param(params, "text"));
    return Json::object();
  }
  if (method == "send_private") {
    engine.send_private(str_param(params, "nick"), str_param(params, "text"));
    return Json::object();
  }
  if (method == "start_smp") {
    engine.start_smp(str_param(params, "nick"), opt_param(params, "question"), str_param(params, "answer"));
    return Json::object();
  }
  if (method == "answer_smp") {
    engine.answer_smp(str_param(params, "nick"), str_param(params, "answer"));
    return Json::object();
  }
  if (method == "offer_file") {
    return Json{{"offer_id", engine.offer_file(str_param(params, "nick"), str_param(params, "path"))}};
  }
  if (method == "accept_file") {
    engine.accept_file(str_param(params, "offer_id"), str_param(params, "path"));
    return Json::object();
  }
  if (method == "verify_fingerprint") {
    engine.verify_fingerprint(str_param(params, "nick"));
    return Json::object();
  }
  if (method == "leave_room") {
    engine.leave_room();
    return Json::object();
  }
  if (method == "events") {
    Json out = Json::array();
    for (const auto& e : engine.events(params.value("from", std::uint64_t{0}))) out.push_back(e.to_json());
    return out;
  }
  throw Error(Errc::usage, "unknown method '" + method + "'");
}

Json error_reply(const Json& id, std::string_view code, const std::string& message) {
  return Json{{"id", id}, {"error", {{"code", std::string(code)}, {"message", message}}}};
}

}  // namespace

Json handle_api_request(Engine& engine, const Json& request, const std::optional<Endpoint>& default_server) {
  Json id = request.is_object() && request.contains("id") ? request["id"] : Json();
  try {
    if (!request.is_object() || !request.contains("method") || !request["method"].is_string()) {
      throw Error(Errc::usage, "request needs a string 'method'");
    }
    Json params = request.value("params", Json::object());
    if (!params.is_object()) throw Error(Errc::usage, "'params' must be an object");
    return Json{{"id", id}, {"result", dispatch(engine, request["method"].get<std::string>(), params, default_server)}};
  } catch (const Error& e) {
    return error_reply(id, to_string(e.code()), e.what());
  } catch (const Json::exception& e) {
    return error_reply(id, "usage", e.what());
  }
}

struct ApiServer::Impl {
  struct Connection {
    Socket socket;
    std::mutex write_mu;
    std::optional<std::uint64_t> subscription;
    std::uint64_t next_event = 0;  // first event index not yet streamed
    std::thread thread;
    std::atomic<bool> done{false};
    bool broken = false;

    void send(const Json& frame) {
      std::lock_guard lock(write_mu);
      if (broken) return;
      try {
        write_frame(socket.fd(), frame.dump());
      } catch (const Error&) {
        broken = true;
        socket.shutdown();
      }
    }
  };

  Impl(Engine& e, std::string p, std::optional<Endpoint> d)
      : engine(e), path(std::move(p)), default_server(std::move(d)) {}

  Engine& engine;
  std::string path;
  std::optional<Endpoint> default_server;
  Socket listener;
  std::thread acceptor;
  std::mutex mu;
  std::list<std::shared_ptr<Connection>> connections;
  std::atomic<bool> stopping{false};

  void subscribe(const std::shared_ptr<Connection>& conn, std::uint64_t from) {
    std::weak_ptr<Connection> weak = conn;
    std::lock_guard lock(conn->write_mu);
    conn->next_event = from;
    // Live events are held back until the backlog has been written so that
    // the stream stays in occurrence order without gaps or repeats.
    conn->subscription = engine.subscribe([weak](const EngineEvent& event) {
      auto c = weak.lock();
      if (!c) return;
      std::lock_guard lock(c->write_mu);
      if (c->broken || event.index < c->next_event) return;
      try {
        write_frame(c->socket.fd(), Json{{"event", event.to_json()}}.dump());
        c->next_event = event.index + 1;
      } catch (const Error&) {
        c->broken = true;
        c->socket.shutdown();
      }
    });
    for (const auto& event : engine.events(from)) {
      if (event.index < conn->next_event) continue;
      try {
        write_frame(conn->socket.fd(), Json{{"event", event.to_json()}}.dump());
        conn->next_event = event.index + 1;
      } catch (const Error&) {
        conn->broken = true;
        conn->socket.shutdown();
        return;
      }
    }
  }

  void serve(std::shared_ptr<Connection> conn) {
    try {
      while (auto body = read_frame(conn->socket.fd())) {
        Json request;
        try {
          request = parse_json(*body);
        } catch (const Error& e) {
          conn->send(error_reply(Json(), "malformed", e.what()));
          continue;
        }
        if (request.is_object() && request.value("method", "") == "subscribe_events") {
          std::uint64_t from = 0;
          if (request.contains("params") && request["params"].is_object()) {
            from = request["params"].value("from", std::uint64_t{0});
          }
          conn->send(Json{{"id", request.value("id", Json())}, {"result", {{"subscribed", true}, {"from", from}}}});
          if (!conn->subscription) subscribe(conn, from);
          continue;
        }
        conn->send(handle_api_request(engine, request, default_server));
      }
    } catch (const Error&) {
    }
    if (conn->subscription) engine.unsubscribe(*conn->subscription);
    conn->socket.shutdown();
    conn->done = true;
  }

  void accept_loop() {
    for (;;) {
      int fd = ::accept(listener.fd(), nullptr, nullptr);
      if (fd < 0) {
        if (stopping) return;
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return;
      }
      auto conn = std::make_shared<Connection>();
      conn->socket = Socket(fd);
      std::lock_guard lock(mu);
      if (stopping) return;
      connections.remove_if([](const std::shared_ptr<Connection>& c) {
        if (!c->done) return false;
        c->thread.join();
        return true;
      });
      conn->thread = std::thread([this, conn] { serve(conn); });
      connections.push_back(conn);
    }
  }
};

ApiServer::ApiServer(Engine& engine, std::string socket_path, std::optional<Endpoint> default_server)
    : impl_(std::make_unique<Impl>(engine, std::move(socket_path), std::move(default_server))) {}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
  ::unlink(impl_->path.c_str());
  impl_->listener = listen_unix(impl_->path);
  ::chmod(impl_->path.c_str(), S_IRUSR | S_IWUSR);
  impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
}

void ApiServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  impl_->listener.shutdown();
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  std::list<std::shared_ptr<Impl::Connection>> conns;
  {
    std::lock_guard lock(impl_->mu);
    conns.swap(impl_->connections);
  }
  for (auto& c : conns) c->socket.shutdown();
  for (auto& c : conns) {
    if (c->thread.joinable()) c->thread.join();
  }
  impl_->listener.close();
  ::unlink(impl_->path.c_str());
}

const std::string& ApiServer::path() const { return impl_->path; }

ApiClient::ApiClient(const std::string& socket_path) : socket_(connect_unix(socket_path)) {}

std::optional<Json> ApiClient::read_one(std::chrono::milliseconds timeout) {
  pollfd pfd{socket_.fd(), POLLIN, 0};
  int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc == 0) return std::nullopt;
  if (rc < 0) throw Error(Errc::io, "poll failed");
  auto body = read_frame(socket_.fd());
  if (!body) throw Error(Errc::io, "engine closed the API connection");
  return parse_json(*body);
}

Json ApiClient::call(const std::string& method, Json params) {
  std::uint64_t id = ++next_id_;
  write_frame(socket_.fd(), Json{{"id", id}, {"method", method}, {"params", std::move(params)}}.dump());
  for (;;) {
    auto frame = read_one(std::chrono::minutes(10));
    if (!frame) throw Error(Errc::timeout, "no reply to " + method);
    if (frame->contains("event")) {
      events_.push_back(std::move((*frame)["event"]));
      continue;
    }
    if (frame->value("id", Json()) != Json(id)) continue;
    if (frame->contains("error")) {
      const Json& err = (*frame)["error"];
      throw Error(errc_from_string(err.value("code", "protocol")), err.value("message", "request failed"));
    }
    return (*frame)["result"];
  }
}

std::optional<Json> ApiClient::next_event(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (events_.empty()) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    auto frame = read_one(left);
    if (!frame) return std::nullopt;
    if (frame->contains("event")) events_.push_back(std::move((*frame)["event"]));
  }
  Json out = std::move(events_.front());
  events_.pop_front();
  return out;
}

}  // namespace whisker
