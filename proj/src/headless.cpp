#include "whisker/headless.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "whisker/crypto.hpp"
#include "whisker/engine.hpp"
#include "whisker/errors.hpp"

namespace whisker {

namespace {

const std::map<std::string, std::size_t>& arities() {
  static const std::map<std::string, std::size_t> table{
      {"timeout", 1},          {"join", 2},           {"wait-buddies", 1}, {"send", 1},
      {"send-private", 2},     {"expect", 2},         {"expect-private", 2}, {"smp-start", 3},
      {"smp-answer", 2},       {"expect-smp", 2},     {"expect-verified", 1}, {"make-file", 3},
      {"offer", 2},            {"accept", 2},         {"expect-file-done", 1}, {"expect-file-equal", 2},
      {"sleep", 1},            {"leave", 0},
  };
  return table;
}

std::vector<std::string> tokenize(const std::string& line, std::size_t number) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& what) {
    throw Error(Errc::usage, "script line " + std::to_string(number) + ": " + what);
  };
  while (i < line.size()) {
    char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;
    std::string token;
    if (c == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char d = line[i++];
        if (d == '"') {
          closed = true;
          break;
        }
        if (d == '\\') {
          if (i >= line.size()) fail("dangling escape");
          char e = line[i++];
          if (e != '"' && e != '\\') fail("unknown escape");
          token += e;
        } else {
          token += d;
        }
      }
      if (!closed) fail("unterminated quote");
      if (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') fail("text after closing quote");
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
        if (line[i] == '"') fail("quote inside a bare word");
        token += line[i++];
      }
    }
    out.push_back(std::move(token));
  }
  return out;
}

std::uint64_t to_number(const std::string& text, std::size_t line) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos || text.size() > 12) {
    throw Error(Errc::usage, "script line " + std::to_string(line) + ": expected a number, got '" + text + "'");
  }
  return std::stoull(text);
}

std::optional<Bytes> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class Runner {
 public:
  Runner(const HeadlessOptions& options, std::ostream& log)
      : options_(options), timeout_(options.timeout), log_(log), engine_(make_config(options)) {}

  int run(const std::vector<ScriptCommand>& script) {
    engine_.start_session();
    for (const auto& cmd : script) {
      try {
        execute(cmd);
      } catch (const Error& e) {
        log_ << "FAIL line " << cmd.line << " (" << cmd.verb << "): " << e.what() << "\n";
        engine_.leave_room();
        return 1;
      }
    }
    engine_.leave_room();
    log_ << "PASS " << script.size() << " commands\n";
    return 0;
  }

 private:
  static EngineConfig make_config(const HeadlessOptions& options) {
    EngineConfig config;
    config.keygen = options.keygen;
    config.send_rate = options.send_rate;
    return config;
  }

  using Pred = std::function<bool(const EngineEvent&)>;

  // Waits for an unconsumed event matching the predicate and consumes it.
  EngineEvent await(EventKind kind, const Pred& pred, const std::string& what) {
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::uint64_t from = 0;
    for (;;) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() < 0) left = std::chrono::milliseconds(0);
      auto event = engine_.wait_event(
          [&](const EngineEvent& e) { return e.kind == kind && !consumed_.count(e.index) && pred(e); }, from, left);
      if (event) {
        consumed_.insert(event->index);
        return *event;
      }
      if (left.count() == 0) throw Error(Errc::timeout, "timed out waiting for " + what);
      from = 0;
    }
  }

  void execute(const ScriptCommand& cmd) {
    const auto& a = cmd.args;
    const std::string& v = cmd.verb;
    if (v == "timeout") {
      timeout_ = std::chrono::seconds(to_number(a[0], cmd.line));
    } else if (v == "join") {
      engine_.join_room(options_.server, a[0], a[1]);
      log_ << "joined " << a[0] << " as " << a[1] << "\n";
    } else if (v == "wait-buddies") {
      std::size_t want = to_number(a[0], cmd.line);
      auto deadline = std::chrono::steady_clock::now() + timeout_;
      for (;;) {
        std::size_t ready = 0;
        for (const auto& b : engine_.view().buddies) ready += b.session_ready ? 1 : 0;
        if (ready >= want) break;
        if (std::chrono::steady_clock::now() > deadline) throw Error(Errc::timeout, "buddies did not arrive");
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
    } else if (v == "send") {
      engine_.send_group(a[0]);
    } else if (v == "send-private") {
      engine_.send_private(a[0], a[1]);
    } else if (v == "expect" || v == "expect-private") {
      bool priv = v == "expect-private";
      await(EventKind::message,
            [&](const EngineEvent& e) {
              return e.payload.value("from", "") == a[0] && e.payload.value("text", "") == a[1] &&
                     e.payload.value("private", false) == priv;
            },
            "a message from " + a[0]);
    } else if (v == "smp-start") {
      engine_.start_smp(a[0], a[1], a[2]);
    } else if (v == "smp-answer") {
      await(EventKind::smp_request, [&](const EngineEvent& e) { return e.payload.value("nick", "") == a[0]; },
            "an SMP request from " + a[0]);
      engine_.answer_smp(a[0], a[1]);
    } else if (v == "expect-verified") {
      auto deadline = std::chrono::steady_clock::now() + timeout_;
      for (;;) {
        bool verified = false;
        for (const auto& b : engine_.view().buddies) {
          verified = verified || (b.nickname == a[0] && b.auth != AuthStatus::unverified);
        }
        if (verified) break;
        if (std::chrono::steady_clock::now() > deadline) throw Error(Errc::timeout, a[0] + " was not verified");
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
    } else if (v == "expect-smp") {
      const std::string& want = a[1];
      auto e = await(EventKind::smp_result, [&](const EngineEvent& e) { return e.payload.value("nick", "") == a[0]; },
                     "an SMP result with " + a[0]);
      std::string got = e.payload.value("outcome", "");
      if (got != want) throw Error(Errc::validation, "SMP with " + a[0] + " ended " + got + ", expected " + want);
      log_ << "smp with " << a[0] << ": " << got << "\n";
    } else if (v == "make-file") {
      write_deterministic_file(a[0], to_number(a[1], cmd.line), a[2]);
    } else if (v == "offer") {
      engine_.offer_file(a[0], a[1]);
    } else if (v == "accept") {
      auto e = await(EventKind::file_offer, [&](const EngineEvent& e) { return e.payload.value("nick", "") == a[0]; },
                     "a file offer from " + a[0]);
      engine_.accept_file(e.payload.at("offer_id").get<std::string>(), a[1]);
    } else if (v == "expect-file-done") {
      auto e = await(EventKind::file_done, [&](const EngineEvent& e) { return e.payload.value("nick", "") == a[0]; },
                     "a finished transfer with " + a[0]);
      if (!e.payload.value("ok", false)) throw Error(Errc::integrity, "transfer with " + a[0] + " failed");
      log_ << "transfer with " << a[0] << " done\n";
    } else if (v == "expect-file-equal") {
      auto x = read_file(a[0]);
      auto y = read_file(a[1]);
      if (!x || !y) throw Error(Errc::io, "cannot read files to compare");
      if (*x != *y) throw Error(Errc::validation, "files differ");
    } else if (v == "sleep") {
      std::this_thread::sleep_for(std::chrono::milliseconds(to_number(a[0], cmd.line)));
    } else if (v == "leave") {
      engine_.leave_room();
    }
  }

  const HeadlessOptions& options_;
  std::chrono::milliseconds timeout_;
  std::ostream& log_;
  Engine engine_;
  std::set<std::uint64_t> consumed_;
};

}  // namespace

std::vector<ScriptCommand> parse_script(const std::string& text) {
  std::vector<ScriptCommand> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto tokens = tokenize(line, number);
    if (tokens.empty()) continue;
    auto it = arities().find(tokens[0]);
    if (it == arities().end()) {
      throw Error(Errc::usage, "script line " + std::to_string(number) + ": unknown command '" + tokens[0] + "'");
    }
    if (tokens.size() - 1 != it->second) {
      throw Error(Errc::usage, "script line " + std::to_string(number) + ": '" + tokens[0] + "' takes " +
                                   std::to_string(it->second) + " argument(s)");
    }
    ScriptCommand cmd{number, tokens[0], {tokens.begin() + 1, tokens.end()}};
    if (cmd.verb == "timeout" || cmd.verb == "wait-buddies" || cmd.verb == "sleep") to_number(cmd.args[0], number);
    if (cmd.verb == "make-file") to_number(cmd.args[1], number);
    out.push_back(std::move(cmd));
  }
  return out;
}

void write_deterministic_file(const std::string& path, std::size_t bytes, const std::string& seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot create '" + path + "'");
  std::uint64_t counter = 0;
  while (bytes > 0) {
    Bytes input = to_bytes(seed);
    append_u64be(input, counter++);
    auto digest = sha512(input);
    std::size_t n = std::min(bytes, digest.size());
    out.write(reinterpret_cast<const char*>(digest.data()), static_cast<std::streamsize>(n));
    bytes -= n;
  }
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
}

int run_headless(const std::vector<ScriptCommand>& script, const HeadlessOptions& options, std::ostream& log) {
  Runner runner(options, log);
  return runner.run(script);
}

}  // namespace whisker
