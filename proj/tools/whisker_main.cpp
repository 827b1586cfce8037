// whisker: relay server, client engine, headless scripted client, keygen
// benchmark and known-answer vectors.

#include <signal.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "whisker/api.hpp"
#include "whisker/bench.hpp"
#include "whisker/engine.hpp"
#include "whisker/errors.hpp"
#include "whisker/headless.hpp"
#include "whisker/relay.hpp"
#include "whisker/vectors.hpp"

namespace {

using whisker::Errc;
using whisker::Error;
using Json = nlohmann::json;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// The config file holds one optional section per subcommand:
// {"relay": {...}, "engine": {...}, "headless": {...}, "bench": {...}}.
Json load_section(const std::string& path, const char* section) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw Error(Errc::usage, "cannot read config file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(Errc::usage, std::string("config file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::usage, "config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "relay" && key != "engine" && key != "headless" && key != "bench") {
      throw Error(Errc::usage, "unknown config section '" + key + "'");
    }
  }
  Json out = doc.value(section, Json::object());
  if (!out.is_object()) throw Error(Errc::usage, std::string("config section '") + section + "' must be an object");
  return out;
}

std::string string_setting(const Json& section, const char* key, const std::string& flag,
                           const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (section.contains(key)) {
    if (!section[key].is_string()) throw Error(Errc::usage, std::string("config key '") + key + "' must be a string");
    return section[key].get<std::string>();
  }
  return fallback;
}

void reject_unknown(const Json& section, std::initializer_list<const char*> known, const char* name) {
  for (const auto& [key, value] : section.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(Errc::usage, std::string("unknown key '") + key + "' in config section '" + name + "'");
  }
}

std::string default_api_socket() {
  if (const char* dir = std::getenv("XDG_RUNTIME_DIR"); dir && *dir) return std::string(dir) + "/whisker.sock";
  return "/tmp/whisker-" + std::to_string(::getuid()) + ".sock";
}

// Blocks SIGINT/SIGTERM in every thread and waits for one of them.
sigset_t termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

int wait_for_termination(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

struct ServerFlags {
  std::string listen;
  std::string config;
};

int cmd_server(const ServerFlags& flags, const sigset_t& signals) {
  Json section = load_section(flags.config, "relay");
  whisker::RelayConfig config = whisker::RelayConfig::from_json(section);
  if (!flags.listen.empty()) config.listen = whisker::parse_endpoint(flags.listen);
  whisker::RelayServer server(config);
  try {
    server.start();
  } catch (const Error& e) {
    std::cerr << "whisker server: cannot listen on " << config.listen.str() << ": " << e.what() << "\n";
    return kExitFailure;
  }
  std::cerr << "whisker server: listening on " << server.endpoint().str() << "\n";
  int sig = wait_for_termination(signals);
  std::cerr << "whisker server: signal " << sig << ", closing connections\n";
  server.stop();
  return 0;
}

struct EngineFlags {
  std::string server;
  std::string api_socket;
  std::string profile;
  std::string config;
};

int cmd_engine(const EngineFlags& flags, const sigset_t& signals) {
  Json section = load_section(flags.config, "engine");
  reject_unknown(section, {"server", "api_socket", "keygen"}, "engine");
  std::string server = string_setting(section, "server", flags.server, "");
  std::string socket_path = string_setting(section, "api_socket", flags.api_socket, default_api_socket());
  whisker::EngineConfig config;
  config.keygen = whisker::KeygenProfile::by_name(string_setting(section, "keygen", flags.profile, "optimized"));

  std::optional<whisker::Endpoint> default_server;
  if (!server.empty()) default_server = whisker::parse_endpoint(server);
  whisker::Engine engine(config);
  whisker::ApiServer api(engine, socket_path, default_server);
  try {
    api.start();
  } catch (const Error& e) {
    std::cerr << "whisker engine: cannot open API socket " << socket_path << ": " << e.what() << "\n";
    return kExitFailure;
  }
  engine.start_session();
  std::cerr << "whisker engine: API on " << socket_path << "\n";
  wait_for_termination(signals);
  api.stop();
  engine.leave_room();
  return 0;
}

struct BenchFlags {
  std::string profiles;
  unsigned runs = 0;
  bool runs_set = false;
  std::string out;
  std::string config;
};

int cmd_bench(const BenchFlags& flags) {
  Json section = load_section(flags.config, "bench");
  reject_unknown(section, {"profiles", "runs", "out"}, "bench");
  std::string list = string_setting(section, "profiles", flags.profiles, "baseline,optimized");
  unsigned runs = flags.runs_set ? flags.runs : section.value("runs", 50u);
  std::string out_path = string_setting(section, "out", flags.out, "");
  if (runs == 0) throw Error(Errc::usage, "--runs must be at least 1");

  std::vector<whisker::KeygenProfile> profiles;
  std::stringstream names(list);
  for (std::string name; std::getline(names, name, ',');) {
    if (name.empty()) throw Error(Errc::usage, "empty profile name");
    profiles.push_back(whisker::KeygenProfile::by_name(name));
  }
  whisker::BenchOptions options;
  options.runs = runs;
  whisker::BenchReport report = whisker::bench_keygen(profiles, options);
  if (!out_path.empty()) {
    std::ofstream csv(out_path);
    if (!csv) throw Error(Errc::io, "cannot write '" + out_path + "'");
    whisker::write_csv(csv, report);
  } else {
    whisker::write_csv(std::cout, report);
  }
  std::cout << whisker::summarize(report);
  return 0;
}

struct HeadlessFlags {
  std::string script;
  std::string server;
  std::string profile;
  std::string config;
  unsigned timeout = 0;
};

int cmd_headless(const HeadlessFlags& flags) {
  Json section = load_section(flags.config, "headless");
  reject_unknown(section, {"server", "keygen"}, "headless");
  std::ifstream in(flags.script);
  if (!in) throw Error(Errc::usage, "cannot read script '" + flags.script + "'");
  std::stringstream text;
  text << in.rdbuf();
  auto script = whisker::parse_script(text.str());

  whisker::HeadlessOptions options;
  options.server = whisker::parse_endpoint(string_setting(section, "server", flags.server, "127.0.0.1:5280"));
  options.keygen = whisker::KeygenProfile::by_name(string_setting(section, "keygen", flags.profile, "optimized"));
  if (flags.timeout > 0) options.timeout = std::chrono::seconds(flags.timeout);
  return whisker::run_headless(script, options, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  sigset_t signals = termination_signals();
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  CLI::App app{"whisker: encrypted group chat relay, client engine and tools"};
  app.require_subcommand(1);

  ServerFlags server_flags;
  auto* server = app.add_subcommand("server", "Run the relay server until SIGINT/SIGTERM");
  server->add_option("--listen", server_flags.listen, "host:port (default 127.0.0.1:5280)");
  server->add_option("--config", server_flags.config, "JSON config file");

  EngineFlags engine_flags;
  auto* engine = app.add_subcommand("engine", "Run the client engine behind the local API socket");
  engine->add_option("--server", engine_flags.server, "Default relay host:port for join_room");
  engine->add_option("--api-socket", engine_flags.api_socket, "Unix socket path for the local API");
  engine->add_option("--profile", engine_flags.profile, "Keygen profile (default optimized)");
  engine->add_option("--config", engine_flags.config, "JSON config file");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Time DSA key generation per profile");
  bench->add_option("--profiles", bench_flags.profiles, "Comma-separated: baseline, optimized, trialdiv, seedless");
  auto* runs_opt = bench->add_option("--runs", bench_flags.runs, "Runs per profile (default 50)");
  bench->add_option("--out", bench_flags.out, "CSV output path (default stdout)");
  bench->add_option("--config", bench_flags.config, "JSON config file");

  auto* vectors = app.add_subcommand("vectors", "Print known-answer vectors as labeled hex");

  HeadlessFlags headless_flags;
  auto* headless = app.add_subcommand("headless", "Run a scripted client; exit 0 iff every step succeeds");
  headless->add_option("--script", headless_flags.script, "Script file")->required();
  headless->add_option("--server", headless_flags.server, "Relay host:port (default 127.0.0.1:5280)");
  headless->add_option("--profile", headless_flags.profile, "Keygen profile (default optimized)");
  headless->add_option("--timeout", headless_flags.timeout, "Seconds to wait per expectation");
  headless->add_option("--config", headless_flags.config, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (server->parsed()) return cmd_server(server_flags, signals);
    if (engine->parsed()) return cmd_engine(engine_flags, signals);
    if (bench->parsed()) {
      bench_flags.runs_set = runs_opt->count() > 0;
      return cmd_bench(bench_flags);
    }
    if (vectors->parsed()) {
      std::cout << whisker::render_vectors();
      return 0;
    }
    if (headless->parsed()) return cmd_headless(headless_flags);
  } catch (const Error& e) {
    std::cerr << "whisker: " << e.what() << "\n";
    return e.code() == Errc::usage || e.code() == Errc::validation ? kExitUsage : kExitFailure;
  }
  return kExitUsage;
}
