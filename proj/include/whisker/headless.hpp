#pragma once

// Scripted single-engine client for demos and end-to-end tests. One command
// per line; '#' starts a comment; arguments are whitespace-separated and may
// be double-quoted (with \" and \\ escapes).
//
//   timeout <seconds>                  default wait for expectations
//   join <room> <nick>
//   wait-buddies <n>                   n buddies with open sessions
//   send <text>
//   send-private <nick> <text>
//   expect <nick> <text>               group message
//   expect-private <nick> <text>
//   smp-start <nick> <question> <answer>
//   smp-answer <nick> <answer>         waits for the request first
//   expect-smp <nick> <match|no_match|aborted>
//   expect-verified <nick>
//   make-file <path> <bytes> <seed>    deterministic content
//   offer <nick> <path>
//   accept <nick> <dest>               waits for the offer first
//   expect-file-done <nick>
//   expect-file-equal <path> <path>
//   sleep <ms>
//   leave

#include <chrono>
#include <iosfwd>
#include <string>
#include <vector>

#include "whisker/net.hpp"
#include "whisker/numtheory.hpp"

namespace whisker {

struct ScriptCommand {
  std::size_t line = 0;
  std::string verb;
  std::vector<std::string> args;
};

/// Throws Errc::usage naming the offending line.
std::vector<ScriptCommand> parse_script(const std::string& text);

struct HeadlessOptions {
  Endpoint server;
  KeygenProfile keygen = KeygenProfile::optimized();
  std::chrono::milliseconds timeout{30'000};
  double send_rate = 8.0;
};

/// Writes `bytes` bytes derived from `seed`.
void write_deterministic_file(const std::string& path, std::size_t bytes, const std::string& seed);

/// 0 if every command succeeded, 1 on the first failed expectation or
/// command. Progress goes to `log` (never message contents).
int run_headless(const std::vector<ScriptCommand>& script, const HeadlessOptions& options, std::ostream& log);

}  // namespace whisker
