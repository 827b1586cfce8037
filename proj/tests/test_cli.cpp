#include <gtest/gtest.h>

#include <signal.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "whisker/bytes.hpp"
#include "whisker/errors.hpp"
#include "whisker/headless.hpp"
#include "whisker/net.hpp"
#include "whisker/relay.hpp"
#include "whisker/vectors.hpp"

using namespace whisker;
using namespace std::chrono_literals;

namespace {

std::map<std::string, std::string> parse_vectors(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string write_text(const std::string& dir, const std::string& name, const std::string& text) {
  std::string path = dir + "/" + name;
  std::ofstream(path) << text;
  return path;
}

std::uint16_t free_port() {
  RelayConfig cfg;
  cfg.listen = Endpoint{"127.0.0.1", 0};
  RelayServer probe(cfg);
  probe.start();
  std::uint16_t port = probe.port();
  probe.stop();
  return port;
}

}  // namespace

TEST(Script, ParsesQuotedArguments) {
  auto cmds = parse_script("# comment\njoin den amy\n\nsend \"hello \\\"there\\\"\"  # trailing\nleave\n");
  ASSERT_EQ(cmds.size(), 3u);
  EXPECT_EQ(cmds[0].verb, "join");
  EXPECT_EQ(cmds[0].line, 2u);
  EXPECT_EQ(cmds[1].args, std::vector<std::string>{"hello \"there\""});
  EXPECT_EQ(cmds[2].line, 5u);
}

TEST(Script, RejectsBadLines) {
  for (const char* bad : {"frobnicate x", "join onlyroom", "send \"unterminated", "leave now", "timeout"}) {
    try {
      parse_script(std::string("timeout 5\n") + bad + "\n");
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::usage);
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
  }
}

TEST(Script, DeterministicFiles) {
  std::string dir = testkit::temp_dir("whisker-cli");
  write_deterministic_file(dir + "/a", 1000, "s");
  write_deterministic_file(dir + "/b", 1000, "s");
  write_deterministic_file(dir + "/c", 1000, "t");
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  EXPECT_EQ(slurp(dir + "/a").size(), 1000u);
  EXPECT_EQ(slurp(dir + "/a"), slurp(dir + "/b"));
  EXPECT_NE(slurp(dir + "/a"), slurp(dir + "/c"));
  // First block is SHA-512(seed || 0 as u64be).
  Bytes block_input = to_bytes("s");
  block_input.resize(block_input.size() + 8, 0);
  auto expect = testkit::sodium_sha512(block_input);
  EXPECT_EQ(slurp(dir + "/a").substr(0, 64), std::string(expect.begin(), expect.end()));
  std::filesystem::remove_all(dir);
}

TEST(Cli, VectorsAreStableAndMatchOracles) {
  auto first = testkit::run_cli({"vectors"});
  auto second = testkit::run_cli({"vectors"});
  ASSERT_EQ(first.exit_code, 0);
  EXPECT_EQ(first.output, second.output);
  EXPECT_EQ(first.output, render_vectors());
  auto v = parse_vectors(first.output);
  EXPECT_EQ(v["salsa20.1.block"], testkit::kEstreamSet1Vector0);
  for (int i = 1; i <= 4; ++i) {
    std::string n = "salsa20." + std::to_string(i);
    Bytes key = from_hex(v[n + ".key"]), nonce = from_hex(v[n + ".nonce"]);
    std::array<std::uint8_t, 32> k{};
    std::array<std::uint8_t, 8> iv{};
    std::copy(key.begin(), key.end(), k.begin());
    std::copy(nonce.begin(), nonce.end(), iv.begin());
    Bytes expect = testkit::sodium_salsa20(k, iv, std::stoull(v[n + ".counter"]), 64);
    EXPECT_EQ(v[n + ".block"], to_hex(expect)) << n;
  }
  auto digest = testkit::sodium_sha512(from_hex(v["file_keys.extra_key"]));
  EXPECT_EQ(v["file_keys.enc"] + v["file_keys.mac"], to_hex(digest));
  auto fp = testkit::sodium_sha256(to_bytes("fingerprint vector"));
  EXPECT_EQ(v["fingerprint.digest"], to_hex(fp));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(testkit::run_cli({"bench", "--runs", "0"}).exit_code, 2);
  EXPECT_EQ(testkit::run_cli({"bench", "--profiles", "quantum"}).exit_code, 2);
  EXPECT_EQ(testkit::run_cli({"nonsense"}).exit_code, 2);
  EXPECT_EQ(testkit::run_cli({"headless"}).exit_code, 2);
  std::string dir = testkit::temp_dir("whisker-cli");
  std::string cfg = write_text(dir, "bad.json", R"({"relay": {"mystery": 1}})");
  EXPECT_EQ(testkit::run_cli({"server", "--config", cfg}).exit_code, 2);
  std::string script = write_text(dir, "bad.script", "join den\n");
  EXPECT_EQ(testkit::run_cli({"headless", "--script", script}).exit_code, 2);
  std::filesystem::remove_all(dir);
}

TEST(Cli, BenchWritesOneRowPerRun) {
  std::string dir = testkit::temp_dir("whisker-cli");
  auto r = testkit::run_cli({"bench", "--profiles", "baseline,optimized", "--runs", "2", "--out", dir + "/b.csv"});
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::ifstream in(dir + "/b.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "profile,run_index,millis");
  EXPECT_EQ(lines[1].rfind("baseline,0,", 0), 0u);
  EXPECT_EQ(lines[4].rfind("optimized,1,", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Cli, ServerBindsAndStopsGracefully) {
  std::uint16_t port = free_port();
  std::string listen = "127.0.0.1:" + std::to_string(port);
  testkit::ChildProcess server({"server", "--listen", listen});
  ASSERT_TRUE(testkit::eventually(
      [&] {
        try {
          testkit::WireClient c(Endpoint{"127.0.0.1", port});
          return true;
        } catch (const Error&) {
          return false;
        }
      },
      5s));
  {
    testkit::WireClient c(Endpoint{"127.0.0.1", port});
    c.send({{"type", "register"}});
    EXPECT_EQ(c.expect("register")["conn_id"].is_string(), true);
  }
  auto clash = testkit::run_cli({"server", "--listen", listen}, std::chrono::seconds(10));
  EXPECT_EQ(clash.exit_code, 1) << clash.output;
  server.signal(SIGTERM);
  EXPECT_EQ(server.wait(5s), 0) << server.output();
}

TEST(Cli, DefaultListenAddress) {
  RelayConfig defaults;
  EXPECT_EQ(defaults.listen.port, 5280);
  EXPECT_EQ(defaults.listen.host, "127.0.0.1");
}

TEST(Cli, HeadlessThreeClients) {
  std::uint16_t port = free_port();
  std::string listen = "127.0.0.1:" + std::to_string(port);
  testkit::ChildProcess server({"server", "--listen", listen});
  std::string dir = testkit::temp_dir("whisker-cli");
  std::string amy = write_text(dir, "amy.script",
                               "timeout 30\n"
                               "join den amy\n"
                               "wait-buddies 2\n"
                               "send \"hello all\"\n"
                               "expect bo \"hi amy\"\n"
                               "send-private cy \"just you\"\n"
                               "expect-private cy \"got it\"\n"
                               "leave\n");
  std::string bo = write_text(dir, "bo.script",
                              "timeout 30\n"
                              "join den bo\n"
                              "wait-buddies 2\n"
                              "expect amy \"hello all\"\n"
                              "send \"hi amy\"\n"
                              "sleep 500\n"
                              "leave\n");
  std::string cy = write_text(dir, "cy.script",
                              "timeout 30\n"
                              "join den cy\n"
                              "wait-buddies 2\n"
                              "expect amy \"hello all\"\n"
                              "expect-private amy \"just you\"\n"
                              "send-private amy \"got it\"\n"
                              "sleep 500\n"
                              "leave\n");
  std::this_thread::sleep_for(300ms);
  testkit::ChildProcess a({"headless", "--script", amy, "--server", listen});
  testkit::ChildProcess b({"headless", "--script", bo, "--server", listen});
  testkit::ChildProcess c({"headless", "--script", cy, "--server", listen});
  EXPECT_EQ(a.wait(90s), 0) << a.output();
  EXPECT_EQ(b.wait(90s), 0) << b.output();
  EXPECT_EQ(c.wait(90s), 0) << c.output();

  std::string lonely = write_text(dir, "lonely.script", "join den2 zed\nexpect nobody \"never\"\n");
  auto r = testkit::run_cli({"headless", "--script", lonely, "--server", listen, "--timeout", "2"});
  EXPECT_EQ(r.exit_code, 1) << r.output;
  EXPECT_NE(r.output.find("FAIL line 2"), std::string::npos) << r.output;

  server.signal(SIGINT);
  EXPECT_EQ(server.wait(5s), 0);
  std::filesystem::remove_all(dir);
}
