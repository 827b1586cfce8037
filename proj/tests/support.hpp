#pragma once

// Test fixtures and independent oracles shared by the unit tests and the
// acceptance runner.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "whisker/bigint.hpp"
#include "whisker/bytes.hpp"
#include "whisker/crypto.hpp"
#include "whisker/numtheory.hpp"
#include "whisker/net.hpp"
#include "whisker/rng.hpp"

#include <json.hpp>
#include <functional>

namespace testkit {

using whisker::BigInt;
using whisker::Bytes;

/// Deterministic generator: the 40-byte seed is `tag` repeated.
whisker::Csprng seeded(std::uint8_t tag);

/// Replays a fixed byte string, cycling.
class ScriptedRandom final : public whisker::RandomSource {
 public:
  explicit ScriptedRandom(Bytes data) : data_(std::move(data)) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  Bytes data_;
  std::size_t pos_ = 0;
};

/// One cached 1024/160 key pair per index, generated once per process.
const whisker::DsaKeyPair& keypair(std::size_t index);

// --- oracles ---------------------------------------------------------------

/// libsodium crypto_stream_salsa20 at the given block offset.
Bytes sodium_salsa20(const std::array<std::uint8_t, 32>& key, const std::array<std::uint8_t, 8>& nonce,
                     std::uint64_t block, std::size_t len);
/// libsodium SHA-512 / HMAC-SHA512.
std::array<std::uint8_t, 64> sodium_sha512(whisker::ByteView data);
std::array<std::uint8_t, 64> sodium_hmac_sha512(whisker::ByteView key, whisker::ByteView data);
/// AES-256-CTR keystream from libsodium's AES-GCM (GCM encrypts with CTR
/// starting at nonce12 || 00000002). nullopt when the CPU lacks AES-NI.
std::optional<Bytes> sodium_aes256_ctr(whisker::ByteView key, whisker::ByteView nonce12, whisker::ByteView data);
/// libsodium SHA-256.
std::array<std::uint8_t, 32> sodium_sha256(whisker::ByteView data);

/// Sieve of Eratosthenes: is_prime[n] for n < limit.
std::vector<bool> sieve(std::size_t limit);
/// GMP's own Miller-Rabin with `rounds` rounds.
bool gmp_probable_prime(const BigInt& n, int rounds);

/// Upper-tail p-value of a chi-square statistic (Boost.Math).
double chi_square_p(const std::vector<std::uint64_t>& counts);

/// Published eSTREAM Salsa20 256-bit key, set 1 vector 0 (key 80 00 .. 00,
/// IV 0), keystream bytes 0..63.
extern const char* const kEstreamSet1Vector0;

// --- relay wire --------------------------------------------------------------

/// Raw relay connection speaking the length-prefixed JSON framing.
class WireClient {
 public:
  explicit WireClient(const whisker::Endpoint& server);

  void send(const nlohmann::json& stanza);
  void send_raw(const std::string& body);
  /// Next frame as raw text; nullopt on timeout or EOF.
  std::optional<std::string> recv_raw(std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));
  std::optional<nlohmann::json> recv(std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));
  /// Skips frames until one has the given type.
  nlohmann::json expect(const std::string& type, std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));

  /// register + join; returns the joined reply.
  nlohmann::json join(const std::string& room, const std::string& nick);
  void close() { socket_.shutdown(); }

 private:
  whisker::Socket socket_;
};

/// Polls until pred() holds or the timeout passes.
bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));

// --- processes ---------------------------------------------------------------

struct ProcessResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

/// Runs the whisker CLI with arguments; kills it after `timeout`.
ProcessResult run_cli(const std::vector<std::string>& args, std::chrono::seconds timeout = std::chrono::seconds(120));

/// Child process handle for long-running CLI commands.
class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& args);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  void signal(int sig);
  /// Exit code, or -1 on timeout (the child is then killed).
  int wait(std::chrono::milliseconds timeout);
  std::string output() const;

 private:
  int pid_ = -1;
  std::string log_path_;
  bool reaped_ = false;
  int status_ = -1;
};

/// Fresh directory under the system temp dir.
std::string temp_dir(const std::string& prefix);

}  // namespace testkit
