#include "support.hpp"

#include <fcntl.h>
#include <poll.h>
#include <gmp.h>
#include <signal.h>
#include <sodium.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "whisker/errors.hpp"

namespace testkit {

const char* const kEstreamSet1Vector0 =
    "e3be8fdd8beca2e3ea8ef9475b29a6e7003951e1097a5c38d23b7a5fad9f6844"
    "b22c97559e2723c7cbbd3fe4fc8d9a0744652a83e72a9c461876af4d7ef1a117";

whisker::Csprng seeded(std::uint8_t tag) {
  Bytes seed(whisker::Csprng::kSeedSize, tag);
  return whisker::Csprng(seed);
}

void ScriptedRandom::fill(std::span<std::uint8_t> out) {
  for (auto& b : out) {
    b = data_[pos_];
    pos_ = (pos_ + 1) % data_.size();
  }
}

const whisker::DsaKeyPair& keypair(std::size_t index) {
  static std::mutex mu;
  static std::map<std::size_t, whisker::DsaKeyPair> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(index);
  if (it == cache.end()) {
    auto rng = seeded(static_cast<std::uint8_t>(0x40 + index));
    auto params = whisker::generate_params(whisker::KeygenProfile::optimized(), rng);
    it = cache.emplace(index, whisker::generate_keypair(params, rng)).first;
  }
  return it->second;
}

namespace {
void sodium_ready() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium failed to initialise");
}
}  // namespace

Bytes sodium_salsa20(const std::array<std::uint8_t, 32>& key, const std::array<std::uint8_t, 8>& nonce,
                     std::uint64_t block, std::size_t len) {
  sodium_ready();
  Bytes zeros(len, 0), out(len);
  crypto_stream_salsa20_xor_ic(out.data(), zeros.data(), len, nonce.data(), block, key.data());
  return out;
}

std::array<std::uint8_t, 64> sodium_sha512(whisker::ByteView data) {
  sodium_ready();
  std::array<std::uint8_t, 64> out{};
  crypto_hash_sha512(out.data(), data.data(), data.size());
  return out;
}

std::array<std::uint8_t, 64> sodium_hmac_sha512(whisker::ByteView key, whisker::ByteView data) {
  sodium_ready();
  std::array<std::uint8_t, 64> out{};
  crypto_auth_hmacsha512_state st;
  crypto_auth_hmacsha512_init(&st, key.data(), key.size());
  crypto_auth_hmacsha512_update(&st, data.data(), data.size());
  crypto_auth_hmacsha512_final(&st, out.data());
  return out;
}

std::optional<Bytes> sodium_aes256_ctr(whisker::ByteView key, whisker::ByteView nonce12, whisker::ByteView data) {
  sodium_ready();
  if (!crypto_aead_aes256gcm_is_available()) return std::nullopt;
  Bytes out(data.size() + crypto_aead_aes256gcm_ABYTES);
  unsigned long long len = 0;
  crypto_aead_aes256gcm_encrypt(out.data(), &len, data.data(), data.size(), nullptr, 0, nullptr, nonce12.data(),
                                key.data());
  out.resize(data.size());
  return out;
}

std::array<std::uint8_t, 32> sodium_sha256(whisker::ByteView data) {
  sodium_ready();
  std::array<std::uint8_t, 32> out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

std::vector<bool> sieve(std::size_t limit) {
  std::vector<bool> is_prime(limit, true);
  for (std::size_t i = 0; i < std::min<std::size_t>(2, limit); ++i) is_prime[i] = false;
  for (std::size_t i = 2; i * i < limit; ++i) {
    if (!is_prime[i]) continue;
    for (std::size_t j = i * i; j < limit; j += i) is_prime[j] = false;
  }
  return is_prime;
}

bool gmp_probable_prime(const BigInt& n, int rounds) { return mpz_probab_prime_p(n.get_mpz_t(), rounds) > 0; }

double chi_square_p(const std::vector<std::uint64_t>& counts) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (auto c : counts) {
    double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

WireClient::WireClient(const whisker::Endpoint& server) : socket_(whisker::connect_tcp(server)) {}

void WireClient::send(const nlohmann::json& stanza) { whisker::write_frame(socket_.fd(), stanza.dump()); }

void WireClient::send_raw(const std::string& body) { whisker::write_frame(socket_.fd(), body); }

std::optional<std::string> WireClient::recv_raw(std::chrono::milliseconds timeout) {
  pollfd pfd{socket_.fd(), POLLIN, 0};
  if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return std::nullopt;
  try {
    return whisker::read_frame(socket_.fd());
  } catch (const whisker::Error&) {
    return std::nullopt;
  }
}

std::optional<nlohmann::json> WireClient::recv(std::chrono::milliseconds timeout) {
  auto raw = recv_raw(timeout);
  if (!raw) return std::nullopt;
  return nlohmann::json::parse(*raw);
}

nlohmann::json WireClient::expect(const std::string& type, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw std::runtime_error("timed out waiting for " + type);
    auto j = recv(left);
    if (!j) throw std::runtime_error("no frame while waiting for " + type);
    if (j->value("type", "") == type) return *j;
  }
}

nlohmann::json WireClient::join(const std::string& room, const std::string& nick) {
  send({{"type", "register"}});
  expect("register");
  send({{"type", "join"}, {"room", room}, {"nick", nick}});
  return expect("joined");
}

bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!pred()) {
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return true;
}

std::string temp_dir(const std::string& prefix) {
  std::string pattern = (std::filesystem::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  return pattern;
}

ChildProcess::ChildProcess(const std::vector<std::string>& args) {
  log_path_ = temp_dir("whisker-child") + "/output.log";
  pid_ = ::fork();
  if (pid_ < 0) throw std::runtime_error("fork failed");
  if (pid_ == 0) {
    int fd = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    ::dup2(fd, 1);
    ::dup2(fd, 2);
    sigset_t none;
    sigemptyset(&none);
    ::sigprocmask(SIG_SETMASK, &none, nullptr);
    std::vector<char*> argv;
    std::string exe = WHISKER_CLI;
    argv.push_back(exe.data());
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    ::execv(exe.c_str(), argv.data());
    ::_exit(127);
  }
}

ChildProcess::~ChildProcess() {
  if (!reaped_ && pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
}

void ChildProcess::signal(int sig) {
  if (!reaped_) ::kill(pid_, sig);
}

int ChildProcess::wait(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!reaped_) {
    int status = 0;
    pid_t rc = ::waitpid(pid_, &status, WNOHANG);
    if (rc == pid_) {
      reaped_ = true;
      status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      break;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      reaped_ = true;
      status_ = -1;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return status_;
}

std::string ChildProcess::output() const {
  std::ifstream in(log_path_);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ProcessResult run_cli(const std::vector<std::string>& args, std::chrono::seconds timeout) {
  ChildProcess child(args);
  ProcessResult result;
  result.exit_code = child.wait(timeout);
  result.output = child.output();
  return result;
}

}  // namespace testkit
