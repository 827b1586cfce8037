#include "whisker/rng.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"

namespace whisker {

namespace {

constexpr std::uint32_t kSigma[4] = {0x61707865, 0x3320646e, 0x79622d32, 0x6b206574};  // "expand 32-byte k"

std::uint32_t load_le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

void store_le32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

inline void quarter_round(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c, std::uint32_t& d) {
  b ^= std::rotl(a + d, 7);
  c ^= std::rotl(b + a, 9);
  d ^= std::rotl(c + b, 13);
  a ^= std::rotl(d + c, 18);
}

}  // namespace

SalsaBlock salsa20_block(const SalsaKey& key, const SalsaNonce& nonce, std::uint64_t counter) {
  std::uint32_t in[16];
  in[0] = kSigma[0];
  for (int i = 0; i < 4; ++i) in[1 + i] = load_le32(key.data() + 4 * i);
  in[5] = kSigma[1];
  in[6] = load_le32(nonce.data());
  in[7] = load_le32(nonce.data() + 4);
  in[8] = static_cast<std::uint32_t>(counter);
  in[9] = static_cast<std::uint32_t>(counter >> 32);
  in[10] = kSigma[2];
  for (int i = 0; i < 4; ++i) in[11 + i] = load_le32(key.data() + 16 + 4 * i);
  in[15] = kSigma[3];

  std::uint32_t x[16];
  std::memcpy(x, in, sizeof(x));
  for (int round = 0; round < 20; round += 2) {
    // column round
    quarter_round(x[0], x[4], x[8], x[12]);
    quarter_round(x[5], x[9], x[13], x[1]);
    quarter_round(x[10], x[14], x[2], x[6]);
    quarter_round(x[15], x[3], x[7], x[11]);
    // row round
    quarter_round(x[0], x[1], x[2], x[3]);
    quarter_round(x[5], x[6], x[7], x[4]);
    quarter_round(x[10], x[11], x[8], x[9]);
    quarter_round(x[15], x[12], x[13], x[14]);
  }

  SalsaBlock out{};
  for (int i = 0; i < 16; ++i) store_le32(out.data() + 4 * i, x[i] + in[i]);
  return out;
}

Csprng::Csprng(ByteView entropy, std::uint64_t reseed_ceiling) : ceiling_(reseed_ceiling) {
  if (entropy.size() != kSeedSize) {
    throw Error(Errc::seed_length, "CSPRNG seed must be exactly 40 bytes, got " + std::to_string(entropy.size()));
  }
  std::copy_n(entropy.begin(), key_.size(), key_.begin());
  std::copy_n(entropy.begin() + 32, nonce_.size(), nonce_.begin());
}

Csprng Csprng::from_os_entropy() {
  Bytes seed = os_entropy(kSeedSize);
  Csprng out(seed);
  std::fill(seed.begin(), seed.end(), 0);
  return out;
}

Csprng::~Csprng() {
  // Best-effort scrub of key and stream material.
  volatile std::uint8_t* k = key_.data();
  for (std::size_t i = 0; i < key_.size(); ++i) k[i] = 0;
  volatile std::uint8_t* b = buffer_.data();
  for (std::size_t i = 0; i < buffer_.size(); ++i) b[i] = 0;
}

void Csprng::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  std::size_t from_fresh = out.size() > buffer_len_ ? out.size() - buffer_len_ : 0;
  std::uint64_t blocks_needed = (from_fresh + 63) / 64;
  if (blocks_needed > ceiling_ - blocks_emitted_) {
    throw Error(Errc::exhausted, "CSPRNG reseed ceiling reached; construct a fresh generator");
  }

  std::size_t pos = 0;
  while (pos < out.size()) {
    if (buffer_len_ == 0) {
      buffer_ = salsa20_block(key_, nonce_, block_counter_);
      ++block_counter_;
      ++blocks_emitted_;
      buffer_len_ = buffer_.size();
    }
    std::size_t offset = buffer_.size() - buffer_len_;
    std::size_t take = std::min(buffer_len_, out.size() - pos);
    std::memcpy(out.data() + pos, buffer_.data() + offset, take);
    std::memset(buffer_.data() + offset, 0, take);
    buffer_len_ -= take;
    pos += take;
  }
}

BigInt random_below(RandomSource& rng, const BigInt& m) {
  if (m < 1) throw Error(Errc::domain, "random_below requires m >= 1");
  if (m == 1) return 0;
  std::size_t bits = bit_length(m);
  std::size_t nbytes = (bits + 7) / 8;
  auto top_mask = static_cast<std::uint8_t>(0xff >> (8 * nbytes - bits));
  Bytes draw(nbytes);
  for (;;) {
    rng.fill(draw);
    draw[0] &= top_mask;
    BigInt candidate = from_bytes_be(draw);
    if (candidate < m) return candidate;
  }
}

BigInt random_range(RandomSource& rng, const BigInt& lo, const BigInt& hi) {
  if (hi < lo) throw Error(Errc::domain, "empty range");
  BigInt span = hi - lo + 1;
  return lo + random_below(rng, span);
}

}  // namespace whisker
