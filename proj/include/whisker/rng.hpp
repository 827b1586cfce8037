#pragma once

// Salsa20-backed CSPRNG. A single 40-byte batch of OS entropy becomes the
// Salsa20 key and nonce; all later randomness is keystream.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "whisker/bigint.hpp"
#include "whisker/bytes.hpp"

namespace whisker {

using SalsaKey = std::array<std::uint8_t, 32>;
using SalsaNonce = std::array<std::uint8_t, 8>;
using SalsaBlock = std::array<std::uint8_t, 64>;

/// The 20-round Salsa20 core ("expand 32-byte k" constants), producing the
/// keystream block at position `counter`.
SalsaBlock salsa20_block(const SalsaKey& key, const SalsaNonce& nonce, std::uint64_t counter);

/// Anything that can fill a buffer with uniformly random bytes.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
  }
};

class Csprng final : public RandomSource {
 public:
  static constexpr std::size_t kSeedSize = 40;
  static constexpr std::uint64_t kReseedCeiling = std::uint64_t{1} << 20;

  /// First 32 bytes become the key, last 8 the nonce. Throws
  /// Errc::seed_length unless exactly 40 bytes are given.
  explicit Csprng(ByteView entropy, std::uint64_t reseed_ceiling = kReseedCeiling);

  /// Seeds from one 40-byte read of OS entropy.
  static Csprng from_os_entropy();

  Csprng(const Csprng&) = delete;
  Csprng& operator=(const Csprng&) = delete;
  Csprng(Csprng&&) noexcept = default;
  Csprng& operator=(Csprng&&) noexcept = default;
  ~Csprng() override;

  /// Throws Errc::exhausted, without consuming anything, if the request
  /// would cross the reseed ceiling.
  void fill(std::span<std::uint8_t> out) override;
  Bytes random_bytes(std::size_t n) { return bytes(n); }

  const SalsaKey& key() const noexcept { return key_; }
  const SalsaNonce& nonce() const noexcept { return nonce_; }
  std::uint64_t block_counter() const noexcept { return block_counter_; }
  std::uint64_t blocks_emitted() const noexcept { return blocks_emitted_; }
  std::size_t buffered() const noexcept { return buffer_len_; }

 private:
  SalsaKey key_{};
  SalsaNonce nonce_{};
  std::uint64_t block_counter_ = 0;
  std::uint64_t blocks_emitted_ = 0;
  std::uint64_t ceiling_;
  // Unconsumed tail of the last block occupies buffer_[64 - buffer_len_, 64).
  SalsaBlock buffer_{};
  std::size_t buffer_len_ = 0;
};

/// Uniform integer in [0, m) by rejection sampling on ceil(bitlen(m)/8)-byte
/// draws (excess high bits of the top byte are masked off first). Throws
/// Errc::domain when m < 1.
BigInt random_below(RandomSource& rng, const BigInt& m);

/// Uniform integer in [lo, hi]. Throws Errc::domain when hi < lo.
BigInt random_range(RandomSource& rng, const BigInt& lo, const BigInt& hi);

}  // namespace whisker
