#pragma once

// Encrypted file transfer over an in-band bytestream. The session's extra
// symmetric key is expanded with SHA-512 into an AES-256-CTR key and an
// HMAC-SHA512 key; the whole file is one CTR stream, split into 64 KiB data
// frames between an open frame and a close frame carrying the MAC.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "whisker/bytes.hpp"
#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"
#include "whisker/rng.hpp"

namespace whisker {

inline constexpr std::size_t kBlockSize = 65536;
inline constexpr std::size_t kMaxFileSize = std::size_t{256} << 20;

struct FileKeys {
  std::array<std::uint8_t, 32> enc{};
  std::array<std::uint8_t, 32> mac{};
};

/// (enc || mac) = SHA-512(extra_key). Throws Errc::usage unless 32 bytes.
FileKeys derive_file_keys(ByteView extra_key);

struct EncryptedFile {
  Bytes ciphertext;
  Sha512Digest mac{};
};

/// One AES-256-CTR stream from the given iv; mac = HMAC-SHA512(keys.mac,
/// file_iv || ciphertext). Throws Errc::size above kMaxFileSize.
EncryptedFile encrypt_file(const FileKeys& keys, ByteView file_iv, ByteView content);
/// Verifies the MAC before decrypting. Throws Errc::integrity.
Bytes decrypt_file(const FileKeys& keys, ByteView file_iv, ByteView ciphertext, ByteView mac);

struct FileMeta {
  std::string name;
  std::uint64_t size = 0;  // total ciphertext length
  std::array<std::uint8_t, 16> iv{};
};

enum class FrameKind { open, data, close };

struct IbbFrame {
  FrameKind kind = FrameKind::data;
  std::string sid;
  std::uint16_t seq = 0;               // data
  std::uint32_t block_size = 0;        // open
  Bytes payload;                       // data
  Bytes mac;                           // close, 64 bytes
  std::optional<FileMeta> meta;        // open
};

/// 16 lowercase hex characters from the generator.
std::string new_stream_id(RandomSource& rng);

/// open, ceil(len / 65536) data frames (seq 0, 1, ... mod 65536), close.
std::vector<IbbFrame> chunk_stream(const std::string& sid, const FileMeta& meta, ByteView ciphertext,
                                   ByteView mac);

/// Incremental receiver for one stream. Frames must arrive in order.
class StreamReceiver {
 public:
  explicit StreamReceiver(FileKeys keys) : keys_(keys) {}

  /// Errors: Errc::protocol (unknown sid or frame before open), Errc::stream
  /// (sequence gap, duplicate or overlong stream), Errc::integrity (MAC
  /// mismatch at close). After any error the receiver holds no data.
  void accept(const IbbFrame& frame);

  bool opened() const { return meta_.has_value(); }
  bool complete() const { return closed_ && !failed_; }
  const std::optional<FileMeta>& meta() const { return meta_; }
  std::uint64_t received() const { return ciphertext_.size(); }
  /// Only available once the MAC has verified; can be taken once.
  Bytes take_plaintext();

 private:
  void fail(Errc code, const std::string& what);

  FileKeys keys_;
  std::string sid_;
  std::optional<FileMeta> meta_;
  Bytes ciphertext_;
  std::uint32_t next_seq_ = 0;
  std::optional<Bytes> plaintext_;
  bool closed_ = false;
  bool failed_ = false;
};

/// Batch form of StreamReceiver.
Bytes reassemble(const std::vector<IbbFrame>& frames, const FileKeys& keys);

}  // namespace whisker
