#include "whisker/xfer.hpp"

#include <algorithm>

#include "whisker/errors.hpp"

namespace whisker {

FileKeys derive_file_keys(ByteView extra_key) {
  if (extra_key.size() != 32) throw Error(Errc::usage, "extra key must be 32 bytes");
  auto expanded = sha512(extra_key);
  FileKeys keys;
  std::copy_n(expanded.begin(), 32, keys.enc.begin());
  std::copy_n(expanded.begin() + 32, 32, keys.mac.begin());
  return keys;
}

namespace {

Sha512Digest file_mac(const FileKeys& keys, ByteView file_iv, ByteView ciphertext) {
  Bytes input(file_iv.begin(), file_iv.end());
  append(input, ciphertext);
  return hmac_sha512(keys.mac, input);
}

}  // namespace

EncryptedFile encrypt_file(const FileKeys& keys, ByteView file_iv, ByteView content) {
  if (content.size() > kMaxFileSize) throw Error(Errc::size, "file exceeds the 256 MiB transfer cap");
  EncryptedFile out;
  out.ciphertext = aes256_ctr(keys.enc, file_iv, content);
  out.mac = file_mac(keys, file_iv, out.ciphertext);
  return out;
}

Bytes decrypt_file(const FileKeys& keys, ByteView file_iv, ByteView ciphertext, ByteView mac) {
  if (!ct_equal(file_mac(keys, file_iv, ciphertext), mac)) throw Error(Errc::integrity, "file MAC mismatch");
  return aes256_ctr(keys.enc, file_iv, ciphertext);
}

std::string new_stream_id(RandomSource& rng) { return to_hex(rng.bytes(8)); }

std::vector<IbbFrame> chunk_stream(const std::string& sid, const FileMeta& meta, ByteView ciphertext,
                                   ByteView mac) {
  std::vector<IbbFrame> frames;
  frames.reserve(ciphertext.size() / kBlockSize + 3);

  IbbFrame open;
  open.kind = FrameKind::open;
  open.sid = sid;
  open.block_size = kBlockSize;
  open.meta = meta;
  open.meta->size = ciphertext.size();
  frames.push_back(std::move(open));

  std::uint16_t seq = 0;
  for (std::size_t offset = 0; offset < ciphertext.size(); offset += kBlockSize) {
    IbbFrame data;
    data.kind = FrameKind::data;
    data.sid = sid;
    data.seq = seq++;
    auto chunk = ciphertext.subspan(offset, std::min(kBlockSize, ciphertext.size() - offset));
    data.payload.assign(chunk.begin(), chunk.end());
    frames.push_back(std::move(data));
  }

  IbbFrame close;
  close.kind = FrameKind::close;
  close.sid = sid;
  close.mac.assign(mac.begin(), mac.end());
  frames.push_back(std::move(close));
  return frames;
}

void StreamReceiver::fail(Errc code, const std::string& what) {
  failed_ = true;
  std::fill(ciphertext_.begin(), ciphertext_.end(), 0);
  ciphertext_.clear();
  ciphertext_.shrink_to_fit();
  plaintext_.reset();
  throw Error(code, what);
}

void StreamReceiver::accept(const IbbFrame& frame) {
  if (failed_) throw Error(Errc::stream, "transfer already aborted");
  if (closed_) fail(Errc::stream, "frame after close");

  if (frame.kind == FrameKind::open) {
    if (opened()) fail(Errc::stream, "duplicate open frame");
    if (!frame.meta || frame.block_size != kBlockSize || frame.sid.empty()) {
      fail(Errc::protocol, "malformed open frame");
    }
    if (frame.meta->size > kMaxFileSize) fail(Errc::size, "announced file too large");
    sid_ = frame.sid;
    meta_ = frame.meta;
    ciphertext_.reserve(static_cast<std::size_t>(meta_->size));
    return;
  }

  if (!opened()) fail(Errc::protocol, "frame for a stream that was never opened");
  if (frame.sid != sid_) fail(Errc::protocol, "frame for unknown stream id");

  if (frame.kind == FrameKind::data) {
    if (frame.seq != static_cast<std::uint16_t>(next_seq_)) fail(Errc::stream, "sequence gap or duplicate");
    if (frame.payload.empty() || frame.payload.size() > kBlockSize) fail(Errc::stream, "bad chunk size");
    if (ciphertext_.size() % kBlockSize != 0) fail(Errc::stream, "short chunk before end of stream");
    if (ciphertext_.size() + frame.payload.size() > meta_->size) fail(Errc::stream, "stream longer than announced");
    append(ciphertext_, frame.payload);
    ++next_seq_;
    return;
  }

  if (ciphertext_.size() != meta_->size) fail(Errc::stream, "stream shorter than announced");
  closed_ = true;
  try {
    plaintext_ = decrypt_file(keys_, meta_->iv, ciphertext_, frame.mac);
  } catch (const Error& e) {
    fail(e.code(), e.what());
  }
  ciphertext_.clear();
  ciphertext_.shrink_to_fit();
}

Bytes StreamReceiver::take_plaintext() {
  if (!plaintext_) throw Error(Errc::stream, "transfer not complete");
  Bytes out = std::move(*plaintext_);
  plaintext_.reset();
  return out;
}

Bytes reassemble(const std::vector<IbbFrame>& frames, const FileKeys& keys) {
  StreamReceiver receiver(keys);
  for (const auto& frame : frames) receiver.accept(frame);
  if (!receiver.complete()) throw Error(Errc::stream, "stream ended without a close frame");
  return receiver.take_plaintext();
}

}  // namespace whisker
