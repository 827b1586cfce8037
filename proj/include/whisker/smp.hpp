#pragma once

// Socialist Millionaires' Protocol: two parties learn whether their secrets
// are equal and nothing more. Four messages over the prime-order subgroup of
// the 1536-bit session group; every exponent carries a Schnorr-style proof
// with Fiat-Shamir challenges (SHA-256, one-byte step tag).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "whisker/bigint.hpp"
#include "whisker/bytes.hpp"
#include "whisker/rng.hpp"
#include "whisker/session.hpp"

namespace whisker {

struct SmpGroup {
  static const BigInt& modulus();
  /// (p - 1) / 2.
  static const BigInt& order();
  /// 4, a generator of the order-q subgroup.
  static const BigInt& generator();
  /// 2 <= x <= p-2 and x lies in the order-q subgroup.
  static bool is_member(const BigInt& x);
};

enum class SmpPhase { idle, expect2, expect3, expect4, done };
enum class SmpOutcome { pending, match, no_match, aborted };

std::string_view to_string(SmpPhase phase);
std::string_view to_string(SmpOutcome outcome);

struct SmpMsg1 {
  BigInt g2a, c2, d2;
  BigInt g3a, c3, d3;
  std::optional<std::string> question;
};

struct SmpMsg2 {
  BigInt g2b, c2, d2;
  BigInt g3b, c3, d3;
  BigInt pb, qb, cp, d5, d6;
};

struct SmpMsg3 {
  BigInt pa, qa, cp, d5, d6;
  BigInt ra, cr, d7;
};

struct SmpMsg4 {
  BigInt rb, cr, d7;
};

struct SmpState {
  SmpPhase phase = SmpPhase::idle;
  SmpOutcome outcome = SmpOutcome::pending;
  std::optional<std::string> question;

  // Own exponents (a2/a3 for the initiator, b2/b3 for the responder).
  BigInt exp2, exp3;
  BigInt peer_g3;  // the other side's g3 component
  BigInt g2, g3;
  BigInt p_mine, q_mine, p_theirs, q_theirs;
  BigInt secret;

  /// Wipes secrets and returns to idle so a fresh exchange can start.
  void reset();
};

/// SHA-256(0x01 || initiator digest || responder digest || session id ||
/// answer) reduced mod the group order. The answer is hashed as given;
/// normalize_answer trims surrounding whitespace.
BigInt smp_secret(const Fingerprint& initiator_fp, const Fingerprint& responder_fp, ByteView session_id,
                  std::string_view answer);
std::string normalize_answer(std::string_view answer);

// Each step throws Errc::protocol if the state is in the wrong phase (state
// unchanged) or a received element is outside the subgroup (state
// aborted). A failed proof sets outcome = aborted and returns nullopt.
SmpMsg1 smp_start(SmpState& state, const BigInt& secret, std::optional<std::string> question, RandomSource& rng);
std::optional<SmpMsg2> smp_msg2(SmpState& state, const BigInt& secret, const SmpMsg1& msg1, RandomSource& rng);
std::optional<SmpMsg3> smp_msg3(SmpState& state, const SmpMsg2& msg2, RandomSource& rng);
/// Responder's last step; the outcome is known after this call.
std::optional<SmpMsg4> smp_msg4(SmpState& state, const SmpMsg3& msg3, RandomSource& rng);
SmpOutcome smp_complete(SmpState& state, const SmpMsg4& msg4);

}  // namespace whisker
