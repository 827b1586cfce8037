#include "whisker/smp.hpp"

#include <initializer_list>

#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"

namespace whisker {

const BigInt& SmpGroup::modulus() { return DhGroup::prime(); }

const BigInt& SmpGroup::order() { return DhGroup::subgroup_order(); }

const BigInt& SmpGroup::generator() {
  static const BigInt g = 4;
  return g;
}

bool SmpGroup::is_member(const BigInt& x) {
  if (x < 2 || x > modulus() - 2) return false;
  // p is a safe prime, so the order-q subgroup is exactly the quadratic
  // residues.
  return mpz_jacobi(x.get_mpz_t(), modulus().get_mpz_t()) == 1;
}

std::string_view to_string(SmpPhase phase) {
  switch (phase) {
    case SmpPhase::idle: return "idle";
    case SmpPhase::expect2: return "expect2";
    case SmpPhase::expect3: return "expect3";
    case SmpPhase::expect4: return "expect4";
    case SmpPhase::done: return "done";
  }
  return "unknown";
}

std::string_view to_string(SmpOutcome outcome) {
  switch (outcome) {
    case SmpOutcome::pending: return "pending";
    case SmpOutcome::match: return "match";
    case SmpOutcome::no_match: return "no_match";
    case SmpOutcome::aborted: return "aborted";
  }
  return "unknown";
}

void SmpState::reset() { *this = SmpState{}; }

std::string normalize_answer(std::string_view answer) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  auto begin = answer.find_first_not_of(kSpace);
  if (begin == std::string_view::npos) return {};
  auto end = answer.find_last_not_of(kSpace);
  return std::string(answer.substr(begin, end - begin + 1));
}

BigInt smp_secret(const Fingerprint& initiator_fp, const Fingerprint& responder_fp, ByteView session_id,
                  std::string_view answer) {
  Bytes input{0x01};
  append(input, initiator_fp.digest);
  append(input, responder_fp.digest);
  append(input, session_id);
  append(input, to_bytes(answer));
  return from_bytes_be(sha256(input)) % SmpGroup::order();
}

namespace {

const BigInt& P() { return SmpGroup::modulus(); }
const BigInt& Q() { return SmpGroup::order(); }
const BigInt& G() { return SmpGroup::generator(); }

BigInt pw(const BigInt& base, const BigInt& exp) { return powm(base, exp, P()); }
BigInt mulm(const BigInt& a, const BigInt& b) { return a * b % P(); }
BigInt divm(const BigInt& a, const BigInt& b) { return a * invert(b, P()) % P(); }
// r - a*c mod q, kept nonnegative.
BigInt response(const BigInt& r, const BigInt& a, const BigInt& c) {
  BigInt d = (r - a * c) % Q();
  if (d < 0) d += Q();
  return d;
}

BigInt challenge(std::uint8_t step, std::initializer_list<const BigInt*> elements) {
  Bytes input{step};
  for (const BigInt* e : elements) append_lp(input, to_bytes_be(*e));
  return from_bytes_be(sha256(input));
}

BigInt random_exponent(RandomSource& rng) { return random_range(rng, 1, Q() - 1); }

bool valid_exponent(const BigInt& v) { return v >= 0 && v < Q(); }

void require_phase(const SmpState& state, SmpPhase phase) {
  if (state.phase != phase) {
    throw Error(Errc::protocol, "SMP message out of phase (state " + std::string(to_string(state.phase)) + ")");
  }
}

void require_members(SmpState& state, std::initializer_list<const BigInt*> elements) {
  for (const BigInt* e : elements) {
    if (!SmpGroup::is_member(*e)) {
      state.phase = SmpPhase::done;
      state.outcome = SmpOutcome::aborted;
      throw Error(Errc::protocol, "SMP group element outside the subgroup");
    }
  }
}

template <typename T>
std::optional<T> abort(SmpState& state) {
  state.phase = SmpPhase::done;
  state.outcome = SmpOutcome::aborted;
  state.secret = 0;
  state.exp2 = 0;
  state.exp3 = 0;
  return std::nullopt;
}

// Proof of knowledge of log_g(element): c == H(step, g^d * element^c).
bool check_log_proof(std::uint8_t step, const BigInt& element, const BigInt& c, const BigInt& d) {
  if (!valid_exponent(d)) return false;
  BigInt t = mulm(pw(G(), d), pw(element, c));
  return c == challenge(step, {&t});
}

// Proof that (p_val, q_val) = (g3^r, g^r * g2^secret).
bool check_coords_proof(std::uint8_t step, const SmpState& s, const BigInt& p_val, const BigInt& q_val,
                        const BigInt& c, const BigInt& d5, const BigInt& d6) {
  if (!valid_exponent(d5) || !valid_exponent(d6)) return false;
  BigInt t1 = mulm(pw(s.g3, d5), pw(p_val, c));
  BigInt t2 = mulm(mulm(pw(G(), d5), pw(s.g2, d6)), pw(q_val, c));
  return c == challenge(step, {&t1, &t2});
}

// Proof that r_val = (qa/qb)^x where g3_part = g^x.
bool check_ratio_proof(std::uint8_t step, const BigInt& g3_part, const BigInt& q_ratio, const BigInt& r_val,
                       const BigInt& c, const BigInt& d7) {
  if (!valid_exponent(d7)) return false;
  BigInt t1 = mulm(pw(G(), d7), pw(g3_part, c));
  BigInt t2 = mulm(pw(q_ratio, d7), pw(r_val, c));
  return c == challenge(step, {&t1, &t2});
}

struct LogProof {
  BigInt element, c, d;
};

LogProof prove_log(std::uint8_t step, const BigInt& exponent, RandomSource& rng) {
  BigInt r = random_exponent(rng);
  BigInt t = pw(G(), r);
  BigInt c = challenge(step, {&t});
  return {pw(G(), exponent), c, response(r, exponent, c)};
}

struct CoordsProof {
  BigInt p_val, q_val, c, d5, d6;
};

CoordsProof prove_coords(std::uint8_t step, const SmpState& s, RandomSource& rng) {
  BigInt r4 = random_exponent(rng);
  BigInt r5 = random_exponent(rng);
  BigInt r6 = random_exponent(rng);
  CoordsProof out;
  out.p_val = pw(s.g3, r4);
  out.q_val = mulm(pw(G(), r4), pw(s.g2, s.secret));
  BigInt t1 = pw(s.g3, r5);
  BigInt t2 = mulm(pw(G(), r5), pw(s.g2, r6));
  out.c = challenge(step, {&t1, &t2});
  out.d5 = response(r5, r4, out.c);
  out.d6 = response(r6, s.secret, out.c);
  return out;
}

struct RatioProof {
  BigInt r_val, c, d7;
};

RatioProof prove_ratio(std::uint8_t step, const BigInt& exp3, const BigInt& q_ratio, RandomSource& rng) {
  BigInt r7 = random_exponent(rng);
  BigInt t1 = pw(G(), r7);
  BigInt t2 = pw(q_ratio, r7);
  RatioProof out;
  out.r_val = pw(q_ratio, exp3);
  out.c = challenge(step, {&t1, &t2});
  out.d7 = response(r7, exp3, out.c);
  return out;
}

void finish(SmpState& state, const BigInt& r_ab) {
  BigInt p_ratio = state.phase == SmpPhase::expect4 ? divm(state.p_mine, state.p_theirs)
                                                     : divm(state.p_theirs, state.p_mine);
  state.outcome = r_ab == p_ratio ? SmpOutcome::match : SmpOutcome::no_match;
  state.phase = SmpPhase::done;
  state.secret = 0;
  state.exp2 = 0;
  state.exp3 = 0;
}

}  // namespace

SmpMsg1 smp_start(SmpState& state, const BigInt& secret, std::optional<std::string> question, RandomSource& rng) {
  require_phase(state, SmpPhase::idle);
  state.secret = secret % Q();
  state.exp2 = random_exponent(rng);
  state.exp3 = random_exponent(rng);
  state.question = question;
  auto p2 = prove_log(1, state.exp2, rng);
  auto p3 = prove_log(2, state.exp3, rng);
  state.phase = SmpPhase::expect2;
  return SmpMsg1{p2.element, p2.c, p2.d, p3.element, p3.c, p3.d, std::move(question)};
}

std::optional<SmpMsg2> smp_msg2(SmpState& state, const BigInt& secret, const SmpMsg1& msg1, RandomSource& rng) {
  require_phase(state, SmpPhase::idle);
  require_members(state, {&msg1.g2a, &msg1.g3a});
  state.question = msg1.question;
  if (!check_log_proof(1, msg1.g2a, msg1.c2, msg1.d2) || !check_log_proof(2, msg1.g3a, msg1.c3, msg1.d3)) {
    return abort<SmpMsg2>(state);
  }

  state.secret = secret % Q();
  state.exp2 = random_exponent(rng);
  state.exp3 = random_exponent(rng);
  auto p2 = prove_log(3, state.exp2, rng);
  auto p3 = prove_log(4, state.exp3, rng);
  state.peer_g3 = msg1.g3a;
  state.g2 = pw(msg1.g2a, state.exp2);
  state.g3 = pw(msg1.g3a, state.exp3);

  auto coords = prove_coords(5, state, rng);
  state.p_mine = coords.p_val;
  state.q_mine = coords.q_val;
  state.phase = SmpPhase::expect3;
  return SmpMsg2{p2.element, p2.c, p2.d, p3.element, p3.c, p3.d,
                 coords.p_val, coords.q_val, coords.c, coords.d5, coords.d6};
}

std::optional<SmpMsg3> smp_msg3(SmpState& state, const SmpMsg2& msg2, RandomSource& rng) {
  require_phase(state, SmpPhase::expect2);
  require_members(state, {&msg2.g2b, &msg2.g3b, &msg2.pb, &msg2.qb});
  if (!check_log_proof(3, msg2.g2b, msg2.c2, msg2.d2) || !check_log_proof(4, msg2.g3b, msg2.c3, msg2.d3)) {
    return abort<SmpMsg3>(state);
  }
  state.peer_g3 = msg2.g3b;
  state.g2 = pw(msg2.g2b, state.exp2);
  state.g3 = pw(msg2.g3b, state.exp3);
  if (!check_coords_proof(5, state, msg2.pb, msg2.qb, msg2.cp, msg2.d5, msg2.d6)) return abort<SmpMsg3>(state);
  state.p_theirs = msg2.pb;
  state.q_theirs = msg2.qb;

  auto coords = prove_coords(6, state, rng);
  state.p_mine = coords.p_val;
  state.q_mine = coords.q_val;
  BigInt q_ratio = divm(state.q_mine, state.q_theirs);
  auto ratio = prove_ratio(7, state.exp3, q_ratio, rng);
  state.phase = SmpPhase::expect4;
  return SmpMsg3{coords.p_val, coords.q_val, coords.c, coords.d5, coords.d6, ratio.r_val, ratio.c, ratio.d7};
}

std::optional<SmpMsg4> smp_msg4(SmpState& state, const SmpMsg3& msg3, RandomSource& rng) {
  require_phase(state, SmpPhase::expect3);
  require_members(state, {&msg3.pa, &msg3.qa, &msg3.ra});
  if (!check_coords_proof(6, state, msg3.pa, msg3.qa, msg3.cp, msg3.d5, msg3.d6)) return abort<SmpMsg4>(state);
  state.p_theirs = msg3.pa;
  state.q_theirs = msg3.qa;
  // Initiator's Q over responder's Q, on both sides.
  BigInt q_ratio = divm(state.q_theirs, state.q_mine);
  if (!check_ratio_proof(7, state.peer_g3, q_ratio, msg3.ra, msg3.cr, msg3.d7)) return abort<SmpMsg4>(state);

  auto ratio = prove_ratio(8, state.exp3, q_ratio, rng);
  BigInt r_ab = pw(msg3.ra, state.exp3);
  finish(state, r_ab);
  return SmpMsg4{ratio.r_val, ratio.c, ratio.d7};
}

SmpOutcome smp_complete(SmpState& state, const SmpMsg4& msg4) {
  require_phase(state, SmpPhase::expect4);
  require_members(state, {&msg4.rb});
  BigInt q_ratio = divm(state.q_mine, state.q_theirs);
  if (!check_ratio_proof(8, state.peer_g3, q_ratio, msg4.rb, msg4.cr, msg4.d7)) {
    abort<SmpMsg4>(state);
    return state.outcome;
  }
  finish(state, pw(msg4.rb, state.exp3));
  return state.outcome;
}

}  // namespace whisker
