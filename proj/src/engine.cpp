#include "whisker/engine.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <thread>

#include "whisker/catfacts.hpp"
#include "whisker/codec.hpp"
#include "whisker/errors.hpp"
#include "whisker/group.hpp"
#include "whisker/names.hpp"
#include "whisker/smp.hpp"
#include "whisker/xfer.hpp"

namespace whisker {

using Clock = std::chrono::steady_clock;

std::string_view to_string(AuthStatus status) {
  switch (status) {
    case AuthStatus::unverified: return "unverified";
    case AuthStatus::smp_verified: return "smp_verified";
    case AuthStatus::fingerprint_verified: return "fingerprint_verified";
  }
  return "unknown";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::keygen_progress: return "keygen_progress";
    case EventKind::joined: return "joined";
    case EventKind::buddy_joined: return "buddy_joined";
    case EventKind::buddy_left: return "buddy_left";
    case EventKind::message: return "message";
    case EventKind::smp_request: return "smp_request";
    case EventKind::smp_result: return "smp_result";
    case EventKind::file_offer: return "file_offer";
    case EventKind::file_progress: return "file_progress";
    case EventKind::file_done: return "file_done";
    case EventKind::warning: return "warning";
    case EventKind::error: return "error";
  }
  return "unknown";
}

Json EngineEvent::to_json() const {
  return Json{{"index", index}, {"kind", std::string(whisker::to_string(kind))}, {"payload", payload}};
}

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

Json colors_json(const ColorCode& code) {
  Json out = Json::array();
  for (const auto& c : code.colors) out.push_back(c.hex());
  return out;
}

std::string reason_code(Errc code) {
  switch (code) {
    case Errc::forgery:
    case Errc::integrity: return "bad_mac";
    case Errc::authentication: return "bad_sig";
    case Errc::replay: return "replay";
    case Errc::no_key: return "no_key";
    case Errc::protocol: return "protocol";
    case Errc::stream: return "stream";
    case Errc::throttle: return "throttle";
    default: return "malformed";
  }
}

// Relay connection: a reader thread feeding the engine and a paced writer.
class RelayLink {
 public:
  RelayLink(Socket socket, double rate, std::function<void(const std::string&)> on_stanza,
            std::function<void()> on_close)
      : socket_(std::move(socket)),
        interval_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate))),
        on_stanza_(std::move(on_stanza)),
        on_close_(std::move(on_close)) {
    writer_ = std::thread([this] { writer_loop(); });
    reader_ = std::thread([this] { reader_loop(); });
  }

  ~RelayLink() { close(); }

  void send(const Json& stanza, bool paced) {
    std::lock_guard lock(mu_);
    if (closed_) return;
    queue_.emplace_back(stanza.dump(), paced);
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
      cv_.notify_all();
    }
    socket_.shutdown();
    if (writer_.joinable()) writer_.join();
    if (reader_.joinable()) reader_.join();
  }

 private:
  void reader_loop() {
    try {
      while (auto body = read_frame(socket_.fd())) on_stanza_(*body);
    } catch (const Error&) {
    }
    bool expected;
    {
      std::lock_guard lock(mu_);
      expected = closed_;
      closed_ = true;
      cv_.notify_all();
    }
    if (!expected) on_close_();
  }

  void writer_loop() {
    Clock::time_point next_slot = Clock::now();
    for (;;) {
      std::pair<std::string, bool> item;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
        if (closed_) return;
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      if (item.second) {
        auto now = Clock::now();
        if (next_slot > now) std::this_thread::sleep_until(next_slot);
        next_slot = std::max(now, next_slot) + interval_;
      }
      try {
        write_frame(socket_.fd(), item.first);
      } catch (const Error&) {
        socket_.shutdown();
        return;
      }
    }
  }

  Socket socket_;
  Clock::duration interval_;
  std::function<void(const std::string&)> on_stanza_;
  std::function<void()> on_close_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<std::string, bool>> queue_;
  bool closed_ = false;
  std::thread reader_;
  std::thread writer_;
};

struct OutgoingTransfer {
  std::string name;
  std::vector<IbbFrame> frames;  // open, data..., close
};

struct IncomingTransfer {
  std::unique_ptr<StreamReceiver> receiver;
  FileMeta meta;
  bool accepted = false;
  std::string dest;
};

struct Peer {
  std::string nick;
  bool announced = false;
  BigInt group_dh;
  DsaPublicKey dsa;
  Fingerprint fp;
  ColorCode color;
  AuthStatus auth = AuthStatus::unverified;

  std::optional<AkeInitiatorState> ake_initiator;
  std::optional<AkeResponderState> ake_responder;
  std::optional<SessionKeys> session;
  std::deque<Json> pending;

  SmpState smp;
  bool smp_initiator = false;
  std::optional<SmpMsg1> smp_request;
  std::deque<Clock::time_point> smp_runs;

  std::map<std::string, OutgoingTransfer> outgoing;
  std::map<std::string, IncomingTransfer> incoming;

  RosterEntry roster_entry() const { return RosterEntry{group_dh, dsa}; }
};

}  // namespace

struct Engine::Impl {
  explicit Impl(EngineConfig c) : config(std::move(c)) {}

  EngineConfig config;

  mutable std::mutex mu;
  mutable std::condition_variable cv;
  Csprng rng = Csprng::from_os_entropy();

  bool keygen_started = false;
  std::string keygen_stage = "idle";
  std::thread keygen_thread;
  std::optional<DsaKeyPair> identity;
  std::optional<Fingerprint> my_fp;

  std::unique_ptr<RelayLink> link;
  std::string room;
  std::string nick;
  std::string pending_nick;
  std::optional<GroupIdentity> group;
  GroupCounters counters;
  std::map<std::string, Peer> peers;
  std::vector<MessageView> messages;
  std::map<std::string, std::string> offer_owner;  // offer id -> nick
  std::uint64_t next_request_id = 0;
  std::map<std::uint64_t, Json> replies;
  std::uint64_t messages_received = 0;
  std::uint64_t warnings = 0;

  mutable std::mutex ev_mu;
  mutable std::condition_variable ev_cv;
  std::vector<EngineEvent> log;
  std::map<std::uint64_t, Listener> listeners;
  std::uint64_t next_listener = 0;
  std::function<void(const std::string&)> tap;

  // --- events -------------------------------------------------------------

  void emit(EventKind kind, Json payload) {
    EngineEvent event;
    std::vector<Listener> targets;
    {
      std::lock_guard lock(ev_mu);
      event.index = log.size();
      event.kind = kind;
      event.payload = std::move(payload);
      log.push_back(event);
      for (const auto& [id, l] : listeners) targets.push_back(l);
    }
    ev_cv.notify_all();
    for (const auto& l : targets) l(event);
  }

  void warn(const std::string& reason, const std::string& detail, const std::string& from = {}) {
    ++warnings;
    Json payload{{"reason", reason}, {"detail", detail}};
    if (!from.empty()) payload["from"] = from;
    emit(EventKind::warning, std::move(payload));
  }

  // --- keygen -------------------------------------------------------------

  void run_keygen() {
    Csprng local = Csprng::from_os_entropy();
    auto facts = cat_facts();
    std::size_t fact = static_cast<std::size_t>(random_below(local, facts.size()).get_ui());
    std::string last_stage;
    auto progress = [&](const std::string& stage, std::uint64_t p_candidates) {
      fact = (fact + 1) % facts.size();
      {
        std::lock_guard lock(mu);
        keygen_stage = stage;
      }
      emit(EventKind::keygen_progress,
           {{"stage", stage}, {"candidates", p_candidates}, {"cat_fact", std::string(facts[fact])}});
    };

    progress("start", 0);
    DsaParams params = generate_params(config.keygen, local, [&](const KeygenStatus& status) {
      switch (status.stage) {
        case KeygenStage::subgroup_prime: progress("subgroup_prime", status.p_candidates); break;
        case KeygenStage::modulus_prime: progress("modulus_prime", status.p_candidates); break;
        case KeygenStage::generator: progress("generator", status.p_candidates); break;
        case KeygenStage::done: break;
      }
    });
    DsaKeyPair key = generate_keypair(params, local);
    Fingerprint fp = fingerprint(key.params, key.y);
    {
      std::lock_guard lock(mu);
      identity = std::move(key);
      my_fp = fp;
      keygen_stage = "done";
    }
    cv.notify_all();
    emit(EventKind::keygen_progress, {{"stage", "done"},
                                      {"fingerprint", fp.display},
                                      {"colors", colors_json(color_code(fp))},
                                      {"cat_fact", std::string(facts[(fact + 1) % facts.size()])}});
  }

  // --- relay I/O ----------------------------------------------------------

  void send_stanza(const Json& stanza, bool paced) {
    if (link) link->send(stanza, paced);
  }

  void send_envelope(const std::string& type, const std::string& to, const Json& envelope) {
    Json stanza{{"type", type}, {"payload", base64_encode(to_bytes(envelope.dump()))}};
    if (!to.empty()) stanza["to"] = to;
    send_stanza(stanza, true);
  }

  Json await_reply(std::unique_lock<std::mutex>& lock, std::uint64_t id) {
    bool got = cv.wait_for(lock, config.join_timeout, [&] { return replies.count(id) > 0 || !link; });
    if (!got || !replies.count(id)) throw Error(Errc::timeout, "relay did not answer");
    Json reply = std::move(replies[id]);
    replies.erase(id);
    if (reply.value("type", "") == "error") {
      std::string code = reply.value("code", "protocol");
      throw Error(errc_from_string(code), "relay refused: " + reply.value("message", code));
    }
    return reply;
  }

  // --- identity announcements --------------------------------------------

  Bytes announce_digest_input(const std::string& who, const BigInt& dh, const DsaPublicKey& dsa) const {
    Bytes m = to_bytes("whisker-announce-v1");
    append_lp(m, to_bytes(room));
    append_lp(m, to_bytes(who));
    append_lp(m, encode_dh(dh));
    append_lp(m, encode_public_key(dsa.params, dsa.y));
    return m;
  }

  Json my_announce() {
    auto digest = dsa_digest(announce_digest_input(nick, group->dh_public, identity->public_key()));
    return Json{{"t", "announce"},
                {"nick", nick},
                {"dh", encode_int(group->dh_public)},
                {"dsa", to_json(identity->public_key())},
                {"sig", to_json(dsa_sign(*identity, digest, rng))}};
  }

  void handle_announce(const std::string& from, const Json& env) {
    std::string who = env.at("nick").get<std::string>();
    if (who != from || who == nick) throw Error(Errc::protocol, "announcement for the wrong nickname");
    BigInt dh = decode_int(env.at("dh"));
    DsaPublicKey dsa = dsa_public_key_from_json(env.at("dsa"));
    DsaSignature sig = dsa_signature_from_json(env.at("sig"));
    if (!dh_value_in_range(dh) || !dsa_public_key_consistent(dsa.params, dsa.y)) {
      throw Error(Errc::protocol, "announced keys are malformed");
    }
    if (!dsa_verify(dsa.params, dsa.y, dsa_digest(announce_digest_input(who, dh, dsa)), sig)) {
      throw Error(Errc::authentication, "announcement signature does not verify");
    }
    auto it = peers.find(who);
    if (it != peers.end() && it->second.announced) {
      if (it->second.dsa == dsa && it->second.group_dh == dh) return;
      throw Error(Errc::protocol, "buddy keys changed mid-session; ignoring");
    }
    Peer& peer = peers[who];
    peer.nick = who;
    peer.announced = true;
    peer.group_dh = dh;
    peer.dsa = dsa;
    peer.fp = fingerprint(dsa);
    peer.color = color_code(peer.fp);
    counters.last_seen.erase(who);
    emit(EventKind::buddy_joined, {{"nick", who},
                                   {"fingerprint", peer.fp.display},
                                   {"colors", colors_json(peer.color)},
                                   {"auth", std::string(to_string(peer.auth))}});
    if (nick < who) {
      AkeStart start = ake_initiate(*identity, rng);
      peer.ake_initiator = std::move(start.state);
      Json env1 = to_json(start.message);
      env1["t"] = "ake1";
      send_envelope("private", who, env1);
    }
  }

  // --- 1:1 sessions -------------------------------------------------------

  Peer& announced_peer(const std::string& who) {
    auto it = peers.find(who);
    if (it == peers.end() || !it->second.announced) throw Error(Errc::protocol, "stanza from an unknown buddy");
    return it->second;
  }

  void session_established(Peer& peer) {
    emit(EventKind::buddy_joined, {{"nick", peer.nick},
                                   {"fingerprint", peer.fp.display},
                                   {"colors", colors_json(peer.color)},
                                   {"auth", std::string(to_string(peer.auth))},
                                   {"session", true}});
    while (!peer.pending.empty()) {
      Json inner = std::move(peer.pending.front());
      peer.pending.pop_front();
      send_sealed_now(peer, inner);
    }
  }

  void send_sealed_now(Peer& peer, const Json& inner) {
    SealedMessage sealed = seal_message(*peer.session, to_bytes(inner.dump()), rng);
    Json env = to_json(sealed);
    env["t"] = "sealed";
    send_envelope("private", peer.nick, env);
  }

  void send_sealed(Peer& peer, Json inner) {
    if (peer.session) {
      send_sealed_now(peer, inner);
    } else {
      peer.pending.push_back(std::move(inner));
    }
  }

  void handle_ake1(Peer& peer, const Json& env) {
    AkeMessage1 msg = ake1_from_json(env);
    if (!(msg.identity == peer.dsa)) throw Error(Errc::authentication, "key exchange identity differs from announcement");
    AkeResponse response = ake_respond(*identity, msg, rng);
    peer.ake_responder = std::move(response.state);
    peer.session.reset();
    Json env2 = to_json(response.message);
    env2["t"] = "ake2";
    send_envelope("private", peer.nick, env2);
  }

  void handle_ake2(Peer& peer, const Json& env) {
    if (!peer.ake_initiator) throw Error(Errc::protocol, "unexpected key exchange reply");
    AkeMessage2 msg = ake2_from_json(env);
    if (!(msg.identity == peer.dsa)) throw Error(Errc::authentication, "key exchange identity differs from announcement");
    AkeCompletion done = ake_finalize(*peer.ake_initiator, msg, rng);
    peer.ake_initiator.reset();
    peer.session = std::move(done.keys);
    Json env3 = to_json(done.message);
    env3["t"] = "ake3";
    send_envelope("private", peer.nick, env3);
    session_established(peer);
  }

  void handle_ake3(Peer& peer, const Json& env) {
    if (!peer.ake_responder) throw Error(Errc::protocol, "unexpected key exchange confirmation");
    AkeMessage3 msg = ake3_from_json(env);
    AkeResponderState state = std::move(*peer.ake_responder);
    peer.ake_responder.reset();
    peer.session = ake_confirm(std::move(state), msg);
    session_established(peer);
  }

  // --- SMP ----------------------------------------------------------------

  bool smp_allowed(Peer& peer) {
    auto now = Clock::now();
    while (!peer.smp_runs.empty() && now - peer.smp_runs.front() >= std::chrono::minutes(1)) peer.smp_runs.pop_front();
    if (peer.smp_runs.size() >= config.smp_runs_per_minute) return false;
    peer.smp_runs.push_back(now);
    return true;
  }

  void smp_finished(Peer& peer, SmpOutcome outcome) {
    if (outcome == SmpOutcome::match && peer.auth == AuthStatus::unverified) peer.auth = AuthStatus::smp_verified;
    emit(EventKind::smp_result, {{"nick", peer.nick},
                                 {"outcome", std::string(to_string(outcome))},
                                 {"auth", std::string(to_string(peer.auth))}});
    peer.smp_request.reset();
  }

  void smp_aborted(Peer& peer, bool notify_peer) {
    peer.smp.phase = SmpPhase::done;
    peer.smp.outcome = SmpOutcome::aborted;
    if (notify_peer) send_sealed(peer, Json{{"t", "smp_abort"}});
    smp_finished(peer, SmpOutcome::aborted);
  }

  void handle_smp(Peer& peer, const std::string& type, const Json& inner) {
    if (type == "smp1") {
      SmpMsg1 msg = smp1_from_json(inner);
      if (!smp_allowed(peer)) {
        send_sealed(peer, Json{{"t", "smp_abort"}});
        throw Error(Errc::throttle, "too many SMP requests from this buddy");
      }
      peer.smp.reset();
      peer.smp_initiator = false;
      peer.smp_request = std::move(msg);
      emit(EventKind::smp_request, {{"nick", peer.nick}, {"question", peer.smp_request->question.value_or("")}});
    } else if (type == "smp2") {
      if (!peer.smp_initiator) throw Error(Errc::protocol, "SMP reply without a request");
      auto out = smp_msg3(peer.smp, smp2_from_json(inner), rng);
      if (!out) return smp_aborted(peer, true);
      Json j = to_json(*out);
      j["t"] = "smp3";
      send_sealed(peer, j);
    } else if (type == "smp3") {
      if (peer.smp_initiator) throw Error(Errc::protocol, "SMP message out of phase");
      auto out = smp_msg4(peer.smp, smp3_from_json(inner), rng);
      if (!out) return smp_aborted(peer, true);
      Json j = to_json(*out);
      j["t"] = "smp4";
      send_sealed(peer, j);
      smp_finished(peer, peer.smp.outcome);
    } else if (type == "smp4") {
      if (!peer.smp_initiator) throw Error(Errc::protocol, "SMP message out of phase");
      SmpOutcome outcome = smp_complete(peer.smp, smp4_from_json(inner));
      if (outcome == SmpOutcome::aborted) return smp_aborted(peer, true);
      smp_finished(peer, outcome);
    } else {  // smp_abort
      if (peer.smp.phase == SmpPhase::done || (peer.smp.phase == SmpPhase::idle && !peer.smp_request)) return;
      smp_aborted(peer, false);
    }
  }

  // --- file transfer ------------------------------------------------------

  void handle_ibb_control(Peer& peer, const Json& frame_json) {
    IbbFrame frame = ibb_frame_from_json(frame_json);
    if (frame.kind == FrameKind::open) {
      if (peer.incoming.count(frame.sid) || offer_owner.count(frame.sid)) {
        throw Error(Errc::stream, "duplicate stream id");
      }
      IncomingTransfer transfer;
      transfer.receiver = std::make_unique<StreamReceiver>(derive_file_keys(peer.session->extra_key));
      transfer.receiver->accept(frame);
      transfer.meta = *frame.meta;
      peer.incoming.emplace(frame.sid, std::move(transfer));
      offer_owner[frame.sid] = peer.nick;
      emit(EventKind::file_offer, {{"offer_id", frame.sid},
                                   {"nick", peer.nick},
                                   {"name", frame.meta->name},
                                   {"size", frame.meta->size}});
      return;
    }
    if (frame.kind != FrameKind::close) throw Error(Errc::protocol, "data frames travel outside the session channel");
    auto it = peer.incoming.find(frame.sid);
    if (it == peer.incoming.end() || !it->second.accepted) throw Error(Errc::protocol, "unknown stream id");
    IncomingTransfer& transfer = it->second;
    try {
      transfer.receiver->accept(frame);
    } catch (const Error&) {
      emit(EventKind::file_done, {{"offer_id", frame.sid}, {"nick", peer.nick}, {"direction", "in"}, {"ok", false}});
      offer_owner.erase(frame.sid);
      peer.incoming.erase(it);
      throw;
    }
    Bytes content = transfer.receiver->take_plaintext();
    std::string dest = transfer.dest;
    std::ofstream out(dest, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(content.data()), static_cast<std::streamsize>(content.size()));
    bool ok = static_cast<bool>(out);
    out.close();
    offer_owner.erase(frame.sid);
    peer.incoming.erase(it);
    if (!ok) {
      emit(EventKind::error, {{"code", "io"}, {"message", "cannot write received file"}});
    }
    emit(EventKind::file_done, {{"offer_id", frame.sid},
                                {"nick", peer.nick},
                                {"direction", "in"},
                                {"path", dest},
                                {"size", content.size()},
                                {"ok", ok}});
  }

  void handle_ibb_data(Peer& peer, const Json& env) {
    IbbFrame frame = ibb_frame_from_json(env.at("frame"));
    if (frame.kind != FrameKind::data) throw Error(Errc::protocol, "control frames must be sealed");
    auto it = peer.incoming.find(frame.sid);
    if (it == peer.incoming.end() || !it->second.accepted) throw Error(Errc::protocol, "unknown stream id");
    try {
      it->second.receiver->accept(frame);
    } catch (const Error&) {
      emit(EventKind::file_done, {{"offer_id", frame.sid}, {"nick", peer.nick}, {"direction", "in"}, {"ok", false}});
      offer_owner.erase(frame.sid);
      peer.incoming.erase(it);
      throw;
    }
    emit(EventKind::file_progress, {{"offer_id", frame.sid},
                                    {"nick", peer.nick},
                                    {"direction", "in"},
                                    {"received", it->second.receiver->received()},
                                    {"total", it->second.meta.size}});
  }

  void handle_ibb_accept(Peer& peer, const Json& inner) {
    std::string sid = inner.at("sid").get<std::string>();
    auto it = peer.outgoing.find(sid);
    if (it == peer.outgoing.end()) throw Error(Errc::protocol, "accept for an unknown offer");
    OutgoingTransfer transfer = std::move(it->second);
    peer.outgoing.erase(it);
    std::size_t sent = 0;
    for (const auto& frame : transfer.frames) {
      if (frame.kind == FrameKind::data) {
        send_envelope("private", peer.nick, Json{{"t", "ibb"}, {"frame", to_json(frame)}});
        sent += frame.payload.size();
      } else if (frame.kind == FrameKind::close) {
        send_sealed(peer, Json{{"t", "ibb"}, {"frame", to_json(frame)}});
      }
    }
    emit(EventKind::file_done,
         {{"offer_id", sid}, {"nick", peer.nick}, {"direction", "out"}, {"size", sent}, {"ok", true}});
  }

  // --- inbound dispatch ---------------------------------------------------

  void handle_inner(Peer& peer, const Json& inner) {
    if (!inner.is_object() || !inner.contains("t") || !inner["t"].is_string()) {
      throw Error(Errc::malformed, "sealed payload without a type");
    }
    const auto& t = inner["t"].get_ref<const std::string&>();
    if (t == "chat") {
      std::string text = inner.at("text").get<std::string>();
      messages.push_back(MessageView{peer.nick, text, true, nick, now_ms(), "received"});
      ++messages_received;
      emit(EventKind::message, {{"from", peer.nick}, {"text", text}, {"private", true}});
    } else if (t == "smp1" || t == "smp2" || t == "smp3" || t == "smp4" || t == "smp_abort") {
      handle_smp(peer, t, inner);
    } else if (t == "ibb") {
      handle_ibb_control(peer, inner.at("frame"));
    } else if (t == "ibb_accept") {
      handle_ibb_accept(peer, inner);
    } else {
      throw Error(Errc::malformed, "unknown sealed payload type");
    }
  }

  void handle_payload(const std::string& from, bool is_private, const std::string& payload) {
    Json env = parse_json(to_string(base64_decode(payload)));
    if (!env.is_object() || !env.contains("t") || !env["t"].is_string()) {
      throw Error(Errc::malformed, "payload without a type");
    }
    const auto t = env["t"].get<std::string>();
    if (t == "announce") return handle_announce(from, env);
    Peer& peer = announced_peer(from);
    if (t == "group") {
      if (is_private) throw Error(Errc::protocol, "group message sent privately");
      GroupMessage msg = group_message_from_json(env.at("msg"));
      if (msg.sender != from) throw Error(Errc::authentication, "group message sender mismatch");
      Bytes plain = group_open(*group, peer.roster_entry(), msg, counters);
      std::string text = to_string(plain);
      messages.push_back(MessageView{from, text, false, {}, now_ms(), "received"});
      ++messages_received;
      emit(EventKind::message, {{"from", from}, {"text", text}, {"private", false}});
      return;
    }
    if (!is_private) throw Error(Errc::protocol, "session traffic must be private");
    if (t == "ake1") return handle_ake1(peer, env);
    if (t == "ake2") return handle_ake2(peer, env);
    if (t == "ake3") return handle_ake3(peer, env);
    if (t == "ibb") return handle_ibb_data(peer, env);
    if (t == "sealed") {
      if (!peer.session) throw Error(Errc::protocol, "sealed message before key exchange");
      Bytes plain = open_message(*peer.session, sealed_from_json(env));
      return handle_inner(peer, parse_json(to_string(plain)));
    }
    throw Error(Errc::malformed, "unknown payload type");
  }

  void handle_joined(const Json& j) {
    room = j.at("room").get<std::string>();
    nick = pending_nick;
    group = make_group_identity(*identity, nick, rng);
    counters = GroupCounters{};
    Json occupants = j.value("occupants", Json::array());
    emit(EventKind::joined, {{"room", room}, {"nick", nick}, {"occupants", occupants}});
    Json announce = my_announce();
    if (occupants.size() > 1) send_envelope("groupchat", "", announce);
  }

  void handle_presence(const Json& j) {
    std::string who = j.at("from").get<std::string>();
    std::string status = j.at("status").get<std::string>();
    if (who == nick) return;
    if (status == "join") {
      if (group) send_envelope("private", who, my_announce());
    } else if (status == "leave") {
      auto it = peers.find(who);
      if (it != peers.end()) {
        for (const auto& [sid, transfer] : it->second.incoming) offer_owner.erase(sid);
        peers.erase(it);
      }
      counters.last_seen.erase(who);
      emit(EventKind::buddy_left, {{"nick", who}});
    }
  }

  void dispatch(const Json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
      throw Error(Errc::malformed, "stanza without a type");
    }
    const auto type = j["type"].get<std::string>();
    if (type == "joined") handle_joined(j);
    if (j.contains("id") && j["id"].is_number_unsigned()) {
      replies[j["id"].get<std::uint64_t>()] = j;
      cv.notify_all();
      return;
    }
    if (type == "presence") return handle_presence(j);
    if (type == "groupchat" || type == "private") {
      if (!group) throw Error(Errc::protocol, "chat stanza outside a room");
      const auto& from = j.at("from");
      const auto& payload = j.at("payload");
      if (!from.is_string() || !payload.is_string()) throw Error(Errc::malformed, "bad chat stanza");
      return handle_payload(from.get<std::string>(), type == "private", payload.get<std::string>());
    }
    if (type == "error") {
      emit(EventKind::error, {{"code", j.value("code", "unknown")}, {"message", j.value("message", "")}});
      return;
    }
    if (type == "pong") return;
    throw Error(Errc::malformed, "unknown stanza type");
  }

  void on_stanza(const std::string& text) {
    std::function<void(const std::string&)> tap_copy;
    {
      std::lock_guard lock(mu);
      try {
        dispatch(parse_json(text));
      } catch (const Error& e) {
        warn(reason_code(e.code()), e.what());
      } catch (const std::exception& e) {
        warn("malformed", e.what());
      }
      tap_copy = tap;
    }
    if (tap_copy) tap_copy(text);
  }

  void on_relay_closed() {
    {
      std::lock_guard lock(mu);
      cv.notify_all();
    }
    emit(EventKind::error, {{"code", "disconnected"}, {"message", "relay connection closed"}});
  }

  // --- commands -----------------------------------------------------------

  void require_room() const {
    if (!group || !link) throw Error(Errc::usage, "not in a room");
  }

  Peer& require_session(const std::string& who) {
    require_room();
    auto it = peers.find(who);
    if (it == peers.end() || !it->second.announced) throw Error(Errc::usage, "no such buddy '" + who + "'");
    return it->second;
  }
};

Engine::Engine(EngineConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Engine::~Engine() {
  std::unique_ptr<RelayLink> link;
  {
    std::lock_guard lock(impl_->mu);
    link = std::move(impl_->link);
  }
  link.reset();
  if (impl_->keygen_thread.joinable()) impl_->keygen_thread.join();
}

void Engine::start_session() {
  std::lock_guard lock(impl_->mu);
  if (impl_->keygen_started) return;
  impl_->keygen_started = true;
  impl_->keygen_stage = "start";
  impl_->keygen_thread = std::thread([this] { impl_->run_keygen(); });
}

bool Engine::ready() const {
  std::lock_guard lock(impl_->mu);
  return impl_->identity.has_value();
}

bool Engine::wait_ready(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->mu);
  return impl_->cv.wait_for(lock, timeout, [&] { return impl_->identity.has_value(); });
}

Json Engine::status() const {
  std::lock_guard lock(impl_->mu);
  const Impl& s = *impl_;
  Json out{{"ready", s.identity.has_value()},
           {"keygen", s.keygen_stage},
           {"room", s.room},
           {"nick", s.nick},
           {"connected", s.link != nullptr},
           {"messages_received", s.messages_received},
           {"warnings", s.warnings}};
  if (s.my_fp) {
    out["fingerprint"] = s.my_fp->display;
    out["colors"] = colors_json(color_code(*s.my_fp));
  }
  Json buddies = Json::array();
  for (const auto& [nick, peer] : s.peers) {
    if (!peer.announced) continue;
    buddies.push_back({{"nick", nick},
                       {"fingerprint", peer.fp.display},
                       {"colors", colors_json(peer.color)},
                       {"auth", std::string(to_string(peer.auth))},
                       {"session", peer.session.has_value()}});
  }
  out["buddies"] = std::move(buddies);
  return out;
}

ConversationView Engine::view() const {
  std::lock_guard lock(impl_->mu);
  ConversationView v;
  v.room = impl_->room;
  v.me = impl_->nick;
  for (const auto& [nick, peer] : impl_->peers) {
    if (!peer.announced) continue;
    v.buddies.push_back(BuddyView{nick, peer.fp.display, peer.color, peer.auth, peer.session.has_value()});
  }
  v.messages = impl_->messages;
  return v;
}

void Engine::join_room(const Endpoint& server, const std::string& room, const std::string& nickname) {
  if (!valid_nickname(nickname)) throw Error(Errc::validation, "invalid nickname");
  if (!valid_room_name(room)) throw Error(Errc::validation, "invalid room name");
  if (!wait_ready(std::chrono::minutes(5))) throw Error(Errc::usage, "session keys are not ready");

  std::unique_lock lock(impl_->mu);
  if (impl_->link) throw Error(Errc::usage, "already in a room; leave first");
  Socket socket = connect_tcp(server);
  impl_->link = std::make_unique<RelayLink>(
      std::move(socket), impl_->config.send_rate, [this](const std::string& s) { impl_->on_stanza(s); },
      [this] { impl_->on_relay_closed(); });
  impl_->pending_nick = nickname;

  try {
    std::uint64_t reg_id = ++impl_->next_request_id;
    impl_->send_stanza({{"type", "register"}, {"id", reg_id}}, false);
    impl_->await_reply(lock, reg_id);
    std::uint64_t join_id = ++impl_->next_request_id;
    impl_->send_stanza({{"type", "join"}, {"id", join_id}, {"room", room}, {"nick", nickname}}, false);
    impl_->await_reply(lock, join_id);
  } catch (...) {
    auto link = std::move(impl_->link);
    impl_->group.reset();
    impl_->room.clear();
    impl_->nick.clear();
    lock.unlock();
    link.reset();
    throw;
  }
}

void Engine::send_group(const std::string& text) {
  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  s.require_room();
  Roster roster;
  for (const auto& [nick, peer] : s.peers) {
    if (peer.announced) roster.emplace(nick, peer.roster_entry());
  }
  if (roster.empty()) throw Error(Errc::usage, "nobody else is in the room");
  GroupMessage msg = group_seal(*s.group, roster, to_bytes(text), s.counters, s.rng);
  s.send_envelope("groupchat", "", Json{{"t", "group"}, {"msg", to_json(msg)}});
  s.messages.push_back(MessageView{s.nick, text, false, {}, now_ms(), "sent"});
}

void Engine::send_private(const std::string& nickname, const std::string& text) {
  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  Peer& peer = s.require_session(nickname);
  s.send_sealed(peer, Json{{"t", "chat"}, {"text", text}});
  s.messages.push_back(MessageView{s.nick, text, true, nickname, now_ms(), "sent"});
}

void Engine::start_smp(const std::string& nickname, const std::string& question, const std::string& answer) {
  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  Peer& peer = s.require_session(nickname);
  if (!peer.session) throw Error(Errc::usage, "no encrypted session with this buddy yet");
  if (!s.smp_allowed(peer)) throw Error(Errc::throttle, "SMP rate limit reached for this buddy");
  BigInt secret = smp_secret(*s.my_fp, peer.fp, peer.session->session_id, normalize_answer(answer));
  peer.smp.reset();
  peer.smp_request.reset();
  peer.smp_initiator = true;
  SmpMsg1 msg = smp_start(peer.smp, secret, question.empty() ? std::nullopt : std::optional(question), s.rng);
  Json j = to_json(msg);
  j["t"] = "smp1";
  s.send_sealed(peer, j);
}

void Engine::answer_smp(const std::string& nickname, const std::string& answer) {
  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  Peer& peer = s.require_session(nickname);
  if (!peer.smp_request || !peer.session) throw Error(Errc::usage, "no pending SMP request from this buddy");
  BigInt secret = smp_secret(peer.fp, *s.my_fp, peer.session->session_id, normalize_answer(answer));
  SmpMsg1 request = std::move(*peer.smp_request);
  peer.smp_request.reset();
  std::optional<SmpMsg2> out;
  try {
    out = smp_msg2(peer.smp, secret, request, s.rng);
  } catch (const Error& e) {
    s.smp_aborted(peer, true);
    return;
  }
  if (!out) return s.smp_aborted(peer, true);
  Json j = to_json(*out);
  j["t"] = "smp2";
  s.send_sealed(peer, j);
}

std::string Engine::offer_file(const std::string& nickname, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open '" + path + "'");
  Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.size() > kMaxFileSize) throw Error(Errc::size, "file exceeds the 256 MiB transfer cap");

  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  Peer& peer = s.require_session(nickname);
  if (!peer.session) throw Error(Errc::usage, "no encrypted session with this buddy yet");
  FileKeys keys = derive_file_keys(peer.session->extra_key);
  FileMeta meta;
  meta.name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  s.rng.fill(meta.iv);
  EncryptedFile encrypted = encrypt_file(keys, meta.iv, content);
  meta.size = encrypted.ciphertext.size();
  std::string sid = new_stream_id(s.rng);
  OutgoingTransfer transfer{meta.name, chunk_stream(sid, meta, encrypted.ciphertext, encrypted.mac)};
  s.send_sealed(peer, Json{{"t", "ibb"}, {"frame", to_json(transfer.frames.front())}});
  peer.outgoing.emplace(sid, std::move(transfer));
  return sid;
}

void Engine::accept_file(const std::string& offer_id, const std::string& dest_path) {
  std::lock_guard lock(impl_->mu);
  Impl& s = *impl_;
  auto owner = s.offer_owner.find(offer_id);
  if (owner == s.offer_owner.end()) throw Error(Errc::usage, "no such file offer");
  Peer& peer = s.require_session(owner->second);
  auto it = peer.incoming.find(offer_id);
  if (it == peer.incoming.end()) throw Error(Errc::usage, "no such file offer");
  if (it->second.accepted) throw Error(Errc::usage, "offer already accepted");
  it->second.accepted = true;
  it->second.dest = dest_path;
  s.send_sealed(peer, Json{{"t", "ibb_accept"}, {"sid", offer_id}});
}

void Engine::verify_fingerprint(const std::string& nickname) {
  std::lock_guard lock(impl_->mu);
  Peer& peer = impl_->require_session(nickname);
  peer.auth = AuthStatus::fingerprint_verified;
}

void Engine::leave_room() {
  std::unique_ptr<RelayLink> link;
  {
    std::lock_guard lock(impl_->mu);
    Impl& s = *impl_;
    if (!s.link) return;
    s.send_stanza({{"type", "leave"}}, false);
    link = std::move(s.link);
    s.peers.clear();
    s.offer_owner.clear();
    s.group.reset();
    s.counters = GroupCounters{};
    s.room.clear();
    s.nick.clear();
  }
  // Give the writer a moment to flush the leave stanza.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  link.reset();
}

std::uint64_t Engine::subscribe(Listener listener) {
  std::lock_guard lock(impl_->ev_mu);
  std::uint64_t id = ++impl_->next_listener;
  impl_->listeners.emplace(id, std::move(listener));
  return id;
}

void Engine::unsubscribe(std::uint64_t id) {
  std::lock_guard lock(impl_->ev_mu);
  impl_->listeners.erase(id);
}

std::vector<EngineEvent> Engine::events(std::uint64_t from_index) const {
  std::lock_guard lock(impl_->ev_mu);
  if (from_index >= impl_->log.size()) return {};
  return std::vector<EngineEvent>(impl_->log.begin() + static_cast<std::ptrdiff_t>(from_index), impl_->log.end());
}

std::optional<EngineEvent> Engine::wait_event(const std::function<bool(const EngineEvent&)>& predicate,
                                              std::uint64_t from_index, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->ev_mu);
  auto deadline = Clock::now() + timeout;
  std::uint64_t scanned = from_index;
  for (;;) {
    for (; scanned < impl_->log.size(); ++scanned) {
      if (predicate(impl_->log[scanned])) return impl_->log[scanned];
    }
    if (impl_->ev_cv.wait_until(lock, deadline) == std::cv_status::timeout && scanned >= impl_->log.size()) {
      return std::nullopt;
    }
  }
}

void Engine::inject_inbound(std::string_view stanza) { impl_->on_stanza(std::string(stanza)); }

void Engine::set_inbound_tap(std::function<void(const std::string&)> tap) {
  std::lock_guard lock(impl_->mu);
  impl_->tap = std::move(tap);
}

}  // namespace whisker
