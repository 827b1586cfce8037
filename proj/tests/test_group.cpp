#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "whisker/errors.hpp"
#include "whisker/group.hpp"

using namespace whisker;

namespace {

struct Room {
  std::vector<GroupIdentity> members;
  std::vector<GroupCounters> counters;

  RosterEntry entry(std::size_t i) const { return RosterEntry{members[i].dh_public, members[i].dsa.public_key()}; }

  Roster roster_for(std::size_t i) const {
    Roster r;
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (j != i) r.emplace(members[j].nickname, entry(j));
    }
    return r;
  }
};

Room make_room(std::size_t n, std::uint8_t seed) {
  auto rng = testkit::seeded(seed);
  Room room;
  for (std::size_t i = 0; i < n; ++i) {
    room.members.push_back(make_group_identity(testkit::keypair(i), "member" + std::to_string(i), rng));
  }
  room.counters.resize(n);
  return room;
}

Errc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::usage;
}

void resign(GroupMessage& msg, const GroupIdentity& signer, RandomSource& rng) {
  msg.sig = dsa_sign(signer.dsa, dsa_digest(canonical_encoding(msg)), rng);
}

}  // namespace

TEST(Pairwise, SymmetricAndDistinct) {
  Room room = make_room(4, 1);
  std::set<std::string> keys;
  for (std::size_t i = 1; i < 4; ++i) {
    PairwiseKeys ab = pairwise_key(room.members[0], room.members[i].dh_public);
    PairwiseKeys ba = pairwise_key(room.members[i], room.members[0].dh_public);
    EXPECT_EQ(ab, ba);
    keys.insert(to_hex(ab.enc));
  }
  EXPECT_EQ(keys.size(), 3u);
  EXPECT_THROW(pairwise_key(room.members[0], 1), Error);
  EXPECT_EQ(error_of([&] { pairwise_key(room.members[0], 1); }), Errc::protocol);
}

TEST(Pairwise, MatchesSha512Oracle) {
  Room room = make_room(2, 2);
  BigInt shared = powm(room.members[1].dh_public, room.members[0].dh_private, DhGroup::prime());
  auto expected = testkit::sodium_sha512(encode_dh(shared));
  PairwiseKeys k = pairwise_key(room.members[0], room.members[1].dh_public);
  EXPECT_TRUE(std::equal(k.enc.begin(), k.enc.end(), expected.begin()));
  EXPECT_TRUE(std::equal(k.mac.begin(), k.mac.end(), expected.begin() + 32));
}

TEST(GroupSeal, SmallestRoom) {
  Room room = make_room(2, 3);
  auto rng = testkit::seeded(3);
  Roster r = room.roster_for(0);
  GroupMessage msg = group_seal(room.members[0], r, to_bytes("hi"), room.counters[0], rng);
  EXPECT_EQ(msg.wrapped_keys.size(), 1u);
  EXPECT_EQ(to_string(group_open(room.members[1], room.entry(0), msg, room.counters[1])), "hi");
  EXPECT_THROW(group_seal(room.members[0], Roster{}, to_bytes("x"), room.counters[0], rng), Error);
}

TEST(GroupSeal, EveryRecipientDecrypts) {
  Room room = make_room(4, 4);
  auto rng = testkit::seeded(4);
  for (std::size_t sender = 0; sender < 4; ++sender) {
    Bytes pt = rng.random_bytes(100 + sender);
    GroupMessage msg = group_seal(room.members[sender], room.roster_for(sender), pt, room.counters[sender], rng);
    for (std::size_t r = 0; r < 4; ++r) {
      if (r == sender) continue;
      EXPECT_EQ(group_open(room.members[r], room.entry(sender), msg, room.counters[r]), pt);
    }
  }
}

TEST(GroupOpen, MissingEntryIsNoKey) {
  Room room = make_room(3, 5);
  auto rng = testkit::seeded(5);
  Roster only_one;
  only_one.emplace(room.members[1].nickname, room.entry(1));
  GroupMessage msg = group_seal(room.members[0], only_one, to_bytes("secret"), room.counters[0], rng);
  EXPECT_EQ(error_of([&] { group_open(room.members[2], room.entry(0), msg, room.counters[2]); }), Errc::no_key);
}

TEST(GroupOpen, TamperedTagSignedBySender) {
  Room room = make_room(3, 6);
  auto rng = testkit::seeded(6);
  for (int i = 0; i < 20; ++i) {
    GroupMessage msg = group_seal(room.members[0], room.roster_for(0), to_bytes("m"), room.counters[0], rng);
    auto& entry = msg.wrapped_keys.at(room.members[1].nickname);
    entry.tag[static_cast<std::size_t>(i) % 32] ^= static_cast<std::uint8_t>(1u << (i % 8));
    // Unsigned change: the signature covers the entry.
    EXPECT_EQ(error_of([&] { group_open(room.members[1], room.entry(0), msg, room.counters[1]); }),
              Errc::authentication);
    // An insider re-signing an inconsistent entry still fails the tag.
    resign(msg, room.members[0], rng);
    EXPECT_EQ(error_of([&] { group_open(room.members[1], room.entry(0), msg, room.counters[1]); }), Errc::forgery);
    // Member 2's entry is untouched and still opens.
    EXPECT_EQ(to_string(group_open(room.members[2], room.entry(0), msg, room.counters[2])), "m");
  }
}

TEST(GroupOpen, ImpersonationAndReplay) {
  Room room = make_room(3, 7);
  auto rng = testkit::seeded(7);
  GroupMessage msg = group_seal(room.members[0], room.roster_for(0), to_bytes("a"), room.counters[0], rng);
  // Signed by member 0 but presented as member 2's message.
  EXPECT_EQ(error_of([&] { group_open(room.members[1], room.entry(2), msg, room.counters[1]); }),
            Errc::authentication);
  EXPECT_EQ(to_string(group_open(room.members[1], room.entry(0), msg, room.counters[1])), "a");
  EXPECT_EQ(error_of([&] { group_open(room.members[1], room.entry(0), msg, room.counters[1]); }), Errc::replay);
  GroupMessage msg2 = group_seal(room.members[0], room.roster_for(0), to_bytes("b"), room.counters[0], rng);
  EXPECT_EQ(msg2.counter, msg.counter + 1);
  EXPECT_EQ(to_string(group_open(room.members[1], room.entry(0), msg2, room.counters[1])), "b");
}

TEST(GroupOpen, NonMemberCannotRead) {
  Room room = make_room(3, 8);
  auto rng = testkit::seeded(8);
  GroupIdentity outsider = make_group_identity(testkit::keypair(5), "outsider", rng);
  GroupCounters oc;
  for (int i = 0; i < 20; ++i) {
    GroupMessage msg = group_seal(room.members[0], room.roster_for(0), to_bytes("private"), room.counters[0], rng);
    EXPECT_EQ(error_of([&] { group_open(outsider, room.entry(0), msg, oc); }), Errc::no_key);
    // Renaming a captured entry does not help: the tag binds the pairwise key.
    GroupMessage stolen = msg;
    stolen.wrapped_keys.emplace("outsider", stolen.wrapped_keys.begin()->second);
    EXPECT_EQ(error_of([&] { group_open(outsider, room.entry(0), stolen, oc); }), Errc::authentication);
  }
}

TEST(Transcript, ConsistencyCheck) {
  Room room = make_room(3, 9);
  auto rng = testkit::seeded(9);
  std::vector<GroupMessage> log;
  for (int i = 0; i < 5; ++i) {
    log.push_back(group_seal(room.members[0], room.roster_for(0), to_bytes(std::to_string(i)), room.counters[0], rng));
  }
  std::vector<std::vector<GroupMessage>> logs{log, log, log};
  EXPECT_TRUE(transcript_consistency_check(logs));
  logs[1].erase(logs[1].begin() + 2);
  EXPECT_FALSE(transcript_consistency_check(logs));
  logs[1] = log;
  std::swap(logs[2][0], logs[2][1]);
  EXPECT_FALSE(transcript_consistency_check(logs));
}

TEST(WrappedKeyTest, Encoding) {
  WrappedKey k;
  k.wrap_iv.fill(1);
  k.wrapped.fill(2);
  k.tag.fill(3);
  Bytes enc = k.encode();
  EXPECT_EQ(enc.size(), 80u);
  WrappedKey back = WrappedKey::decode(enc);
  EXPECT_EQ(back.encode(), enc);
  enc.pop_back();
  EXPECT_THROW(WrappedKey::decode(enc), Error);
}
