#include <functional>
#include <random>

#include "doctest.h"
#include "metachain/consensus.hpp"
#include "metachain/proofs.hpp"

using namespace metachain;

namespace {

Hash32 pair_hash(const Hash32& a, const Hash32& b) {
  Bytes buf(a.begin(), a.end());
  buf.insert(buf.end(), b.begin(), b.end());
  return sha256(buf);
}

// Full rebuild: pad every odd level by duplicating its last node.
Hash32 oracle_root(const std::vector<Bytes>& chunks) {
  std::vector<Hash32> level;
  for (const auto& c : chunks) level.push_back(sha256(c));
  while (level.size() > 1) {
    if (level.size() % 2) level.push_back(level.back());
    std::vector<Hash32> up;
    for (std::size_t i = 0; i < level.size(); i += 2) up.push_back(pair_hash(level[i], level[i + 1]));
    level = up;
  }
  return level.front();
}

Bytes data_of(std::size_t n, std::uint8_t salt = 0) {
  Bytes d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<std::uint8_t>(i * 31 + salt);
  return d;
}

}  // namespace

TEST_CASE("pos_commit") {
  const Bytes one = data_of(16);
  CHECK(pos_commit(one, 16).root == sha256(one));
  CHECK(pos_commit(one, 16).leaf_count == 1);

  const Bytes three = data_of(24);
  const Bytes c0(three.begin(), three.begin() + 8), c1(three.begin() + 8, three.begin() + 16),
      c2(three.begin() + 16, three.end());
  const Hash32 h2 = sha256(c2);
  const Hash32 hand = pair_hash(pair_hash(sha256(c0), sha256(c1)), pair_hash(h2, h2));
  const auto c = pos_commit(three, 8);
  CHECK(c.leaf_count == 3);
  CHECK(c.root == hand);

  try {
    pos_commit(Bytes{}, 8);
    FAIL("expected EmptyData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyData);
  }
  CHECK(split_chunks(data_of(17), 8).size() == 3);
}

TEST_CASE("merkle root matches full rebuild up to 64 leaves") {
  for (std::size_t leaves = 1; leaves <= 64; ++leaves) {
    const Bytes d = data_of(leaves * 4 - 1, static_cast<std::uint8_t>(leaves));
    REQUIRE(pos_commit(d, 4).root == oracle_root(split_chunks(d, 4)));
  }
}

TEST_CASE("pos_challenge") {
  const auto single = pos_commit(data_of(4), 4);
  CHECK(pos_challenge(single, Hash32{}, 1) == std::vector<std::uint64_t>{0});

  const auto eight = pos_commit(data_of(64), 8);
  const Hash32 seed = sha256(std::string_view("seed"));
  std::vector<std::uint64_t> expect;
  for (std::uint64_t ctr = 0; expect.size() < 3; ++ctr) {
    ByteWriter w;
    w.hash(seed).hash(eight.root).u64(ctr);
    const auto d = sha256(w.bytes());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    if (std::find(expect.begin(), expect.end(), v % 8) == expect.end()) expect.push_back(v % 8);
  }
  CHECK(pos_challenge(eight, seed, 3) == expect);
  CHECK(pos_challenge(eight, seed, 3) == pos_challenge(eight, seed, 3));
  CHECK(pos_challenge(eight, seed, 8).size() == 8);
  CHECK_THROWS_AS(pos_challenge(eight, seed, 9), Error);
}

TEST_CASE("pos_prove and verify") {
  const Bytes d = data_of(64);
  const auto c = pos_commit(d, 8);
  const std::vector<std::uint64_t> idx = {2, 5, 7};

  StoredData honest(d, 8);
  CHECK(pos_verify(c, idx, pos_prove(honest, idx)));

  StoredData flipped(d, 8);
  flipped.corrupt_chunk(5);
  CHECK_FALSE(pos_verify(c, idx, pos_prove(flipped, idx)));

  StoredData missing(d, 8);
  missing.drop_chunk(2);
  CHECK_FALSE(missing.has_chunk(2));
  CHECK_FALSE(pos_verify(c, idx, pos_prove(missing, idx)));
  CHECK(pos_verify(c, {5, 7}, pos_prove(missing, {5, 7})));

  StorageProof short_proof = pos_prove(honest, idx);
  short_proof.items.pop_back();
  try {
    pos_verify(c, idx, short_proof);
    FAIL("expected MalformedProof");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedProof);
  }
}

TEST_CASE("availability proofs") {
  AvailabilityChallenge ch;
  ch.seed = sha256(std::string_view("avail"));
  ch.difficulty = 0;
  ch.issued_height = 10;
  ch.deadline_height = 15;
  auto r = pow_avail_respond(ch, 100.0);
  CHECK(r.nonce == 0);
  CHECK(pow_avail_verify(ch, 0, r.respond_height));
  CHECK_FALSE(pow_avail_verify(ch, 0, 16));

  // 2^12 expected trials cannot fit into 5 blocks at 10 hashes per block
  ch.difficulty = 12;
  r = pow_avail_respond(ch, 10.0);
  const auto nonce = pow_mine(ch.seed, 12, 1u << 24);
  REQUIRE(nonce);
  CHECK(r.nonce == *nonce);
  CHECK(r.respond_height == ch.issued_height + static_cast<Height>(std::ceil((*nonce + 1) / 10.0)));
  if (*nonce + 1 > 50) CHECK_FALSE(pow_avail_verify(ch, r.nonce, r.respond_height));
  CHECK(pow_avail_verify(ch, r.nonce, ch.deadline_height));
  CHECK(pow_avail_respond(ch, 0.0).respond_height > ch.deadline_height);

  // chosen difficulty: one hit in rate*window trials with probability >= 0.99
  const int d = availability_difficulty(4096.0, 5);
  CHECK(1.0 - std::pow(1.0 - std::ldexp(1.0, -d), 4096.0 * 5) >= 0.99);
  CHECK(1.0 - std::pow(1.0 - std::ldexp(1.0, -(d + 1)), 4096.0 * 5) < 0.99);
}

TEST_CASE("audit_tick") {
  KeyRing keys(5);
  ContractState st = ContractState::genesis(keys, 3, 1000);
  GasMeter gas(1'000'000);
  const auto t = nfr_registration(st, 1, ResourceType::Disk, 2, gas);
  const Bytes d = data_of(80);
  ResourceProver p;
  p.storage.emplace(d, 8);
  p.commitment = pos_commit(d, 8, t);
  std::map<std::uint64_t, ResourceProver> provers{{t, p}};
  AuditConfig cfg;

  CHECK(audit_tick(st, 11, provers, cfg) == st);
  std::vector<AuditRecord> log;
  st = audit_tick(st, 10, provers, cfg, &log);
  CHECK(st.tokens.at(t).validity == Validity::Proven);
  REQUIRE(log.size() == 1);
  CHECK(log[0].kind == "PoS");
  CHECK(log[0].passed);

  for (std::uint64_t i = 0; i < 10; ++i) provers.at(t).storage->drop_chunk(i);
  st = audit_tick(st, 20, provers, cfg);
  CHECK(st.tokens.at(t).validity == Validity::Unrentable);
  try {
    nfr_rental(st, 2, t, 1, 2, 21, gas);
    FAIL("expected TokenUnproven");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TokenUnproven);
  }

  provers.at(t).storage.emplace(d, 8);
  st = audit_tick(st, 30, provers, cfg);
  CHECK(st.tokens.at(t).validity == Validity::Proven);

  SUBCASE("compute tokens answer PoW availability") {
    const auto cpu = nfr_registration(st, 2, ResourceType::CPU, 1, gas);
    ResourceProver idle;
    idle.hash_rate = cfg.idle_hash_rate;
    ResourceProver gone;
    std::map<std::uint64_t, ResourceProver> pv{{cpu, idle}};
    std::vector<AuditRecord> l2;
    st = audit_tick(st, 40, pv, cfg, &l2);
    CHECK(st.tokens.at(cpu).validity == Validity::Proven);
    CHECK(l2.at(0).kind == "PoW");
    pv[cpu] = gone;
    st = audit_tick(st, 50, pv, cfg);
    CHECK(st.tokens.at(cpu).validity == Validity::Unrentable);
  }
}
