#include <numeric>
#include <random>

#include "doctest.h"
#include "metachain/channels.hpp"
#include "metachain/contracts.hpp"
#include "metachain/proofs.hpp"
#include "metachain/scenario.hpp"

using namespace metachain;

namespace {

constexpr int kNodes = 5;

struct Econ {
  KeyRing keys{5};
  ContractState st = ContractState::genesis(keys, kNodes, 500);
  Height height = 1;
  std::uint64_t nonces = 0;
};

// One random call against the current state, through the direct entry points.
void random_call(Econ& w, std::mt19937_64& rng) {
  GasMeter gas(1'000'000);
  auto node = [&] { return static_cast<NodeId>(rng() % kNodes); };
  auto token = [&] { return static_cast<std::uint64_t>(1 + rng() % (w.st.next_token + 1)); };
  switch (rng() % 7) {
    case 0:
      nfr_registration(w.st, node(), static_cast<ResourceType>(rng() % 3), static_cast<Amount>(1 + rng() % 5), gas);
      break;
    case 1: {
      nfr_rental(w.st, node(), token(), static_cast<Height>(1 + rng() % 6), static_cast<Amount>(rng() % 40), w.height, gas);
      break;
    }
    case 2:
      nfr_liquidation(w.st, node(), token(), w.height, gas);
      break;
    case 3:
      nfr_cancellation(w.st, node(), token(), gas);
      break;
    case 4: {
      std::vector<NodeId> g = {node(), node()};
      std::sort(g.begin(), g.end());
      std::map<NodeId, Amount> dep;
      for (NodeId n : g) dep[n] = static_cast<Amount>(rng() % 30);
      const Hash32 nonce = sha256(std::to_string(w.nonces++));
      std::map<NodeId, Signature> sigs;
      for (NodeId n : g) sigs[n] = w.keys.keys(n).sign(otmc_open_message(g, 5, dep, nonce));
      std::vector<RentalRequest> rentals;
      if (rng() % 2) rentals.push_back({g[0], token(), 2, static_cast<Amount>(rng() % 20)});
      otmc_open(w.st, g, 5, dep, rentals, sigs, nonce, w.height, gas);
      break;
    }
    case 5: {
      if (w.st.clusters.empty()) throw Error(Errc::UnknownCluster);
      auto it = std::next(w.st.clusters.begin(), static_cast<long>(rng() % w.st.clusters.size()));
      otmc_run(w.st, it->first, gas);
      break;
    }
    default: {
      if (w.st.clusters.empty()) throw Error(Errc::UnknownCluster);
      auto it = std::next(w.st.clusters.begin(), static_cast<long>(rng() % w.st.clusters.size()));
      const Hash32 cid = it->first;
      if (rng() % 2) {
        otmc_close(w.st, cid, std::nullopt, {}, w.height, gas);
      } else {
        const Hash32 res = sha256(std::string_view("r"));
        std::map<NodeId, Signature> sigs;
        for (NodeId n : it->second.members) sigs[n] = w.keys.keys(n).sign(otmc_result_message(cid, res));
        otmc_close(w.st, cid, res, sigs, w.height, gas);
      }
    }
  }
}

}  // namespace

TEST_CASE("value is conserved and failed calls change nothing") {
  std::mt19937_64 rng(2024);
  Econ w;
  const Amount total = w.st.total_value();
  int ok = 0, failed = 0;
  for (int step = 0; step < 10'000; ++step) {
    if (rng() % 3 == 0) ++w.height;
    // stands in for a passing audit
    if (auto it = w.st.tokens.find(1 + rng() % w.st.next_token); it != w.st.tokens.end() && rng() % 2)
      it->second.validity = Validity::Proven;
    const ContractState before = w.st;
    try {
      random_call(w, rng);
      ++ok;
    } catch (const Error&) {
      REQUIRE(w.st == before);
      ++failed;
    }
    REQUIRE(w.st.total_value() == total);
    for (const auto& [n, b] : w.st.balances) REQUIRE(b >= 0);
  }
  CHECK(ok > 1000);
  CHECK(failed > 1000);
}

TEST_CASE("rentals are exclusive and need a proven token") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    Econ w;
    GasMeter gas(1'000'000);
    const auto t = nfr_registration(w.st, 0, ResourceType::Disk, 1, gas);
    const auto v = static_cast<Validity>(rng() % 3);
    w.st.tokens.at(t).validity = v;
    const ContractState before = w.st;
    try {
      nfr_rental(w.st, 1, t, 3, 10, 1, gas);
      REQUIRE(v == Validity::Proven);
    } catch (const Error& e) {
      REQUIRE(v != Validity::Proven);
      REQUIRE(e.code() == Errc::TokenUnproven);
      REQUIRE(w.st == before);
      continue;
    }
    const auto held = w.st.tokens.at(t).rental;
    for (int i = 0; i < 5; ++i) {
      const NodeId other = static_cast<NodeId>(2 + rng() % 3);
      const ContractState mid = w.st;
      try {
        nfr_rental(w.st, other, t, 2, 10, 2, gas);
        FAIL("second rental accepted");
      } catch (const Error&) {
        REQUIRE(w.st == mid);
      }
    }
    REQUIRE(w.st.tokens.at(t).rental == held);
  }
}

TEST_CASE("otmc stage only moves forward one step at a time") {
  // 0 run, 1 cooperative close, 2 forced close before deadline, 3 forced close after
  constexpr int kOps = 4;
  int sequences = 0;
  for (int len = 1; len <= 6; ++len) {
    int total = 1;
    for (int i = 0; i < len; ++i) total *= kOps;
    for (int code = 0; code < total; ++code) {
      Econ w;
      GasMeter gas(10'000'000);
      const std::vector<NodeId> g = {1, 2};
      const std::map<NodeId, Amount> dep = {{1, 5}, {2, 5}};
      const Hash32 nonce{};
      std::map<NodeId, Signature> sigs;
      for (NodeId n : g) sigs[n] = w.keys.keys(n).sign(otmc_open_message(g, 10, dep, nonce));
      const Hash32 cid = otmc_open(w.st, g, 10, dep, {}, sigs, nonce, 100, gas);
      const Amount total_value = w.st.total_value();
      int c = code;
      for (int i = 0; i < len; ++i, c /= kOps) {
        const auto stage = static_cast<int>(w.st.clusters.at(cid).stage);
        try {
          switch (c % kOps) {
            case 0: otmc_run(w.st, cid, gas); break;
            case 1: {
              const Hash32 res = sha256(std::string_view("res"));
              std::map<NodeId, Signature> rs;
              for (NodeId n : g) rs[n] = w.keys.keys(n).sign(otmc_result_message(cid, res));
              otmc_close(w.st, cid, res, rs, 105, gas);
              break;
            }
            case 2: otmc_close(w.st, cid, std::nullopt, {}, 105, gas); break;
            default: otmc_close(w.st, cid, std::nullopt, {}, 111, gas);
          }
        } catch (const Error&) {
        }
        const auto next = static_cast<int>(w.st.clusters.at(cid).stage);
        REQUIRE(next >= stage);
        REQUIRE(next - stage <= 1);
        REQUIRE(w.st.total_value() == total_value);
      }
      ++sequences;
    }
  }
  CHECK(sequences == 4 + 16 + 64 + 256 + 1024 + 4096);
}

TEST_CASE("channels conserve value and punish stale closes") {
  std::mt19937_64 rng(99);
  KeyRing ring(31);
  const KeyPair& a = ring.keys(1);
  const KeyPair& b = ring.keys(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Amount da = 1 + static_cast<Amount>(rng() % 50), db = 1 + static_cast<Amount>(rng() % 50);
    const Bytes m = open_message(1, 2, da, db, static_cast<std::uint64_t>(trial));
    ChannelState s = ch_open(1, 2, a.pub, b.pub, da, db, a.sign(m), b.sign(m), static_cast<std::uint64_t>(trial));
    std::vector<Certificate> certs;
    const int moves = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < moves; ++i) {
      const auto dir = rng() % 2 ? Direction::AtoB : Direction::BtoA;
      try {
        certs.push_back(ch_transfer(s, static_cast<Amount>(rng() % 30), dir, i, a, b));
      } catch (const Error& e) {
        REQUIRE(e.code() == Errc::InsufficientBalance);
      }
      REQUIRE(s.balances[0] + s.balances[1] == da + db);
      REQUIRE(s.balances[0] >= 0);
      REQUIRE(s.balances[1] >= 0);
    }
    if (certs.empty()) continue;
    // the cheater closes on whichever certificate suits them best
    const std::size_t stale = rng() % certs.size();
    const Height at = 100;
    ChannelState c = ch_close(s, certs[stale], 1, at);
    if (stale + 1 < certs.size()) c = ch_appeal(c, certs.back(), at + rng() % (kDisputeWindow + 1));
    c = ch_finalize(c, at + kDisputeWindow + 1);
    const auto pay = ch_payouts(c);
    REQUIRE(pay == certs.back().balances);
    REQUIRE(pay[0] + pay[1] == da + db);
  }
}

TEST_CASE("storage proofs catch a missing fraction at the expected rate") {
  const std::size_t chunks = 200, k = 5;
  Bytes data(chunks * 8);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 13);
  const auto c = pos_commit(data, 8);
  for (double f : {0.1, 0.3, 0.5}) {
    StoredData lossy(data, 8);
    std::mt19937_64 rng(static_cast<std::uint64_t>(f * 100));
    std::vector<std::uint64_t> idx(chunks);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < static_cast<std::size_t>(f * chunks); ++i) lossy.drop_chunk(idx[i]);
    StoredData honest(data, 8);

    int passed = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
      const auto ch = pos_challenge(c, sha256(std::to_string(t)), k);
      REQUIRE(pos_verify(c, ch, pos_prove(honest, ch)));
      if (pos_verify(c, ch, pos_prove(lossy, ch))) ++passed;
    }
    CAPTURE(f);
    CHECK(std::abs(static_cast<double>(passed) / trials - std::pow(1.0 - f, static_cast<double>(k))) < 0.05);
  }
}

TEST_CASE("same seed gives byte-identical metrics") {
  const auto cfg = parse_scenario(R"({
    "seeds": [3], "network": {"nodes": [4, 8], "hwClass": ["Large"], "faultRatio": [0, 0.25]},
    "engine": {"kinds": ["PoW", "PoA", "TDPoS"]}, "workload": {"txCount": 300}, "durationTicks": 40000
  })");
  const auto a = metrics_csv(sweep(grid_points(cfg)));
  const auto b = metrics_csv(sweep(grid_points(cfg)));
  CHECK(a == b);
  auto other = cfg;
  other.seeds = {4};
  CHECK(metrics_csv(sweep(grid_points(other))) != a);

  ContractScript s;
  s.repeat = 10;
  s.functions = default_contract_functions();
  CHECK(contracts_csv(run_contracts_bench(s, 9)) == contracts_csv(run_contracts_bench(s, 9)));
}
