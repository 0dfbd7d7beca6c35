#include <functional>

#include "doctest.h"
#include "metachain/contracts.hpp"

using namespace metachain;
using nlohmann::json;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Truncated;
}

struct Fixture {
  KeyRing keys{77};
  ContractState st = ContractState::genesis(keys, 4, 1000);
  GasMeter gas{1'000'000};

  std::uint64_t proven_token(NodeId owner, Amount price) {
    const auto t = nfr_registration(st, owner, ResourceType::Disk, price, gas);
    st.tokens.at(t).validity = Validity::Proven;
    return t;
  }

  std::map<NodeId, Signature> sign_all(const std::vector<NodeId>& who, const Bytes& msg) {
    std::map<NodeId, Signature> out;
    for (NodeId n : who) out[n] = keys.keys(n).sign(msg);
    return out;
  }
};

}  // namespace

TEST_CASE("execute_call metering") {
  Fixture f;
  ContractCall c;
  c.contract = ContractKind::NFR;
  c.function = "noop";
  auto out = execute_call(f.st, c, 1);
  CHECK(out.result.ok());
  CHECK(out.result.gas_used == 50);

  c.function = "registration";
  c.args = {{"price", 10}, {"resourceType", "Disk"}};
  c.caller = 1;
  out = execute_call(f.st, c, 1);
  REQUIRE(out.result.ok());
  // base + two writes (record, counter)
  CHECK(out.result.gas_used == GasSchedule::kBase + 2 * GasSchedule::kWrite);
  CHECK(out.result.value == 1);
  const auto again = execute_call(f.st, c, 1);
  CHECK(again.result.gas_used == out.result.gas_used);
  CHECK(again.state == out.state);

  c.gas_limit = 10;
  out = execute_call(f.st, c, 1);
  CHECK(out.result.error == Errc::OutOfGas);
  CHECK(out.result.gas_used == 10);
  CHECK(out.state == f.st);

  c.gas_limit = 100'000;
  c.function = "bogus";
  CHECK(execute_call(f.st, c, 1).result.error == Errc::UnknownFunction);
}

TEST_CASE("ledger conversion votes") {
  LedgerConversionState st;
  GasMeter gas(1'000'000);
  st.threshold = 5;
  lc_propose(st, ConversionDirection::ChainToDag, 20, "TDPoS", 3, gas);
  lc_vote(st, 1, gas);
  lc_vote(st, 2, gas);
  lc_vote(st, 3, gas);
  CHECK(st.vote_count == 3);
  CHECK_FALSE(st.pending.has_value());
  CHECK(code_of([&] { lc_vote(st, 1, gas); }) == Errc::AlreadyVoted);
  CHECK(st.vote_count == 3);
  lc_vote(st, 4, gas);
  lc_vote(st, 5, gas);
  REQUIRE(st.pending.has_value());
  CHECK(st.pending->convert_height == 20);
  CHECK(st.pending->consensus_name == "TDPoS");

  LedgerConversionState fresh;
  fresh.threshold = 2;
  CHECK(code_of([&] { lc_convert(fresh, ConversionDirection::ChainToDag, 20, "TDPoS", 3, gas); }) ==
        Errc::ThresholdNotMet);
  lc_vote(fresh, 1, gas);
  lc_vote(fresh, 2, gas);
  CHECK(code_of([&] { lc_convert(fresh, ConversionDirection::ChainToDag, 3, "TDPoS", 3, gas); }) ==
        Errc::HeightInPast);
  lc_convert(fresh, ConversionDirection::ChainToDag, 20, "TDPoS", 3, gas);
  CHECK(fresh.pending == PendingConversion{ConversionDirection::ChainToDag, 20, "TDPoS"});
}

TEST_CASE("nfr registration and rental") {
  Fixture f;
  const auto t1 = nfr_registration(f.st, 1, ResourceType::Disk, 10, f.gas);
  CHECK(t1 == 1);
  CHECK(f.st.tokens.at(1).validity == Validity::Unproven);
  CHECK(nfr_registration(f.st, 1, ResourceType::CPU, 3, f.gas) == 2);
  CHECK(code_of([&] { nfr_registration(f.st, 1, ResourceType::GPU, 0, f.gas); }) == Errc::ZeroPrice);

  CHECK(code_of([&] { nfr_rental(f.st, 2, t1, 5, 50, 10, f.gas); }) == Errc::TokenUnproven);
  f.st.tokens.at(t1).validity = Validity::Proven;
  CHECK(code_of([&] { nfr_rental(f.st, 2, t1, 5, 49, 10, f.gas); }) == Errc::InsufficientDeposit);
  CHECK(code_of([&] { nfr_rental(f.st, 2, 99, 5, 50, 10, f.gas); }) == Errc::UnknownToken);
  nfr_rental(f.st, 2, t1, 5, 50, 10, f.gas);
  CHECK(f.st.balances.at(2) == 950);
  CHECK(f.st.tokens.at(t1).rental->start_height == 10);
  CHECK(code_of([&] { nfr_rental(f.st, 3, t1, 5, 50, 10, f.gas); }) == Errc::AlreadyRented);
}

TEST_CASE("nfr liquidation") {
  SUBCASE("on time: price x used, remainder back") {
    Fixture f;
    const auto t = f.proven_token(1, 10);
    nfr_rental(f.st, 2, t, 5, 50, 10, f.gas);
    CHECK(code_of([&] { nfr_liquidation(f.st, 3, t, 12, f.gas); }) == Errc::NotRenterBeforeTimeout);
    const auto [owner, renter] = nfr_liquidation(f.st, 2, t, 13, f.gas);
    CHECK(owner == 10 * 3);
    CHECK(renter == 50 - 10 * 3);
    CHECK(f.st.balances.at(1) == 1030);
    CHECK(f.st.balances.at(2) == 970);
    CHECK_FALSE(f.st.tokens.at(t).rental.has_value());
    CHECK(code_of([&] { nfr_liquidation(f.st, 2, t, 14, f.gas); }) == Errc::NoActiveRental);
  }
  SUBCASE("timeout: deposit forfeited, token retracted") {
    Fixture f;
    const auto t = f.proven_token(1, 10);
    nfr_rental(f.st, 2, t, 5, 50, 10, f.gas);
    const auto [owner, renter] = nfr_liquidation(f.st, 3, t, 16, f.gas);
    CHECK(owner == 50);
    CHECK(renter == 0);
    CHECK(f.st.balances.at(1) == 1050);
    CHECK(f.st.balances.at(2) == 950);
    CHECK(f.st.tokens.at(t).cancelled);
    CHECK(code_of([&] { nfr_rental(f.st, 2, t, 5, 50, 17, f.gas); }) == Errc::UnknownToken);
  }
}

TEST_CASE("nfr cancellation") {
  Fixture f;
  const auto t = f.proven_token(1, 10);
  CHECK(code_of([&] { nfr_cancellation(f.st, 2, t, f.gas); }) == Errc::NotOwner);
  nfr_rental(f.st, 2, t, 5, 50, 10, f.gas);
  CHECK(code_of([&] { nfr_cancellation(f.st, 1, t, f.gas); }) == Errc::ActiveRentalExists);
  nfr_liquidation(f.st, 2, t, 11, f.gas);
  nfr_cancellation(f.st, 1, t, f.gas);
  CHECK(code_of([&] { nfr_rental(f.st, 2, t, 5, 50, 12, f.gas); }) == Errc::UnknownToken);
}

TEST_CASE("otmc lifecycle") {
  Fixture f;
  const std::vector<NodeId> g = {1, 2};
  const std::map<NodeId, Amount> dep = {{1, 5}, {2, 5}};
  const Hash32 nonce = sha256(std::string_view("n1"));
  const auto sigs = f.sign_all(g, otmc_open_message(g, 10, dep, nonce));

  CHECK(code_of([&] { otmc_open(f.st, {1}, 10, dep, {}, sigs, nonce, 100, f.gas); }) == Errc::TooFewParticipants);
  CHECK(code_of([&] { otmc_open(f.st, g, 10, {{1, 5}, {2, 0}}, {}, sigs, nonce, 100, f.gas); }) == Errc::ZeroDeposit);

  SUBCASE("embedded rental failure reverts the whole open") {
    const auto t = f.proven_token(3, 1);
    nfr_rental(f.st, 0, t, 5, 5, 100, f.gas);
    const ContractState before = f.st;
    CHECK(code_of([&] { otmc_open(f.st, g, 10, dep, {{1, t, 2, 2}}, sigs, nonce, 100, f.gas); }) ==
          Errc::RentalFailed);
    CHECK(f.st == before);
  }

  SUBCASE("cooperative close") {
    const auto t = f.proven_token(3, 2);
    const Hash32 cid = otmc_open(f.st, g, 10, dep, {{1, t, 4, 8}}, sigs, nonce, 100, f.gas);
    const OtmcState& c = f.st.clusters.at(cid);
    CHECK(c.stage == OtmcStage::Open);
    CHECK(c.deadline_height == 110);
    CHECK(f.st.balances.at(1) == 1000 - 5 - 8);
    CHECK(f.st.balances.at(2) == 995);

    CHECK(code_of([&] { otmc_close(f.st, cid, Hash32{}, {}, 101, f.gas); }) == Errc::WrongState);
    otmc_run(f.st, cid, f.gas);
    CHECK(code_of([&] { otmc_run(f.st, cid, f.gas); }) == Errc::WrongState);

    const Hash32 res = sha256(std::string_view("r"));
    auto one = f.sign_all({1}, otmc_result_message(cid, res));
    CHECK(code_of([&] { otmc_close(f.st, cid, res, one, 103, f.gas); }) == Errc::MissingSignature);
    const Amount total = f.st.total_value();
    otmc_close(f.st, cid, res, f.sign_all(g, otmc_result_message(cid, res)), 103, f.gas);
    CHECK(f.st.clusters.at(cid).stage == OtmcStage::Close);
    CHECK(f.st.clusters.at(cid).results == std::optional<Hash32>(res));
    // 3 blocks at price 2 go to the owner; the rest of the 8 comes back
    CHECK(f.st.balances.at(1) == 1000 - 6);
    CHECK(f.st.balances.at(2) == 1000);
    CHECK(f.st.balances.at(3) == 1006);
    CHECK(f.st.total_value() == total);
    CHECK(code_of([&] { otmc_run(f.st, cid, f.gas); }) == Errc::WrongState);
  }

  SUBCASE("forced close after the deadline slashes") {
    const Hash32 cid = otmc_open(f.st, g, 10, dep, {}, sigs, nonce, 100, f.gas);
    otmc_run(f.st, cid, f.gas);
    otmc_close(f.st, cid, std::nullopt, {}, 111, f.gas);
    CHECK(f.st.clusters.at(cid).stage == OtmcStage::Close);
    CHECK_FALSE(f.st.clusters.at(cid).results.has_value());
    CHECK(f.st.burned == 10);
    CHECK(f.st.total_value() == 4000);
  }
}

TEST_CASE("trace entries") {
  ContractCall c;
  c.contract = ContractKind::OTMC;
  c.function = "run";
  CallResult r;
  r.gas_used = 75;
  const auto j = trace_json(trace_entry(c, r, 7));
  CHECK(j["contract"] == "OTMC");
  CHECK(j["result"] == "ok");
  CHECK(j["gas_used"] == 75);
}
