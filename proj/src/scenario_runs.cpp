#include <cmath>
#include <sstream>

#include "metachain/scenario.hpp"

namespace metachain {

using nlohmann::json;

std::vector<std::string> default_contract_functions() {
  return {"NFR.registration", "NFR.rental",    "NFR.liquidation", "NFR.cancellation",
          "OTMC.open",        "OTMC.run",      "OTMC.close",      "LedgerConversion.vote"};
}

namespace {

struct Stat {
  std::int64_t latency = 0;
  std::uint64_t gas = 0;
  int count = 0;
};

json sig_map(KeyRing& keys, const std::vector<NodeId>& who, ByteView msg) {
  json out = json::object();
  for (NodeId n : who) out[std::to_string(n)] = to_hex(ByteView(keys.keys(n).sign(msg)));
  return out;
}

}  // namespace

std::vector<ContractBenchRow> run_contracts_bench(const ContractScript& script, std::uint64_t seed) {
  const auto known = default_contract_functions();
  for (const auto& f : script.functions)
    if (std::find(known.begin(), known.end(), f) == known.end()) throw Error(Errc::UnknownFunction, f);

  KeyRing keys(sub_seed(seed, "contract-keys"));
  const ContractState base = ContractState::genesis(keys, 8, 1'000'000);
  std::mt19937_64 rng(sub_seed(seed, "contract-bench"));
  std::map<std::string, Stat> stats;

  for (int rep = 0; rep < script.repeat; ++rep) {
    ContractState st = base;
    Height h = 100;
    auto call = [&](ContractKind kind, const char* fn, NodeId caller, json args, Amount value = 0,
                    Hash32 txid = {}) -> json {
      ContractCall c;
      c.contract = kind;
      c.function = fn;
      c.caller = caller;
      c.args = std::move(args);
      c.value = value;
      c.txid = txid;
      auto out = execute_call(st, c, h);
      if (!out.result.ok())
        throw std::logic_error(std::string("bench call ") + fn + " failed: " + out.result.reason);
      st = std::move(out.state);
      const std::string name = std::string(contract_name(kind)) + "." + fn;
      // Submitted at a random offset inside a block interval; runs when the
      // next block is produced.
      const auto offset = static_cast<Tick>(uniform_below(rng, static_cast<std::uint64_t>(script.block_interval)));
      auto& s = stats[name];
      s.latency += (script.block_interval - offset) +
                   static_cast<Tick>(std::ceil(static_cast<double>(out.result.gas_used) / script.gas_per_tick));
      s.gas += out.result.gas_used;
      ++s.count;
      ++h;
      return out.result.value;
    };

    const auto token = call(ContractKind::NFR, "registration", 1, {{"price", 2}, {"resourceType", "Disk"}})
                           .get<std::uint64_t>();
    st.tokens.at(token).validity = Validity::Proven;  // audited
    call(ContractKind::NFR, "rental", 2, {{"tokenID", token}, {"rentBlocks", 5}}, 20);
    call(ContractKind::NFR, "liquidation", 2, {{"tokenID", token}});
    call(ContractKind::NFR, "cancellation", 1, {{"tokenID", token}});

    call(ContractKind::LedgerConversion, "propose", 3,
         {{"consensus", "PoA"}, {"convertHeight", h + 50}, {"direction", "ChainToDag"}});
    call(ContractKind::LedgerConversion, "vote", 3, json::object());

    ByteWriter nw;
    nw.str("bench-otmc").u64(seed).u64(static_cast<std::uint64_t>(rep));
    const Hash32 nonce = sha256(nw.bytes());
    const std::vector<NodeId> members = {1, 2};
    const std::map<NodeId, Amount> deposits = {{1, 5}, {2, 5}};
    const Height delta = 10;
    const Bytes open_msg = otmc_open_message(members, delta, deposits, nonce);
    json dep = json::object();
    for (auto [n, a] : deposits) dep[std::to_string(n)] = a;
    const std::string cid = call(ContractKind::OTMC, "open", 1,
                                 {{"participants", members},
                                  {"deltaBlocks", delta},
                                  {"deposits", dep},
                                  {"rentals", json::array()},
                                  {"signatures", sig_map(keys, members, open_msg)}},
                                 0, nonce)
                                .get<std::string>();
    call(ContractKind::OTMC, "run", 1, {{"cid", cid}});
    ByteWriter rw;
    rw.str("bench-result").u64(static_cast<std::uint64_t>(rep));
    const Hash32 results = sha256(rw.bytes());
    call(ContractKind::OTMC, "close", 1,
         {{"cid", cid},
          {"results", to_hex(results)},
          {"signatures", sig_map(keys, members, otmc_result_message(hash_from_hex(cid), results))}});
  }

  std::vector<ContractBenchRow> rows;
  for (const auto& f : script.functions) {
    const auto& s = stats.at(f);
    const auto dot = f.find('.');
    rows.push_back({f.substr(0, dot), f.substr(dot + 1), s.count,
                    static_cast<double>(s.latency) / s.count, s.gas / static_cast<std::uint64_t>(s.count)});
  }
  return rows;
}

std::string contracts_csv(const std::vector<ContractBenchRow>& rows) {
  std::ostringstream out;
  out << kContractsCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.contract << ',' << r.function << ',' << r.count << ',' << format_metric(r.mean_latency_ticks) << ','
        << r.gas_used << '\n';
  return out.str();
}

namespace {

Block demo_block(const Hash32& parent, Height height, NodeId proposer, Tick tick, KeyRing& keys, std::uint64_t salt) {
  Block b;
  b.height = height;
  b.parents = {parent};
  b.proposer = proposer;
  b.tick = tick;
  ByteWriter w;
  w.str("demo").u64(salt).i64(height).u32(proposer);
  b.txs.push_back(Transaction::make(keys.keys(proposer), proposer, w.bytes(), static_cast<std::uint64_t>(height)));
  b.seal();
  return b;
}

std::vector<Bytes> committed_bytes(const LedgerView& l) {
  std::vector<Bytes> out;
  for (const auto& h : l.committed()) {
    const Block& b = l.at(h);
    Bytes bytes = b.header_bytes();
    bytes.insert(bytes.end(), b.blockhash.begin(), b.blockhash.end());
    out.push_back(std::move(bytes));
  }
  return out;
}

}  // namespace

ConvertDemo convert_demo(int blocks, std::uint64_t seed) {
  if (blocks < 4) throw Error(Errc::InvalidParams, "convert demo needs at least 4 blocks");
  KeyRing keys(sub_seed(seed, "demo-keys"));
  ConvertDemo d;
  LedgerView chain;
  Hash32 tip = chain.genesis().blockhash;
  const Height committed = blocks / 3;
  for (Height h = 1; h <= blocks; ++h) {
    Block b = demo_block(tip, h, static_cast<NodeId>(h % 4), h * 50, keys, seed);
    chain.append(b);
    tip = b.blockhash;
    if (h == committed) chain.commit_through(tip);
  }
  d.convert_height = committed + 2;
  d.back_height = blocks + 1;
  d.dag = chain_to_dag(chain, d.convert_height, derive_beacon_seed(chain, d.convert_height));
  d.restored = dag_to_chain(d.dag, d.back_height);
  d.original = chain;
  d.original.commit_through(tip);
  d.identical = committed_bytes(d.original) == committed_bytes(d.restored);
  return d;
}

ForkDemo fork_demo(std::uint64_t seed) {
  KeyRing keys(sub_seed(seed, "demo-keys"));
  ForkDemo d;
  LedgerView l;
  const Block b1 = demo_block(l.genesis().blockhash, 1, 0, 50, keys, seed);
  l.append(b1);
  const Block b2 = demo_block(b1.blockhash, 2, 1, 100, keys, seed);
  l.append(b2);
  l.commit_through(b2.blockhash);
  // Two branches at height 3 = convertHeight - 1, each with a child.
  const Block a3 = demo_block(b2.blockhash, 3, 2, 150, keys, seed);
  const Block c3 = demo_block(b2.blockhash, 3, 3, 151, keys, seed);
  l.append(a3);
  l.append(c3);
  l.append(demo_block(a3.blockhash, 4, 0, 200, keys, seed));
  l.append(demo_block(c3.blockhash, 4, 1, 201, keys, seed));
  d.before = l;
  d.convert_height = 4;

  LedgerView dag = chain_to_dag(l, d.convert_height, derive_beacon_seed(l, d.convert_height));
  d.leader = *dag.anchor();
  // Concurrent DAG blocks above the anchor, each referencing every live tip.
  for (Height h = 5; h <= 7; ++h) {
    std::vector<Hash32> live;
    for (const auto& t : dag.tips())
      if (!dag.is_discarded(t)) live.push_back(t);
    for (NodeId p = 0; p < 2; ++p) {
      Block b = demo_block(live.front(), h, p, h * 50 + p, keys, seed);
      b.parents = live;
      b.seal();
      dag.append(b);
    }
  }
  std::optional<Hash32> top;
  for (const auto& t : dag.tips())
    if (!dag.is_discarded(t) && (!top || dag.at(t).height > dag.at(*top).height)) top = t;
  dag.commit_through(*top);
  d.descends = true;
  for (const auto& h : dag.committed())
    if (dag.at(h).height >= d.convert_height && !dag.is_ancestor(d.leader, h)) d.descends = false;
  for (const auto& h : dag.committed())
    if (dag.is_discarded(h)) d.descends = false;
  d.after = dag;
  return d;
}

}  // namespace metachain
