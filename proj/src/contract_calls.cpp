#include <algorithm>

#include "metachain/contracts.hpp"

namespace metachain {

using nlohmann::json;

const std::map<std::string, std::vector<std::string>>& contract_functions(ContractKind k) {
  static const std::map<ContractKind, std::map<std::string, std::vector<std::string>>> table = {
      {ContractKind::LedgerConversion,
       {{"noop", {}},
        {"vote", {}},
        {"propose", {"consensus", "convertHeight", "direction"}},
        {"convert", {"consensus", "convertHeight", "direction"}}}},
      {ContractKind::NFR,
       {{"noop", {}},
        {"registration", {"price", "resourceType"}},
        {"rental", {"rentBlocks", "tokenID"}},
        {"liquidation", {"tokenID"}},
        {"cancellation", {"tokenID"}}}},
      {ContractKind::OTMC,
       {{"noop", {}},
        {"open", {"deltaBlocks", "deposits", "participants", "rentals", "signatures"}},
        {"run", {"cid"}},
        {"close", {"cid", "results", "signatures"}}}},
      {ContractKind::Channel,
       {{"noop", {}},
        {"open", {"depositA", "depositB", "nonce", "partyA", "partyB", "sigA", "sigB"}},
        {"close", {"certificate", "channel"}},
        {"appeal", {"certificate", "channel"}},
        {"finalize", {"channel"}}}},
      {ContractKind::TrustRegistry,
       {{"noop", {}}, {"record", {"algorithm", "members", "taskId", "values"}}}},
  };
  return table.at(k);
}

namespace {

template <typename T>
T arg(const json& args, const char* name) {
  try {
    return args.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::BadArguments, std::string("argument '") + name + "'");
  }
}

Hash32 hash_arg(const json& args, const char* name) {
  try {
    return hash_from_hex(arg<std::string>(args, name));
  } catch (const Error& e) {
    throw Error(Errc::BadArguments, std::string("argument '") + name + "'");
  }
}

Signature sig_from_hex(const std::string& hex) {
  const Bytes b = from_hex(hex);
  if (b.size() != 64) throw Error(Errc::BadArguments, "signature must be 64 bytes");
  Signature s;
  std::copy(b.begin(), b.end(), s.begin());
  return s;
}

std::map<NodeId, Signature> signature_map(const json& args, const char* name) {
  std::map<NodeId, Signature> out;
  const json& j = args.at(name);
  if (!j.is_object()) throw Error(Errc::BadArguments, std::string("argument '") + name + "'");
  for (const auto& [k, v] : j.items()) out[static_cast<NodeId>(std::stoul(k))] = sig_from_hex(v.get<std::string>());
  return out;
}

ConversionDirection direction_arg(const json& args) {
  const auto s = arg<std::string>(args, "direction");
  if (s == "ChainToDag") return ConversionDirection::ChainToDag;
  if (s == "DagToChain") return ConversionDirection::DagToChain;
  throw Error(Errc::BadArguments, "direction '" + s + "'");
}

void check_arity(const ContractCall& call) {
  const auto& fns = contract_functions(call.contract);
  auto it = fns.find(call.function);
  if (it == fns.end())
    throw Error(Errc::UnknownFunction, std::string(contract_name(call.contract)) + "." + call.function);
  if (!call.args.is_object() && !call.args.is_null()) throw Error(Errc::BadArguments, "args must be an object");
  std::vector<std::string> keys;
  if (call.args.is_object())
    for (const auto& [k, v] : call.args.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  if (keys != it->second) throw Error(Errc::BadArguments, "argument list does not match " + call.function);
}

json dispatch_lc(ContractState& st, const ContractCall& call, Height h, GasMeter& gas) {
  const auto& a = call.args;
  if (call.function == "vote") {
    lc_vote(st.conversion, call.caller, gas);
    return {{"voteCount", st.conversion.vote_count}, {"scheduled", st.conversion.pending.has_value()}};
  }
  if (call.function == "propose") {
    lc_propose(st.conversion, direction_arg(a), arg<Height>(a, "convertHeight"), arg<std::string>(a, "consensus"), h,
               gas);
    return nullptr;
  }
  lc_convert(st.conversion, direction_arg(a), arg<Height>(a, "convertHeight"), arg<std::string>(a, "consensus"), h,
             gas);
  return nullptr;
}

json dispatch_nfr(ContractState& st, const ContractCall& call, Height h, GasMeter& gas) {
  const auto& a = call.args;
  if (call.function == "registration")
    return nfr_registration(st, call.caller, resource_from_name(arg<std::string>(a, "resourceType")),
                            arg<Amount>(a, "price"), gas);
  const auto token = arg<std::uint64_t>(a, "tokenID");
  if (call.function == "rental") {
    nfr_rental(st, call.caller, token, arg<Height>(a, "rentBlocks"), call.value, h, gas);
    return nullptr;
  }
  if (call.function == "liquidation") {
    auto [owner, renter] = nfr_liquidation(st, call.caller, token, h, gas);
    return {{"owner", owner}, {"renter", renter}};
  }
  nfr_cancellation(st, call.caller, token, gas);
  return nullptr;
}

json dispatch_otmc(ContractState& st, const ContractCall& call, Height h, GasMeter& gas) {
  const auto& a = call.args;
  if (call.function == "open") {
    std::map<NodeId, Amount> deposits;
    for (const auto& [k, v] : a.at("deposits").items()) deposits[static_cast<NodeId>(std::stoul(k))] = v.get<Amount>();
    std::vector<RentalRequest> rentals;
    for (const auto& r : a.at("rentals"))
      rentals.push_back({arg<NodeId>(r, "renter"), arg<std::uint64_t>(r, "tokenID"), arg<Height>(r, "rentBlocks"),
                         arg<Amount>(r, "deposit")});
    const Hash32 cid = otmc_open(st, arg<std::vector<NodeId>>(a, "participants"), arg<Height>(a, "deltaBlocks"),
                                 deposits, rentals, signature_map(a, "signatures"), call.txid, h, gas);
    return to_hex(cid);
  }
  const Hash32 cid = hash_arg(a, "cid");
  if (call.function == "run") {
    otmc_run(st, cid, gas);
    return nullptr;
  }
  std::optional<Hash32> results;
  if (!a.at("results").is_null()) results = hash_arg(a, "results");
  otmc_close(st, cid, results, signature_map(a, "signatures"), h, gas);
  return nullptr;
}

ChannelState& channel_of(ContractState& st, const json& a) {
  auto it = st.channels.find(hash_arg(a, "channel"));
  if (it == st.channels.end()) throw Error(Errc::UnknownChannel);
  return it->second;
}

Certificate cert_arg(const json& a) {
  try {
    return Certificate::decode(from_hex(arg<std::string>(a, "certificate")));
  } catch (const Error&) {
    throw Error(Errc::BadArguments, "certificate");
  }
}

json dispatch_channel(ContractState& st, const ContractCall& call, Height h, GasMeter& gas) {
  const auto& a = call.args;
  if (call.function == "open") {
    const auto pa = arg<NodeId>(a, "partyA");
    const auto pb = arg<NodeId>(a, "partyB");
    const auto da = arg<Amount>(a, "depositA");
    const auto db = arg<Amount>(a, "depositB");
    if (!st.keys.count(pa) || !st.keys.count(pb)) throw Error(Errc::UnknownNode, "channel party");
    gas.verify(2);
    ChannelState ch = ch_open(pa, pb, st.keys.at(pa), st.keys.at(pb), da, db, sig_from_hex(arg<std::string>(a, "sigA")),
                              sig_from_hex(arg<std::string>(a, "sigB")), arg<std::uint64_t>(a, "nonce"));
    gas.read(2);
    if (st.balances[pa] < da || st.balances[pb] < db) throw Error(Errc::InsufficientFunds);
    if (st.channels.count(ch.channel_id)) throw Error(Errc::BadArguments, "channel already open");
    gas.write(3);
    st.balances[pa] -= da;
    st.balances[pb] -= db;
    st.channels[ch.channel_id] = ch;
    return to_hex(ch.channel_id);
  }
  gas.read();
  ChannelState& ch = channel_of(st, a);
  if (call.function == "close" || call.function == "appeal") {
    const Certificate cert = cert_arg(a);
    gas.verify(2);
    ch = call.function == "close" ? ch_close(ch, cert, call.caller, h) : ch_appeal(ch, cert, h);
    gas.write();
    return nullptr;
  }
  ch = ch_finalize(ch, h);
  gas.write(3);
  const auto pay = ch_payouts(ch);
  st.balances[ch.parties[0]] += pay[0];
  st.balances[ch.parties[1]] += pay[1];
  return {pay[0], pay[1]};
}

json dispatch_trust(ContractState& st, const ContractCall& call, Height h, GasMeter& gas) {
  const auto& a = call.args;
  TrustRecord r;
  r.task_id = arg<std::string>(a, "taskId");
  r.members = arg<std::vector<NodeId>>(a, "members");
  r.algorithm = arg<std::string>(a, "algorithm");
  for (const auto& [k, v] : a.at("values").items()) r.values[static_cast<NodeId>(std::stoul(k))] = v.get<double>();
  r.height = h;
  gas.hash();
  gas.write();
  st.trust[r.task_id] = std::move(r);
  return nullptr;
}

}  // namespace

ExecOutcome execute_call(const ContractState& state, const ContractCall& call, Height current_height) {
  ExecOutcome out{state, {}};
  GasMeter gas(call.gas_limit);
  try {
    if (call.gas_limit == 0) throw Error(Errc::BadArguments, "gasLimit must be positive");
    gas.charge(GasSchedule::kBase);
    check_arity(call);
    json value;
    if (call.function != "noop") {
      switch (call.contract) {
        case ContractKind::LedgerConversion: value = dispatch_lc(out.state, call, current_height, gas); break;
        case ContractKind::NFR: value = dispatch_nfr(out.state, call, current_height, gas); break;
        case ContractKind::OTMC: value = dispatch_otmc(out.state, call, current_height, gas); break;
        case ContractKind::Channel: value = dispatch_channel(out.state, call, current_height, gas); break;
        case ContractKind::TrustRegistry: value = dispatch_trust(out.state, call, current_height, gas); break;
      }
    }
    out.result.value = std::move(value);
  } catch (const Error& e) {
    out.state = state;
    out.result.error = e.code();
    out.result.reason = e.what();
  } catch (const json::exception& e) {
    out.state = state;
    out.result.error = Errc::BadArguments;
    out.result.reason = e.what();
  } catch (const std::logic_error& e) {
    out.state = state;
    out.result.error = Errc::BadArguments;
    out.result.reason = e.what();
  }
  out.result.gas_used = gas.used();
  return out;
}

}  // namespace metachain
