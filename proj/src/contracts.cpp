#include "metachain/contracts.hpp"

#include <algorithm>
#include <set>

namespace metachain {

std::string_view contract_name(ContractKind k) {
  switch (k) {
    case ContractKind::LedgerConversion: return "LedgerConversion";
    case ContractKind::NFR: return "NFR";
    case ContractKind::OTMC: return "OTMC";
    case ContractKind::Channel: return "Channel";
    case ContractKind::TrustRegistry: return "TrustRegistry";
  }
  return "?";
}

ContractKind contract_from_name(std::string_view name) {
  for (auto k : {ContractKind::LedgerConversion, ContractKind::NFR, ContractKind::OTMC, ContractKind::Channel,
                 ContractKind::TrustRegistry})
    if (contract_name(k) == name) return k;
  throw Error(Errc::UnknownFunction, "unknown contract '" + std::string(name) + "'");
}

std::string_view resource_name(ResourceType r) {
  switch (r) {
    case ResourceType::CPU: return "CPU";
    case ResourceType::GPU: return "GPU";
    case ResourceType::Disk: return "Disk";
  }
  return "?";
}

ResourceType resource_from_name(std::string_view name) {
  for (auto r : {ResourceType::CPU, ResourceType::GPU, ResourceType::Disk})
    if (resource_name(r) == name) return r;
  throw Error(Errc::BadArguments, "resource type '" + std::string(name) + "'");
}

std::string_view validity_name(Validity v) {
  switch (v) {
    case Validity::Proven: return "Proven";
    case Validity::Unproven: return "Unproven";
    case Validity::Unrentable: return "Unrentable";
  }
  return "?";
}

std::string_view direction_name(ConversionDirection d) {
  return d == ConversionDirection::ChainToDag ? "ChainToDag" : "DagToChain";
}

std::string_view stage_name(OtmcStage s) {
  switch (s) {
    case OtmcStage::Open: return "Open";
    case OtmcStage::Run: return "Run";
    case OtmcStage::Close: return "Close";
  }
  return "?";
}

void GasMeter::charge(std::uint64_t amount) {
  if (used_ + amount > limit_) {
    used_ = limit_;
    throw Error(Errc::OutOfGas);
  }
  used_ += amount;
}

ContractState ContractState::genesis(KeyRing& keys, int nodes, Amount balance) {
  ContractState st;
  for (int i = 0; i < nodes; ++i) {
    const auto id = static_cast<NodeId>(i);
    st.balances[id] = balance;
    st.keys[id] = keys.pub(id);
  }
  return st;
}

Amount ContractState::escrowed() const {
  Amount sum = 0;
  for (const auto& [id, t] : tokens)
    if (t.rental) sum += t.rental->deposit;
  for (const auto& [cid, c] : clusters)
    if (c.stage != OtmcStage::Close)
      for (const auto& [n, d] : c.deposits) sum += d;
  for (const auto& [id, ch] : channels)
    if (ch.phase != ChannelPhase::Closed) sum += ch.total();
  return sum;
}

Amount ContractState::total_value() const {
  Amount sum = burned + escrowed();
  for (const auto& [n, b] : balances) sum += b;
  return sum;
}

// ---- LedgerConversion ----------------------------------------------------

void lc_vote(LedgerConversionState& st, NodeId caller, GasMeter& gas) {
  gas.read();
  if (auto it = st.is_vote.find(caller); it != st.is_vote.end() && it->second) throw Error(Errc::AlreadyVoted);
  gas.write(2);
  st.is_vote[caller] = true;
  ++st.vote_count;
  if (st.proposal && st.vote_count >= st.threshold) {
    gas.write();
    st.pending = st.proposal;
    st.proposal.reset();
  }
}

void lc_convert(LedgerConversionState& st, ConversionDirection dir, Height convert_height, std::string consensus_name,
                Height current_height, GasMeter& gas) {
  gas.read();
  if (st.vote_count < st.threshold) throw Error(Errc::ThresholdNotMet);
  if (convert_height <= current_height) throw Error(Errc::HeightInPast);
  gas.write();
  st.pending = PendingConversion{dir, convert_height, std::move(consensus_name)};
  st.proposal.reset();
}

void lc_propose(LedgerConversionState& st, ConversionDirection dir, Height convert_height,
                std::string consensus_name, Height current_height, GasMeter& gas) {
  gas.read();
  if (st.proposal || st.pending) throw Error(Errc::AlreadyResolved, "a conversion is already open");
  if (convert_height <= current_height) throw Error(Errc::HeightInPast);
  gas.write(2);
  st.is_vote.clear();
  st.vote_count = 0;
  st.proposal = PendingConversion{dir, convert_height, std::move(consensus_name)};
}

void lc_reset(LedgerConversionState& st) {
  st.is_vote.clear();
  st.vote_count = 0;
  st.proposal.reset();
  st.pending.reset();
}

// ---- NFR -------------------------------------------------------------------

namespace {

NfrRecord& live_token(ContractState& st, std::uint64_t token) {
  auto it = st.tokens.find(token);
  if (it == st.tokens.end() || it->second.cancelled) throw Error(Errc::UnknownToken, std::to_string(token));
  return it->second;
}

Amount& balance_of(ContractState& st, NodeId node) { return st.balances[node]; }

}  // namespace

std::uint64_t nfr_registration(ContractState& st, NodeId caller, ResourceType type, Amount price, GasMeter& gas) {
  if (price <= 0) throw Error(Errc::ZeroPrice);
  gas.write(2);
  NfrRecord r;
  r.token_id = st.next_token++;
  r.owner = caller;
  r.resource = type;
  r.price = price;
  st.tokens[r.token_id] = r;
  return r.token_id;
}

void nfr_rental(ContractState& st, NodeId caller, std::uint64_t token, Height rent_blocks, Amount deposit,
                Height current_height, GasMeter& gas) {
  gas.read();
  NfrRecord& t = live_token(st, token);
  if (t.validity != Validity::Proven) throw Error(Errc::TokenUnproven, std::string(validity_name(t.validity)));
  if (t.rental) throw Error(Errc::AlreadyRented);
  if (rent_blocks <= 0) throw Error(Errc::BadArguments, "rentBlocks must be positive");
  if (deposit < t.price * rent_blocks) throw Error(Errc::InsufficientDeposit);
  gas.read();
  Amount& bal = balance_of(st, caller);
  if (bal < deposit) throw Error(Errc::InsufficientFunds);
  gas.write(2);
  bal -= deposit;
  t.rental = Rental{caller, deposit, current_height, rent_blocks};
}

std::pair<Amount, Amount> nfr_liquidation(ContractState& st, NodeId caller, std::uint64_t token,
                                          Height current_height, GasMeter& gas) {
  gas.read();
  auto it = st.tokens.find(token);
  if (it == st.tokens.end()) throw Error(Errc::UnknownToken, std::to_string(token));
  NfrRecord& t = it->second;
  if (!t.rental) throw Error(Errc::NoActiveRental);
  const Rental r = *t.rental;
  const bool timed_out = current_height > r.start_height + r.rent_blocks;
  if (!timed_out && caller != r.renter) throw Error(Errc::NotRenterBeforeTimeout);
  gas.write(3);
  Amount owner_gets = r.deposit;
  Amount renter_gets = 0;
  if (!timed_out) {
    const Height used = std::clamp<Height>(current_height - r.start_height, 0, r.rent_blocks);
    owner_gets = t.price * used;
    renter_gets = r.deposit - owner_gets;
  } else {
    t.cancelled = true;
  }
  balance_of(st, t.owner) += owner_gets;
  balance_of(st, r.renter) += renter_gets;
  t.rental.reset();
  return {owner_gets, renter_gets};
}

void nfr_cancellation(ContractState& st, NodeId caller, std::uint64_t token, GasMeter& gas) {
  gas.read();
  NfrRecord& t = live_token(st, token);
  if (t.owner != caller) throw Error(Errc::NotOwner);
  if (t.rental) throw Error(Errc::ActiveRentalExists);
  gas.write();
  t.cancelled = true;
}

// ---- OTMC ------------------------------------------------------------------

Bytes otmc_open_message(const std::vector<NodeId>& members, Height delta_blocks,
                        const std::map<NodeId, Amount>& deposits, const Hash32& nonce) {
  ByteWriter w;
  w.str("metachain-otmc-open").u32(static_cast<std::uint32_t>(members.size()));
  for (NodeId m : members) {
    auto it = deposits.find(m);
    w.u32(m).i64(it == deposits.end() ? 0 : it->second);
  }
  w.i64(delta_blocks).hash(nonce);
  return std::move(w).take();
}

Bytes otmc_result_message(const Hash32& cid, const Hash32& results) {
  ByteWriter w;
  w.str("metachain-otmc-result").hash(cid).hash(results);
  return std::move(w).take();
}

namespace {

OtmcState& cluster_of(ContractState& st, const Hash32& cid) {
  auto it = st.clusters.find(cid);
  if (it == st.clusters.end()) throw Error(Errc::UnknownCluster);
  return it->second;
}

// Rentals bundled with a cluster settle as if the renter returned them now;
// past their own term they fall to the timeout path.
void settle_rentals(ContractState& st, const OtmcState& c, Height current_height, GasMeter& gas) {
  for (auto token : c.rentals) {
    auto it = st.tokens.find(token);
    if (it == st.tokens.end() || !it->second.rental) continue;
    nfr_liquidation(st, it->second.rental->renter, token, current_height, gas);
  }
}

}  // namespace

Hash32 otmc_open(ContractState& st, std::vector<NodeId> members, Height delta_blocks,
                 const std::map<NodeId, Amount>& deposits, const std::vector<RentalRequest>& rentals,
                 const std::map<NodeId, Signature>& signatures, const Hash32& nonce, Height current_height,
                 GasMeter& gas) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (members.size() < 2) throw Error(Errc::TooFewParticipants);
  if (delta_blocks <= 0) throw Error(Errc::BadArguments, "deltaBlocks must be positive");
  for (NodeId m : members) {
    auto it = deposits.find(m);
    if (it == deposits.end() || it->second <= 0) throw Error(Errc::ZeroDeposit, "node " + std::to_string(m));
  }

  ContractState next = st;
  const Bytes msg = otmc_open_message(members, delta_blocks, deposits, nonce);
  OtmcState c;
  for (NodeId m : members) {
    auto sig = signatures.find(m);
    if (sig == signatures.end()) throw Error(Errc::MissingSignature, "node " + std::to_string(m));
    gas.verify();
    auto key = next.keys.find(m);
    if (key == next.keys.end() || !verify_signature(key->second, msg, sig->second))
      throw Error(Errc::BadSignature, "node " + std::to_string(m));
    gas.read();
    Amount& bal = balance_of(next, m);
    const Amount d = deposits.at(m);
    if (bal < d) throw Error(Errc::InsufficientFunds, "node " + std::to_string(m));
    gas.write();
    bal -= d;
    c.deposits[m] = d;
  }
  for (const auto& r : rentals) {
    try {
      nfr_rental(next, r.renter, r.token, r.rent_blocks, r.deposit, current_height, gas);
    } catch (const Error& e) {
      if (e.code() == Errc::OutOfGas) throw;
      throw Error(Errc::RentalFailed, std::string(errc_name(e.code())));
    }
    c.rentals.push_back(r.token);
  }

  gas.hash();
  ByteWriter w;
  w.str("metachain-cid").u32(static_cast<std::uint32_t>(members.size()));
  for (NodeId m : members) w.u32(m);
  w.i64(current_height).hash(nonce);
  c.cid = sha256(w.bytes());
  if (next.clusters.count(c.cid)) throw Error(Errc::BadArguments, "cluster id already in use");
  c.members = std::move(members);
  c.deadline_height = current_height + delta_blocks;
  gas.write();
  const Hash32 cid = c.cid;
  next.clusters[cid] = std::move(c);
  st = std::move(next);
  return cid;
}

void otmc_run(ContractState& st, const Hash32& cid, GasMeter& gas) {
  gas.read();
  OtmcState& c = cluster_of(st, cid);
  if (c.stage != OtmcStage::Open) throw Error(Errc::WrongState, std::string(stage_name(c.stage)));
  gas.write();
  c.stage = OtmcStage::Run;
}

void otmc_close(ContractState& st, const Hash32& cid, const std::optional<Hash32>& results,
                const std::map<NodeId, Signature>& signatures, Height current_height, GasMeter& gas) {
  gas.read();
  ContractState next = st;
  OtmcState& c = cluster_of(next, cid);
  if (c.stage != OtmcStage::Run) throw Error(Errc::WrongState, std::string(stage_name(c.stage)));

  const bool past_deadline = current_height > c.deadline_height;
  bool cooperative = false;
  if (results) {
    const Bytes msg = otmc_result_message(cid, *results);
    bool all_signed = true;
    for (NodeId m : c.members) {
      auto sig = signatures.find(m);
      if (sig == signatures.end()) {
        all_signed = false;
        break;
      }
      gas.verify();
      if (!verify_signature(next.keys.at(m), msg, sig->second)) throw Error(Errc::BadSignature);
    }
    if (!all_signed && !past_deadline) throw Error(Errc::MissingSignature);
    cooperative = all_signed;
  } else if (!past_deadline) {
    throw Error(Errc::MissingSignature, "no result digest before the deadline");
  }

  const OtmcState snapshot = c;
  settle_rentals(next, snapshot, current_height, gas);
  OtmcState& closing = next.clusters.at(cid);
  if (cooperative) {
    gas.write(static_cast<int>(closing.members.size()));
    for (const auto& [m, d] : closing.deposits) balance_of(next, m) += d;
    closing.results = results;
  } else {
    gas.write();
    for (const auto& [m, d] : closing.deposits) next.burned += d;
    closing.results.reset();
  }
  gas.write();
  closing.stage = OtmcStage::Close;
  st = std::move(next);
}

CallTraceEntry trace_entry(const ContractCall& call, const CallResult& res, Height height) {
  return CallTraceEntry{height,    std::string(contract_name(call.contract)),
                        call.function, call.caller,
                        res.gas_used,  res.ok() ? std::string("ok") : std::string(errc_name(*res.error))};
}

nlohmann::json trace_json(const CallTraceEntry& e) {
  return {{"height", e.height},     {"contract", e.contract}, {"function", e.function},
          {"caller", e.caller},     {"gas_used", e.gas_used}, {"result", e.result}};
}

}  // namespace metachain
