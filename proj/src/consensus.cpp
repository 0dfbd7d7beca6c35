#include "metachain/consensus.hpp"

#include <algorithm>

namespace metachain {

std::string_view kind_name(ConsensusKind kind) {
  switch (kind) {
    case ConsensusKind::PoA: return "PoA";
    case ConsensusKind::TDPoS: return "TDPoS";
    case ConsensusKind::PoW: return "PoW";
  }
  return "?";
}

ConsensusKind kind_from_name(std::string_view name) {
  for (auto k : kAllKinds)
    if (kind_name(k) == name) return k;
  throw Error(Errc::BadConfig, "unknown consensus '" + std::string(name) + "'");
}

void EngineConfig::validate() const {
  if (block_interval_ticks <= 0) throw Error(Errc::BadConfig, "blockIntervalTicks must be positive");
  if (kind == ConsensusKind::PoA && authorities.empty()) throw Error(Errc::EmptyAuthorities);
  if (kind == ConsensusKind::TDPoS && delegate_count < 1) throw Error(Errc::BadConfig, "delegates must be >= 1");
  if (difficulty < 0 || difficulty > 256) throw Error(Errc::BadConfig, "difficulty out of range");
}

bool pow_check(ByteView header, int difficulty, std::uint64_t nonce) {
  ByteWriter w;
  w.raw(header).u64(nonce);
  return leading_zero_bits(sha256(w.bytes())) >= difficulty;
}

std::optional<std::uint64_t> pow_mine(ByteView header, int difficulty, std::uint64_t max_iters) {
  // Reuse one buffer; only the trailing 8 nonce bytes change.
  ByteWriter w;
  w.raw(header).u64(0);
  Bytes buf = std::move(w).take();
  const std::size_t off = buf.size() - 8;
  for (std::uint64_t nonce = 0; nonce < max_iters; ++nonce) {
    for (int i = 0; i < 8; ++i) buf[off + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(nonce >> (56 - 8 * i));
    if (leading_zero_bits(sha256(buf)) >= difficulty) return nonce;
  }
  return std::nullopt;
}

Bytes encode_nonce(std::uint64_t nonce) {
  ByteWriter w;
  w.u64(nonce);
  return std::move(w).take();
}

bool pow_validate(const Block& block, int difficulty) {
  if (block.consensus_meta.size() != 8) throw Error(Errc::MalformedMeta, "PoW meta is an 8-byte nonce");
  ByteReader r(block.consensus_meta);
  return pow_check(block.header_bytes(), difficulty, r.u64());
}

NodeId poa_leader(std::uint64_t round, std::span<const NodeId> authorities) {
  if (authorities.empty()) throw Error(Errc::EmptyAuthorities);
  return authorities[round % authorities.size()];
}

std::vector<NodeId> tdpos_elect(const std::map<NodeId, Amount>& votes, int delegate_count) {
  if (delegate_count < 1) throw Error(Errc::BadConfig, "delegate count must be >= 1");
  if (votes.empty()) throw Error(Errc::NoVoters);
  std::vector<std::pair<NodeId, Amount>> ranked(votes.begin(), votes.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < ranked.size() && out.size() < static_cast<std::size_t>(delegate_count); ++i)
    out.push_back(ranked[i].first);
  return out;
}

NodeId tdpos_proposer(const EngineConfig& engine, std::uint64_t round) {
  // Stakes are static within a run, so every epoch elects the same set; the
  // election still happens per epoch so a changing vote ledger takes effect
  // at the boundary.
  const auto delegates = tdpos_elect(engine.votes, engine.delegate_count);
  return delegates[round % delegates.size()];
}

std::optional<NodeId> scheduled_proposer(const EngineConfig& engine, std::uint64_t round) {
  switch (engine.kind) {
    case ConsensusKind::PoA: return poa_leader(round, engine.authorities);
    case ConsensusKind::TDPoS: return tdpos_proposer(engine, round);
    case ConsensusKind::PoW: return std::nullopt;
  }
  return std::nullopt;
}

Block propose_block(const EngineConfig& engine, NodeId node, const LedgerView& ledger,
                    std::vector<Transaction> pending, std::uint64_t round, Tick tick, KeyRing& keys,
                    std::uint64_t pow_budget) {
  if (auto leader = scheduled_proposer(engine, round); leader && *leader != node)
    throw Error(Errc::NotMyTurn, "round " + std::to_string(round));

  Block b;
  b.proposer = node;
  b.tick = tick;
  b.txs = std::move(pending);
  if (ledger.mode() == LedgerMode::Chain) {
    const Hash32 tip = ledger.longest_chain_tip();
    b.parents = {tip};
    b.height = ledger.at(tip).height + 1;
  } else {
    Height top = 0;
    for (const auto& t : ledger.tips()) {
      if (ledger.is_discarded(t)) continue;
      b.parents.push_back(t);
      top = std::max(top, ledger.at(t).height);
    }
    b.height = top + 1;
  }

  const Bytes header = b.header_bytes();
  if (engine.kind == ConsensusKind::PoW) {
    auto nonce = pow_mine(header, engine.difficulty, pow_budget);
    if (!nonce) throw Error(Errc::PowNotFound);
    b.consensus_meta = encode_nonce(*nonce);
  } else {
    const Signature sig = keys.keys(node).sign(header);
    b.consensus_meta.assign(sig.begin(), sig.end());
  }
  b.seal();
  return b;
}

bool validate_block(const EngineConfig& engine, const Block& block, std::uint64_t round, KeyRing& keys) {
  if (block.blockhash != block.compute_hash()) return false;
  if (engine.kind == ConsensusKind::PoW) return pow_validate(block, engine.difficulty);
  if (block.consensus_meta.size() != 64) throw Error(Errc::MalformedMeta, "authority signature is 64 bytes");
  if (*scheduled_proposer(engine, round) != block.proposer) return false;
  Signature sig;
  std::copy(block.consensus_meta.begin(), block.consensus_meta.end(), sig.begin());
  return verify_signature(keys.pub(block.proposer), block.header_bytes(), sig);
}

std::string_view status_name(ProposalStatus s) {
  switch (s) {
    case ProposalStatus::Pending: return "Pending";
    case ProposalStatus::Success: return "Success";
    case ProposalStatus::Failure: return "Failure";
  }
  return "?";
}

SwitchProposal propose_switch(ConsensusKind from, ConsensusKind to, Height vote_collect_height,
                              double trigger_threshold, Height effective_height, Height current_height) {
  if (from == to) throw Error(Errc::SameKind);
  if (!(effective_height > vote_collect_height && vote_collect_height > current_height))
    throw Error(Errc::HeightInPast);
  if (!(trigger_threshold > 0.0 && trigger_threshold <= 1.0)) throw Error(Errc::BadConfig, "threshold in (0,1]");
  SwitchProposal p;
  p.from = from;
  p.to = to;
  p.vote_collect_height = vote_collect_height;
  p.trigger_threshold = trigger_threshold;
  p.effective_height = effective_height;
  ByteWriter w;
  w.str("switch").str(kind_name(from)).str(kind_name(to)).i64(vote_collect_height).i64(effective_height).i64(
      current_height);
  p.proposal_id = sha256(w.bytes());
  return p;
}

SwitchProposal tally_and_apply(SwitchProposal proposal, const std::set<NodeId>& votes, std::size_t live_nodes,
                               Height current_height) {
  if (proposal.status != ProposalStatus::Pending) throw Error(Errc::AlreadyResolved);
  if (current_height < proposal.vote_collect_height) throw Error(Errc::HeightInPast, "votes still being collected");
  const double share = live_nodes == 0 ? 0.0 : static_cast<double>(votes.size()) / static_cast<double>(live_nodes);
  proposal.status = share >= proposal.trigger_threshold ? ProposalStatus::Success : ProposalStatus::Failure;
  return proposal;
}

const SwitchProposal& SwitchGovernor::propose(ConsensusKind from, ConsensusKind to, Height vote_collect_height,
                                              double trigger_threshold, Height effective_height,
                                              Height current_height) {
  if (pending()) throw Error(Errc::AlreadyResolved, "a proposal is already pending");
  if (last_failure_ && current_height < *last_failure_ + kCoolDownBlocks) throw Error(Errc::CoolDown);
  current_ = propose_switch(from, to, vote_collect_height, trigger_threshold, effective_height, current_height);
  votes_.clear();
  return *current_;
}

bool SwitchGovernor::vote(NodeId node) {
  if (!pending()) throw Error(Errc::AlreadyResolved, "no pending proposal");
  return votes_.insert(node).second;
}

const SwitchProposal& SwitchGovernor::resolve(std::size_t live_nodes, Height current_height) {
  if (!current_) throw Error(Errc::AlreadyResolved, "no proposal");
  current_ = tally_and_apply(*current_, votes_, live_nodes, current_height);
  if (current_->status == ProposalStatus::Failure) last_failure_ = current_height;
  return *current_;
}

const EngineConfig& HotSwapEngine::engine_for(Height height) const {
  if (scheduled_ && height >= scheduled_->second) return scheduled_->first;
  return active_;
}

void HotSwapEngine::schedule(EngineConfig next, Height effective_height) {
  next.validate();
  scheduled_ = std::make_pair(std::move(next), effective_height);
}

bool HotSwapEngine::advance_to(Height height) {
  if (!scheduled_ || height < scheduled_->second) return false;
  active_ = std::move(scheduled_->first);
  scheduled_.reset();
  return true;
}

void HotSwapEngine::state_sync(const HotSwapEngine& peer) {
  active_ = peer.active_;
  scheduled_ = peer.scheduled_;
  barred_ = false;
}

bool HotSwapEngine::accepts(const Block& block, std::uint64_t round, KeyRing& keys) const {
  try {
    return validate_block(engine_for(block.height), block, round, keys);
  } catch (const Error&) {
    return false;
  }
}

std::optional<Height> HotSwapEngine::scheduled_height() const {
  if (!scheduled_) return std::nullopt;
  return scheduled_->second;
}

}  // namespace metachain
