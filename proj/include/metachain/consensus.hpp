#pragma once

#include <map>
#include <optional>
#include <set>

#include "metachain/ledger.hpp"

namespace metachain {

/// Declaration order doubles as the fixed tiebreak order used when labelling
/// benchmark rows.
enum class ConsensusKind { PoA, TDPoS, PoW };

inline constexpr std::array<ConsensusKind, 3> kAllKinds = {ConsensusKind::PoA, ConsensusKind::TDPoS,
                                                           ConsensusKind::PoW};

std::string_view kind_name(ConsensusKind kind);
ConsensusKind kind_from_name(std::string_view name);

struct EngineConfig {
  ConsensusKind kind = ConsensusKind::PoA;
  int difficulty = 8;                    // PoW leading zero bits
  std::vector<NodeId> authorities;       // PoA, round-robin order
  int delegate_count = 3;                // TDPoS
  std::map<NodeId, Amount> votes;        // TDPoS stake ledger
  Tick block_interval_ticks = 50;
  Height epoch_blocks = 12;              // TDPoS re-election period

  void validate() const;
};

// ---- PoW ---------------------------------------------------------------

bool pow_check(ByteView header, int difficulty, std::uint64_t nonce);

/// Scans nonces 0, 1, 2, ... and returns the first that gives at least
/// `difficulty` leading zero bits, or nullopt after max_iters attempts.
std::optional<std::uint64_t> pow_mine(ByteView header, int difficulty, std::uint64_t max_iters);

Bytes encode_nonce(std::uint64_t nonce);
bool pow_validate(const Block& block, int difficulty);

// ---- PoA / TDPoS -------------------------------------------------------

NodeId poa_leader(std::uint64_t round, std::span<const NodeId> authorities);

/// Top `delegate_count` nodes by stake, ties to the smaller id.
std::vector<NodeId> tdpos_elect(const std::map<NodeId, Amount>& votes, int delegate_count);

/// Proposer for a round: round-robin over the delegates elected for the
/// round's epoch.
NodeId tdpos_proposer(const EngineConfig& engine, std::uint64_t round);

/// Who may propose in `round` (nullopt for PoW, where anyone may).
std::optional<NodeId> scheduled_proposer(const EngineConfig& engine, std::uint64_t round);

/// Builds a block for `node` on top of the ledger's fork-choice tip (chain)
/// or all live tips (DAG). Throws NotMyTurn for PoA/TDPoS non-leaders and
/// PowNotFound when the nonce budget runs out.
Block propose_block(const EngineConfig& engine, NodeId node, const LedgerView& ledger,
                    std::vector<Transaction> pending, std::uint64_t round, Tick tick, KeyRing& keys,
                    std::uint64_t pow_budget = 1ull << 26);

bool validate_block(const EngineConfig& engine, const Block& block, std::uint64_t round, KeyRing& keys);

// ---- hot-plug replacement ----------------------------------------------

enum class ProposalStatus { Pending, Success, Failure };
std::string_view status_name(ProposalStatus s);

struct SwitchProposal {
  Hash32 proposal_id{};
  ConsensusKind from = ConsensusKind::PoA;
  ConsensusKind to = ConsensusKind::PoW;
  Height vote_collect_height = 0;
  double trigger_threshold = 2.0 / 3.0;
  Height effective_height = 0;
  ProposalStatus status = ProposalStatus::Pending;
};

SwitchProposal propose_switch(ConsensusKind from, ConsensusKind to, Height vote_collect_height,
                              double trigger_threshold, Height effective_height, Height current_height);

/// Resolves a pending proposal once the collect height is reached.
SwitchProposal tally_and_apply(SwitchProposal proposal, const std::set<NodeId>& votes, std::size_t live_nodes,
                               Height current_height);

/// Vote book and cool-down bookkeeping for switch proposals. One vote per
/// node per proposal; a failed proposal blocks new ones for kCoolDownBlocks.
class SwitchGovernor {
 public:
  static constexpr Height kCoolDownBlocks = 10;

  const SwitchProposal& propose(ConsensusKind from, ConsensusKind to, Height vote_collect_height,
                                double trigger_threshold, Height effective_height, Height current_height);
  /// Returns false when the node had already voted.
  bool vote(NodeId node);
  std::size_t vote_count() const { return votes_.size(); }
  const SwitchProposal& resolve(std::size_t live_nodes, Height current_height);

  const std::optional<SwitchProposal>& current() const { return current_; }
  bool pending() const { return current_ && current_->status == ProposalStatus::Pending; }

 private:
  std::optional<SwitchProposal> current_;
  std::set<NodeId> votes_;
  std::optional<Height> last_failure_;
};

/// A node's view of the active engine with at most one scheduled
/// replacement. Blocks at or above the effective height are only ever
/// judged by the incoming engine.
class HotSwapEngine {
 public:
  explicit HotSwapEngine(EngineConfig initial) : active_(std::move(initial)) {}

  const EngineConfig& engine_for(Height height) const;
  const EngineConfig& active() const { return active_; }
  void schedule(EngineConfig next, Height effective_height);
  /// Applies the scheduled engine once `height` reaches the effective height.
  bool advance_to(Height height);

  /// A node that failed to apply a switch in time may not propose or vote
  /// until it has state-synced from a peer.
  void miss_switch() { barred_ = true; }
  bool barred() const { return barred_; }
  void state_sync(const HotSwapEngine& peer);

  bool accepts(const Block& block, std::uint64_t round, KeyRing& keys) const;

  std::optional<Height> scheduled_height() const;

 private:
  EngineConfig active_;
  std::optional<std::pair<EngineConfig, Height>> scheduled_;
  bool barred_ = false;
};

}  // namespace metachain
