#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>

#include "json.hpp"
#include "metachain/common.hpp"
#include "metachain/crypto.hpp"

namespace metachain {

enum class LedgerMode { Chain, Dag };

std::string_view mode_name(LedgerMode mode);

struct Transaction {
  Hash32 txid{};
  NodeId sender = 0;
  Bytes payload;
  std::uint64_t nonce = 0;
  Signature signature{};

  /// Builds, ids and signs a transaction in one step.
  static Transaction make(const KeyPair& keys, NodeId sender, Bytes payload, std::uint64_t nonce);

  Hash32 compute_id() const;
  bool verify(const PublicKey& sender_key) const;

  bool operator==(const Transaction&) const = default;
};

struct Block {
  Height height = 0;
  std::vector<Hash32> parents;
  NodeId proposer = 0;
  std::vector<Transaction> txs;
  Tick tick = 0;
  Bytes consensus_meta;
  Hash32 blockhash{};

  /// Every field except consensus_meta and blockhash. This is what PoW
  /// nonces and authority signatures commit to.
  Bytes header_bytes() const;
  Hash32 compute_hash() const;
  void seal() { blockhash = compute_hash(); }

  static Block genesis(Tick tick = 0);

  bool operator==(const Block&) const = default;
};

/// A block graph plus the committed prefix. Chain mode requires exactly one
/// parent per block; Dag mode accepts any non-empty parent set.
///
/// Blocks that lose a conversion leader election stay in the view but are
/// marked discarded and never enter the committed prefix.
class LedgerView {
 public:
  explicit LedgerView(Block genesis = Block::genesis(), LedgerMode mode = LedgerMode::Chain);

  LedgerMode mode() const { return mode_; }
  const Block& genesis() const { return blocks_.at(order_.front()); }
  const Block& at(const Hash32& h) const;
  bool contains(const Hash32& h) const { return blocks_.count(h) != 0; }
  std::size_t size() const { return blocks_.size(); }
  const std::vector<Hash32>& insertion_order() const { return order_; }
  const std::set<Hash32>& tips() const { return tips_; }
  const std::vector<Hash32>& children(const Hash32& h) const;
  Height max_height() const { return max_height_; }

  Height committed_height() const { return committed_height_; }
  std::optional<Height> convert_height() const { return convert_height_; }
  std::optional<Hash32> anchor() const { return anchor_; }
  /// Committed blocks, genesis first, in (height, hash) order.
  const std::vector<Hash32>& committed() const { return committed_; }
  bool is_committed(const Hash32& h) const { return committed_set_.count(h) != 0; }
  bool is_discarded(const Hash32& h) const { return discarded_.count(h) != 0; }
  /// Non-discarded blocks at a height, sorted by hash.
  std::vector<Hash32> live_at_height(Height height) const;

  void append(const Block& block);

  /// Commits `h` and every ancestor not yet committed.
  void commit_through(const Hash32& h);

  Hash32 longest_chain_tip() const;
  Hash32 ghost_tip() const;

  /// Transactions carried by discarded blocks; callers return them to the
  /// proposers' pending pools.
  std::vector<Transaction> discarded_transactions() const;

  bool is_ancestor(const Hash32& ancestor, const Hash32& descendant) const;

  nlohmann::json to_json() const;
  std::string dump() const { return to_json().dump(); }

 private:
  friend LedgerView chain_to_dag(const LedgerView&, Height, const Hash32&);
  friend LedgerView dag_to_chain(const LedgerView&, Height);

  std::map<Hash32, std::size_t> subtree_sizes() const;

  LedgerMode mode_;
  std::map<Hash32, Block> blocks_;
  std::map<Hash32, std::vector<Hash32>> children_;
  std::vector<Hash32> order_;
  std::set<Hash32> tips_;
  std::set<Hash32> discarded_;
  std::vector<Hash32> committed_;
  std::set<Hash32> committed_set_;
  Height committed_height_ = 0;
  Height max_height_ = 0;
  std::optional<Height> convert_height_;
  std::optional<Hash32> anchor_;
};

/// Value-returning form of LedgerView::append.
LedgerView append_block(LedgerView ledger, const Block& block);

/// candidates[hash(seed || c0 || c1 || ...) mod n] over the hash-sorted list.
Hash32 beacon_elect(const Hash32& seed, std::span<const Hash32> candidates);

/// Seed shared by every replica: derived from the committed block closest
/// below convert_height - 1.
Hash32 derive_beacon_seed(const LedgerView& ledger, Height convert_height);

LedgerView chain_to_dag(const LedgerView& ledger, Height convert_height, const Hash32& beacon_seed);
LedgerView dag_to_chain(const LedgerView& ledger, Height convert_height);

nlohmann::json block_to_json(const Block& b);

}  // namespace metachain
