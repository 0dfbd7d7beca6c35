#include "metachain/ledger.hpp"

#include <algorithm>

namespace metachain {

std::string_view mode_name(LedgerMode mode) { return mode == LedgerMode::Chain ? "Chain" : "Dag"; }

namespace {

Bytes tx_preimage(NodeId sender, ByteView payload, std::uint64_t nonce) {
  ByteWriter w;
  w.u32(sender).blob(payload).u64(nonce);
  return std::move(w).take();
}

}  // namespace

Transaction Transaction::make(const KeyPair& keys, NodeId sender, Bytes payload, std::uint64_t nonce) {
  Transaction tx;
  tx.sender = sender;
  tx.payload = std::move(payload);
  tx.nonce = nonce;
  tx.txid = tx.compute_id();
  tx.signature = keys.sign(ByteView(tx.txid));
  return tx;
}

Hash32 Transaction::compute_id() const { return sha256(tx_preimage(sender, payload, nonce)); }

bool Transaction::verify(const PublicKey& sender_key) const {
  return txid == compute_id() && verify_signature(sender_key, ByteView(txid), signature);
}

Bytes Block::header_bytes() const {
  ByteWriter w;
  w.i64(height).u32(static_cast<std::uint32_t>(parents.size()));
  for (const auto& p : parents) w.hash(p);
  w.u32(proposer).i64(tick).u32(static_cast<std::uint32_t>(txs.size()));
  for (const auto& tx : txs) w.hash(tx.txid);
  return std::move(w).take();
}

Hash32 Block::compute_hash() const {
  ByteWriter w;
  w.raw(header_bytes()).blob(consensus_meta);
  return sha256(w.bytes());
}

Block Block::genesis(Tick tick) {
  Block g;
  g.tick = tick;
  g.seal();
  return g;
}

LedgerView::LedgerView(Block genesis, LedgerMode mode) : mode_(mode) {
  if (!genesis.parents.empty() || genesis.height != 0) throw Error(Errc::BadHeight, "genesis must be parentless at height 0");
  if (genesis.blockhash != genesis.compute_hash()) throw Error(Errc::BadBlockHash);
  Hash32 h = genesis.blockhash;
  blocks_.emplace(h, std::move(genesis));
  children_[h];
  order_.push_back(h);
  tips_.insert(h);
  committed_.push_back(h);
  committed_set_.insert(h);
}

const Block& LedgerView::at(const Hash32& h) const {
  auto it = blocks_.find(h);
  if (it == blocks_.end()) throw Error(Errc::UnknownParent, "no block " + to_hex(h));
  return it->second;
}

const std::vector<Hash32>& LedgerView::children(const Hash32& h) const {
  auto it = children_.find(h);
  if (it == children_.end()) throw Error(Errc::UnknownParent, "no block " + to_hex(h));
  return it->second;
}

std::vector<Hash32> LedgerView::live_at_height(Height height) const {
  std::vector<Hash32> out;
  for (const auto& [h, b] : blocks_)
    if (b.height == height && !discarded_.count(h)) out.push_back(h);
  return out;  // std::map iteration is already hash-sorted
}

void LedgerView::append(const Block& block) {
  if (blocks_.count(block.blockhash)) throw Error(Errc::DuplicateBlock, to_hex(block.blockhash));
  if (block.parents.empty()) throw Error(Errc::WrongParentArity, "only genesis may be parentless");
  if (mode_ == LedgerMode::Chain && block.parents.size() != 1)
    throw Error(Errc::WrongParentArity, "chain blocks carry exactly one parent");
  std::set<Hash32> distinct(block.parents.begin(), block.parents.end());
  if (distinct.size() != block.parents.size()) throw Error(Errc::WrongParentArity, "repeated parent");
  if (block.blockhash != block.compute_hash()) throw Error(Errc::BadBlockHash);

  for (const auto& p : block.parents) {
    auto it = blocks_.find(p);
    if (it == blocks_.end()) throw Error(Errc::UnknownParent, to_hex(p));
    const Block& parent = it->second;
    if (mode_ == LedgerMode::Chain ? block.height != parent.height + 1 : block.height <= parent.height)
      throw Error(Errc::BadHeight);
    if (discarded_.count(p)) throw Error(Errc::NotAnchored, "parent was discarded by conversion");
  }
  if (mode_ == LedgerMode::Dag && anchor_ && convert_height_ && block.height == *convert_height_ &&
      !distinct.count(*anchor_))
    throw Error(Errc::NotAnchored, "blocks at the convert height must reference the elected leader");

  const Hash32 h = block.blockhash;
  for (const auto& p : block.parents) {
    children_[p].push_back(h);
    tips_.erase(p);
  }
  children_[h];
  tips_.insert(h);
  order_.push_back(h);
  max_height_ = std::max(max_height_, block.height);
  blocks_.emplace(h, block);
}

void LedgerView::commit_through(const Hash32& h) {
  if (!blocks_.count(h)) throw Error(Errc::UnknownParent, to_hex(h));
  if (discarded_.count(h)) throw Error(Errc::NotAnchored, "cannot commit a discarded block");
  std::vector<Hash32> fresh;
  std::vector<Hash32> stack{h};
  std::set<Hash32> seen;
  while (!stack.empty()) {
    Hash32 cur = stack.back();
    stack.pop_back();
    if (committed_set_.count(cur) || !seen.insert(cur).second) continue;
    fresh.push_back(cur);
    for (const auto& p : blocks_.at(cur).parents) stack.push_back(p);
  }
  std::sort(fresh.begin(), fresh.end(), [this](const Hash32& a, const Hash32& b) {
    const auto ha = blocks_.at(a).height, hb = blocks_.at(b).height;
    return ha != hb ? ha < hb : a < b;
  });
  for (const auto& f : fresh) {
    committed_.push_back(f);
    committed_set_.insert(f);
    committed_height_ = std::max(committed_height_, blocks_.at(f).height);
  }
}

Hash32 LedgerView::longest_chain_tip() const {
  if (mode_ != LedgerMode::Chain) throw Error(Errc::WrongMode, "longest-chain rule applies to chain ledgers");
  // In chain mode height equals path length from genesis.
  const Block* best = nullptr;
  for (const auto& [h, b] : blocks_) {
    if (discarded_.count(h)) continue;
    if (!best || b.height > best->height) best = &b;
  }
  return best->blockhash;
}

std::map<Hash32, std::size_t> LedgerView::subtree_sizes() const {
  std::map<Hash32, std::size_t> size;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if (discarded_.count(*it)) continue;
    std::size_t s = 1;
    for (const auto& c : children_.at(*it))
      if (!discarded_.count(c)) s += size.at(c);
    size[*it] = s;
  }
  return size;
}

Hash32 LedgerView::ghost_tip() const {
  if (mode_ != LedgerMode::Chain) throw Error(Errc::WrongMode, "GHOST applies to chain ledgers");
  const auto size = subtree_sizes();
  Hash32 cur = order_.front();
  for (;;) {
    const Hash32* best = nullptr;
    for (const auto& c : children_.at(cur)) {
      if (discarded_.count(c)) continue;
      if (!best || size.at(c) > size.at(*best) || (size.at(c) == size.at(*best) && c < *best)) best = &c;
    }
    if (!best) return cur;
    cur = *best;
  }
}

std::vector<Transaction> LedgerView::discarded_transactions() const {
  std::vector<Transaction> out;
  for (const auto& h : order_)
    if (discarded_.count(h))
      for (const auto& tx : blocks_.at(h).txs) out.push_back(tx);
  return out;
}

bool LedgerView::is_ancestor(const Hash32& ancestor, const Hash32& descendant) const {
  const Height target = at(ancestor).height;
  std::vector<Hash32> stack{descendant};
  std::set<Hash32> seen;
  while (!stack.empty()) {
    Hash32 cur = stack.back();
    stack.pop_back();
    if (cur == ancestor) return true;
    if (!seen.insert(cur).second) continue;
    for (const auto& p : blocks_.at(cur).parents)
      if (blocks_.at(p).height >= target) stack.push_back(p);
  }
  return false;
}

nlohmann::json block_to_json(const Block& b) {
  nlohmann::json parents = nlohmann::json::array();
  for (const auto& p : b.parents) parents.push_back(to_hex(p));
  nlohmann::json txs = nlohmann::json::array();
  for (const auto& tx : b.txs)
    txs.push_back({{"txid", to_hex(tx.txid)},
                   {"sender", tx.sender},
                   {"payload", to_hex(tx.payload)},
                   {"nonce", tx.nonce},
                   {"signature", to_hex(ByteView(tx.signature))}});
  return {{"hash", to_hex(b.blockhash)}, {"height", b.height},       {"parents", parents},
          {"proposer", b.proposer},      {"tick", b.tick},           {"txs", txs},
          {"meta", to_hex(b.consensus_meta)}};
}

nlohmann::json LedgerView::to_json() const {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& h : order_) blocks.push_back(block_to_json(blocks_.at(h)));
  return {{"mode", std::string(mode_name(mode_))}, {"blocks", blocks}, {"committedHeight", committed_height_}};
}

LedgerView append_block(LedgerView ledger, const Block& block) {
  ledger.append(block);
  return ledger;
}

Hash32 beacon_elect(const Hash32& seed, std::span<const Hash32> candidates) {
  if (candidates.empty()) throw Error(Errc::EmptyCandidates);
  std::vector<Hash32> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  ByteWriter w;
  w.hash(seed);
  for (const auto& c : sorted) w.hash(c);
  const auto index = hash_prefix_u64(sha256(w.bytes())) % sorted.size();
  return sorted[index];
}

Hash32 derive_beacon_seed(const LedgerView& ledger, Height convert_height) {
  const Hash32* source = &ledger.committed().front();
  for (const auto& h : ledger.committed())
    if (ledger.at(h).height <= convert_height - 2) source = &h;
  ByteWriter w;
  w.str("metachain-beacon").hash(*source).i64(convert_height);
  return sha256(w.bytes());
}

LedgerView chain_to_dag(const LedgerView& ledger, Height convert_height, const Hash32& beacon_seed) {
  if (ledger.mode_ != LedgerMode::Chain) throw Error(Errc::WrongMode, "chain_to_dag needs a chain ledger");
  if (convert_height <= ledger.committed_height_ || convert_height < 1) throw Error(Errc::ConvertHeightTooLow);

  const Hash32& last_committed = ledger.committed_.back();
  std::vector<Hash32> candidates;
  for (const auto& h : ledger.live_at_height(convert_height - 1))
    if (ledger.is_ancestor(last_committed, h)) candidates.push_back(h);
  if (candidates.empty()) throw Error(Errc::NoCandidateAtHeight);
  const Hash32 leader = candidates.size() == 1 ? candidates.front() : beacon_elect(beacon_seed, candidates);

  LedgerView out = ledger;
  // Keep the leader's ancestry and its descendants; everything else loses.
  std::set<Hash32> keep;
  for (Hash32 cur = leader;;) {
    keep.insert(cur);
    const auto& parents = out.blocks_.at(cur).parents;
    if (parents.empty()) break;
    cur = parents.front();
  }
  std::vector<Hash32> stack{leader};
  while (!stack.empty()) {
    Hash32 cur = stack.back();
    stack.pop_back();
    keep.insert(cur);
    for (const auto& c : out.children_.at(cur)) stack.push_back(c);
  }
  for (const auto& h : out.order_)
    if (!keep.count(h)) out.discarded_.insert(h);

  out.commit_through(leader);
  out.mode_ = LedgerMode::Dag;
  out.convert_height_ = convert_height;
  out.anchor_ = leader;
  return out;
}

LedgerView dag_to_chain(const LedgerView& ledger, Height convert_height) {
  if (ledger.mode_ != LedgerMode::Dag) throw Error(Errc::WrongMode, "dag_to_chain needs a DAG ledger");
  if (convert_height <= ledger.committed_height_) throw Error(Errc::ConvertHeightTooLow);

  std::vector<const Block*> prefix;
  for (const auto& [h, b] : ledger.blocks_)
    if (b.height < convert_height && !ledger.discarded_.count(h)) prefix.push_back(&b);
  std::sort(prefix.begin(), prefix.end(), [](const Block* a, const Block* b) {
    return a->height != b->height ? a->height < b->height : a->blockhash < b->blockhash;
  });

  LedgerView out(ledger.genesis(), LedgerMode::Chain);
  Hash32 prev = ledger.genesis().blockhash;
  Height height = 0;
  for (const Block* b : prefix) {
    if (b->parents.empty()) continue;  // genesis
    Block linear = *b;
    linear.parents = {prev};
    linear.height = ++height;
    linear.seal();
    out.append(linear);
    prev = linear.blockhash;
  }
  out.commit_through(prev);
  out.convert_height_ = convert_height;
  return out;
}

}  // namespace metachain
