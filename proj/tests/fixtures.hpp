#pragma once

#include <algorithm>
#include <random>

#include "metachain/ledger.hpp"

namespace fx {

using namespace metachain;

// Block with a single distinguishing tx; `tag` keeps siblings apart.
inline Block mk(const std::vector<Hash32>& parents, Height height, std::uint64_t tag, NodeId proposer = 0) {
  Block b;
  b.height = height;
  b.parents = parents;
  b.proposer = proposer;
  b.tick = height * 10;
  ByteWriter w;
  w.str("fx").u64(tag);
  Transaction tx;
  tx.sender = proposer;
  tx.payload = w.bytes();
  tx.nonce = tag;
  tx.txid = tx.compute_id();
  b.txs.push_back(tx);
  b.seal();
  return b;
}

inline Block mk(const Hash32& parent, Height height, std::uint64_t tag, NodeId proposer = 0) {
  return mk(std::vector<Hash32>{parent}, height, tag, proposer);
}

inline std::uint64_t tag_of(const Block& b) { return b.txs.at(0).nonce; }

// Random chain-mode block tree with n non-genesis blocks.
inline std::vector<Block> random_tree(std::mt19937_64& rng, int n, std::uint64_t tag_base = 0) {
  std::vector<Block> out;
  std::vector<std::pair<Hash32, Height>> nodes{{Block::genesis().blockhash, 0}};
  for (int i = 0; i < n; ++i) {
    const auto& [p, h] = nodes[rng() % nodes.size()];
    Block b = mk(p, h + 1, tag_base + static_cast<std::uint64_t>(i));
    nodes.emplace_back(b.blockhash, b.height);
    out.push_back(b);
  }
  return out;
}

}  // namespace fx
