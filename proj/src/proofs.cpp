#include "metachain/proofs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "metachain/consensus.hpp"

namespace metachain {

namespace {

Hash32 node_hash(const Hash32& l, const Hash32& r) {
  ByteWriter w;
  w.hash(l).hash(r);
  return sha256(w.bytes());
}

std::vector<Hash32> next_level(const std::vector<Hash32>& level) {
  std::vector<Hash32> up;
  up.reserve((level.size() + 1) / 2);
  for (std::size_t i = 0; i < level.size(); i += 2)
    up.push_back(node_hash(level[i], i + 1 < level.size() ? level[i + 1] : level[i]));
  return up;
}

std::size_t depth_for(std::uint64_t leaves) {
  std::size_t d = 0;
  while (leaves > 1) {
    leaves = (leaves + 1) / 2;
    ++d;
  }
  return d;
}

}  // namespace

std::vector<Bytes> split_chunks(ByteView data, std::size_t chunk_size) {
  if (data.empty()) throw Error(Errc::EmptyData);
  if (chunk_size == 0) throw Error(Errc::BadArguments, "chunk size must be positive");
  std::vector<Bytes> out;
  for (std::size_t off = 0; off < data.size(); off += chunk_size) {
    const std::size_t len = std::min(chunk_size, data.size() - off);
    out.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(off),
                     data.begin() + static_cast<std::ptrdiff_t>(off + len));
  }
  return out;
}

Hash32 merkle_root(std::vector<Hash32> leaves) {
  if (leaves.empty()) throw Error(Errc::EmptyData);
  while (leaves.size() > 1) leaves = next_level(leaves);
  return leaves.front();
}

StorageCommitment pos_commit(ByteView data, std::size_t chunk_size, std::uint64_t token_id) {
  const auto chunks = split_chunks(data, chunk_size);
  std::vector<Hash32> leaves;
  leaves.reserve(chunks.size());
  for (const auto& c : chunks) leaves.push_back(sha256(c));
  return StorageCommitment{token_id, merkle_root(std::move(leaves)), chunks.size(), chunk_size};
}

std::vector<std::uint64_t> pos_challenge(const StorageCommitment& c, const Hash32& seed, std::size_t k) {
  if (k < 1 || k > c.leaf_count) throw Error(Errc::KTooLarge, std::to_string(k) + " of " + std::to_string(c.leaf_count));
  std::vector<std::uint64_t> out;
  std::set<std::uint64_t> seen;
  for (std::uint64_t counter = 0; out.size() < k; ++counter) {
    ByteWriter w;
    w.hash(seed).hash(c.root).u64(counter);
    const std::uint64_t idx = hash_prefix_u64(sha256(w.bytes())) % c.leaf_count;
    if (seen.insert(idx).second) out.push_back(idx);
  }
  return out;
}

StoredData::StoredData(ByteView data, std::size_t chunk_size) {
  auto chunks = split_chunks(data, chunk_size);
  std::vector<Hash32> level;
  for (auto& c : chunks) {
    level.push_back(sha256(c));
    chunks_.emplace_back(std::move(c));
  }
  levels_.push_back(level);
  while (levels_.back().size() > 1) levels_.push_back(next_level(levels_.back()));
}

void StoredData::drop_chunk(std::uint64_t index) { chunks_.at(index).reset(); }

void StoredData::corrupt_chunk(std::uint64_t index) {
  auto& c = chunks_.at(index);
  if (c && !c->empty()) (*c)[0] ^= 0x01;
}

bool StoredData::has_chunk(std::uint64_t index) const { return chunks_.at(index).has_value(); }

std::vector<Hash32> StoredData::path(std::uint64_t index) const {
  std::vector<Hash32> out;
  for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
    const auto& level = levels_[l];
    const std::uint64_t sib = index ^ 1u;
    out.push_back(sib < level.size() ? level[sib] : level[index]);
    index >>= 1;
  }
  return out;
}

StorageProof pos_prove(const StoredData& stored, const std::vector<std::uint64_t>& indices) {
  StorageProof p;
  for (auto idx : indices) {
    ChunkProof cp;
    cp.index = idx;
    if (stored.has_chunk(idx)) cp.chunk = *stored.chunks()[idx];
    cp.path = stored.path(idx);
    p.items.push_back(std::move(cp));
  }
  return p;
}

bool pos_verify(const StorageCommitment& c, const std::vector<std::uint64_t>& indices, const StorageProof& proof) {
  if (proof.items.size() != indices.size()) throw Error(Errc::MalformedProof, "proof count");
  const std::size_t depth = depth_for(c.leaf_count);
  bool ok = true;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& item = proof.items[i];
    if (item.index != indices[i] || item.path.size() != depth) throw Error(Errc::MalformedProof, "item " + std::to_string(i));
    if (item.chunk.empty()) {
      ok = false;
      continue;
    }
    Hash32 h = sha256(item.chunk);
    std::uint64_t idx = item.index;
    for (const auto& sib : item.path) {
      h = (idx & 1u) ? node_hash(sib, h) : node_hash(h, sib);
      idx >>= 1;
    }
    if (h != c.root) ok = false;
  }
  return ok;
}

AvailabilityResponse pow_avail_respond(const AvailabilityChallenge& ch, double hash_rate) {
  const auto nonce = pow_mine(ch.seed, ch.difficulty, ~std::uint64_t{0});
  AvailabilityResponse r;
  r.nonce = *nonce;
  const double trials = static_cast<double>(*nonce + 1);
  if (hash_rate <= 0.0)
    r.respond_height = std::numeric_limits<Height>::max();
  else
    r.respond_height = ch.issued_height + static_cast<Height>(std::ceil(trials / hash_rate));
  return r;
}

bool pow_avail_verify(const AvailabilityChallenge& ch, std::uint64_t nonce, Height respond_height) {
  return respond_height <= ch.deadline_height && pow_check(ch.seed, ch.difficulty, nonce);
}

int availability_difficulty(double hash_rate, Height window, double confidence) {
  const double trials = hash_rate * static_cast<double>(window);
  if (trials < 1.0) return 0;
  // Success needs at least one hit in `trials` attempts at p = 2^-d.
  const double p_needed = 1.0 - std::pow(1.0 - confidence, 1.0 / trials);
  int d = 0;
  while (d < 64 && std::ldexp(1.0, -(d + 1)) >= p_needed) ++d;
  return d;
}

nlohmann::json audit_json(const AuditRecord& r) {
  return {{"height", r.height}, {"tokenID", r.token_id}, {"kind", r.kind}, {"result", r.passed ? "pass" : "fail"}};
}

ContractState audit_tick(ContractState st, Height current_height, const std::map<std::uint64_t, ResourceProver>& provers,
                         const AuditConfig& cfg, std::vector<AuditRecord>* log) {
  if (cfg.period <= 0 || current_height % cfg.period != 0) return st;
  for (auto& [id, token] : st.tokens) {
    if (token.cancelled) continue;
    auto pit = provers.find(id);
    if (pit == provers.end()) continue;
    const ResourceProver& prover = pit->second;
    ByteWriter w;
    w.str("metachain-audit").u64(id).i64(current_height);
    const Hash32 seed = sha256(w.bytes());

    AuditRecord rec;
    rec.height = current_height;
    rec.token_id = id;
    if (token.resource == ResourceType::Disk) {
      rec.kind = "PoS";
      bool passed = false;
      if (prover.storage && prover.commitment.leaf_count > 0) {
        const std::size_t k = std::min<std::size_t>(cfg.k, prover.commitment.leaf_count);
        const auto idx = pos_challenge(prover.commitment, seed, k);
        passed = pos_verify(prover.commitment, idx, pos_prove(*prover.storage, idx));
        rec.gas = GasSchedule::kHash * k * (depth_for(prover.commitment.leaf_count) + 1);
      }
      rec.passed = passed;
    } else {
      rec.kind = "PoW";
      AvailabilityChallenge ch;
      ch.token_id = id;
      ch.seed = seed;
      ch.difficulty = availability_difficulty(cfg.idle_hash_rate, cfg.response_window);
      ch.issued_height = current_height;
      ch.deadline_height = current_height + cfg.response_window;
      const auto resp = pow_avail_respond(ch, prover.hash_rate);
      rec.passed = pow_avail_verify(ch, resp.nonce, resp.respond_height);
      rec.gas = GasSchedule::kHash;
    }
    rec.gas += GasSchedule::kRead + GasSchedule::kWrite;
    token.validity = rec.passed ? Validity::Proven : Validity::Unrentable;
    if (log) log->push_back(rec);
  }
  return st;
}

}  // namespace metachain
