#pragma once

#include <optional>

#include "metachain/contracts.hpp"

namespace metachain {

struct StorageCommitment {
  std::uint64_t token_id = 0;
  Hash32 root{};
  std::uint64_t leaf_count = 0;
  std::uint64_t chunk_size = 0;
  bool operator==(const StorageCommitment&) const = default;
};

std::vector<Bytes> split_chunks(ByteView data, std::size_t chunk_size);

/// Leaves are sha256(chunk); parents sha256(left || right); an odd level
/// repeats its last node.
Hash32 merkle_root(std::vector<Hash32> leaves);

StorageCommitment pos_commit(ByteView data, std::size_t chunk_size, std::uint64_t token_id = 0);

/// k distinct leaf indices from sha256(seed || root || counter) mod leafCount.
std::vector<std::uint64_t> pos_challenge(const StorageCommitment& c, const Hash32& seed, std::size_t k);

/// What a storage provider keeps: the full hash tree plus whichever chunks
/// it still holds.
class StoredData {
 public:
  StoredData(ByteView data, std::size_t chunk_size);
  void drop_chunk(std::uint64_t index);
  void corrupt_chunk(std::uint64_t index);
  bool has_chunk(std::uint64_t index) const;
  std::uint64_t leaf_count() const { return chunks_.size(); }
  const std::vector<std::optional<Bytes>>& chunks() const { return chunks_; }
  /// Sibling hashes from leaf to root.
  std::vector<Hash32> path(std::uint64_t index) const;

 private:
  std::vector<std::optional<Bytes>> chunks_;
  std::vector<std::vector<Hash32>> levels_;
};

struct ChunkProof {
  std::uint64_t index = 0;
  Bytes chunk;  // empty when the prover no longer has it
  std::vector<Hash32> path;
};

struct StorageProof {
  std::vector<ChunkProof> items;
};

StorageProof pos_prove(const StoredData& stored, const std::vector<std::uint64_t>& indices);
bool pos_verify(const StorageCommitment& c, const std::vector<std::uint64_t>& indices, const StorageProof& proof);

struct AvailabilityChallenge {
  std::uint64_t token_id = 0;
  Hash32 seed{};
  int difficulty = 0;
  Height issued_height = 0;
  Height deadline_height = 0;
};

struct AvailabilityResponse {
  std::uint64_t nonce = 0;
  Height respond_height = 0;
};

/// Mines hash(seed || nonce) for real; the owner's hash rate (hashes per
/// block) turns the trial count into the height the answer lands at.
AvailabilityResponse pow_avail_respond(const AvailabilityChallenge& ch, double hash_rate);
bool pow_avail_verify(const AvailabilityChallenge& ch, std::uint64_t nonce, Height respond_height);

/// Largest difficulty an owner with `hash_rate` meets within `window` blocks
/// with probability >= `confidence`.
int availability_difficulty(double hash_rate, Height window, double confidence = 0.99);

struct AuditConfig {
  Height period = 10;
  std::size_t k = 3;
  Height response_window = 5;
  double idle_hash_rate = 4096.0;  // hashes per block for an idle owner
};

/// The simulated physical side of one token.
struct ResourceProver {
  std::optional<StoredData> storage;   // Disk tokens
  StorageCommitment commitment;
  double hash_rate = 0.0;              // CPU/GPU tokens; 0 = busy or gone
};

struct AuditRecord {
  Height height = 0;
  std::uint64_t token_id = 0;
  std::string kind;    // "PoS" or "PoW"
  bool passed = false;
  std::uint64_t gas = 0;  // billed to the owner's account statement
};

nlohmann::json audit_json(const AuditRecord& r);

/// On audit heights, challenges every live token that has a prover and
/// updates its validity. Other heights are a no-op.
ContractState audit_tick(ContractState st, Height current_height, const std::map<std::uint64_t, ResourceProver>& provers,
                         const AuditConfig& cfg, std::vector<AuditRecord>* log = nullptr);

}  // namespace metachain
