#pragma once

#include <map>

#include "metachain/common.hpp"

namespace metachain {

using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

Hash32 sha256(ByteView data);
inline Hash32 sha256(const Bytes& data) { return sha256(ByteView(data)); }
Hash32 sha256(std::string_view text);

/// Number of leading zero bits, MSB first.
int leading_zero_bits(const Hash32& h);

/// First 8 bytes interpreted big-endian.
std::uint64_t hash_prefix_u64(const Hash32& h);

/// Ed25519 key pair derived deterministically from a 32-byte seed.
struct KeyPair {
  PublicKey pub{};
  std::array<std::uint8_t, 64> secret{};

  static KeyPair from_seed(const Hash32& seed);
  Signature sign(ByteView message) const;
};

bool verify_signature(const PublicKey& pub, ByteView message, const Signature& sig);

/// Deterministic per-node keys, one world seed for everyone.
class KeyRing {
 public:
  explicit KeyRing(std::uint64_t seed) : seed_(seed) {}
  const KeyPair& keys(NodeId node);
  const PublicKey& pub(NodeId node) { return keys(node).pub; }

 private:
  std::uint64_t seed_;
  std::map<NodeId, KeyPair> cache_;
};

}  // namespace metachain
