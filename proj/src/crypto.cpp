#include "metachain/crypto.hpp"

#include <openssl/sha.h>
#include <sodium.h>

namespace metachain {

namespace {
struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  }
};
void ensure_sodium() { static SodiumInit once; }
}  // namespace

Hash32 sha256(ByteView data) {
  Hash32 out;
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Hash32 sha256(std::string_view text) {
  return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int leading_zero_bits(const Hash32& h) {
  int bits = 0;
  for (auto b : h) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    for (int i = 7; i >= 0 && !(b >> i & 1); --i) ++bits;
    break;
  }
  return bits;
}

std::uint64_t hash_prefix_u64(const Hash32& h) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | h[static_cast<std::size_t>(i)];
  return v;
}

KeyPair KeyPair::from_seed(const Hash32& seed) {
  ensure_sodium();
  KeyPair kp;
  crypto_sign_seed_keypair(kp.pub.data(), kp.secret.data(), seed.data());
  return kp;
}

Signature KeyPair::sign(ByteView message) const {
  ensure_sodium();
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret.data());
  return sig;
}

bool verify_signature(const PublicKey& pub, ByteView message, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), pub.data()) == 0;
}

const KeyPair& KeyRing::keys(NodeId node) {
  auto it = cache_.find(node);
  if (it != cache_.end()) return it->second;
  ByteWriter w;
  w.str("metachain-node-key").u64(seed_).u32(node);
  return cache_.emplace(node, KeyPair::from_seed(sha256(w.bytes()))).first->second;
}

}  // namespace metachain
