#pragma once

#include <optional>

#include "metachain/common.hpp"
#include "metachain/crypto.hpp"

namespace metachain {

enum class ChannelPhase { Opening, Open, Closing, Closed };
std::string_view phase_name(ChannelPhase p);

/// Payer side of a transfer: AtoB debits parties[0].
enum class Direction { AtoB, BtoA };

inline constexpr Height kDisputeWindow = 10;

struct Certificate {
  Hash32 channel_id{};
  std::uint64_t seq = 0;
  std::array<Amount, 2> balances{};
  Tick timestamp = 0;
  std::array<Signature, 2> sigs{};

  /// The bytes both parties sign.
  Bytes signing_bytes() const;
  /// u32 body length, then channel_id | seq | balances | timestamp | sigs.
  Bytes encode() const;
  static Certificate decode(ByteView data);

  bool operator==(const Certificate&) const = default;
};

struct ChannelState {
  Hash32 channel_id{};
  std::array<NodeId, 2> parties{};
  std::array<PublicKey, 2> keys{};
  std::array<Amount, 2> deposits{};
  std::array<Amount, 2> balances{};
  std::uint64_t seq = 0;
  ChannelPhase phase = ChannelPhase::Opening;
  std::optional<Height> dispute_deadline;
  std::optional<Certificate> proposed;  // settlement on the table while Closing

  Amount total() const { return deposits[0] + deposits[1]; }
  bool operator==(const ChannelState&) const = default;
};

/// What each party signs to open: both ids, both deposits and a nonce.
Bytes open_message(NodeId a, NodeId b, Amount deposit_a, Amount deposit_b, std::uint64_t nonce);

ChannelState ch_open(NodeId a, NodeId b, const PublicKey& key_a, const PublicKey& key_b, Amount deposit_a,
                     Amount deposit_b, const Signature& sig_a, const Signature& sig_b, std::uint64_t nonce = 0);

/// Off-chain update; both key pairs sign the new balances.
Certificate ch_transfer(ChannelState& state, Amount amount, Direction dir, Tick timestamp, const KeyPair& key_a,
                        const KeyPair& key_b);

bool certificate_valid(const ChannelState& state, const Certificate& cert);

ChannelState ch_close(ChannelState state, const Certificate& cert, NodeId closer, Height current,
                      Height window = kDisputeWindow);
ChannelState ch_appeal(ChannelState state, const Certificate& better, Height current);
ChannelState ch_finalize(ChannelState state, Height current);

/// Final payouts of a Closed channel.
std::array<Amount, 2> ch_payouts(const ChannelState& state);

}  // namespace metachain
