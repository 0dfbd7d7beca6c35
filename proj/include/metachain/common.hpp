#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metachain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Hash32 = std::array<std::uint8_t, 32>;
using NodeId = std::uint32_t;
using Amount = std::int64_t;
using Tick = std::int64_t;
using Height = std::int64_t;

/// Every failure the library reports. Grouped by the module that raises it.
enum class Errc {
  // ledger
  UnknownParent,
  WrongParentArity,
  DuplicateBlock,
  BadBlockHash,
  BadHeight,
  NotAnchored,
  WrongMode,
  ConvertHeightTooLow,
  NoCandidateAtHeight,
  EmptyCandidates,
  // consensus
  MalformedMeta,
  EmptyAuthorities,
  NoVoters,
  NotMyTurn,
  PowNotFound,
  SameKind,
  HeightInPast,
  AlreadyResolved,
  CoolDown,
  BadConfig,
  // netsim
  UnknownNode,
  EmptyGrid,
  InvalidParams,
  // contracts
  OutOfGas,
  UnknownFunction,
  BadArguments,
  InsufficientFunds,
  AlreadyVoted,
  ThresholdNotMet,
  NoPendingConversion,
  ZeroPrice,
  UnknownToken,
  TokenUnproven,
  AlreadyRented,
  InsufficientDeposit,
  NoActiveRental,
  NotRenterBeforeTimeout,
  NotOwner,
  ActiveRentalExists,
  TooFewParticipants,
  ZeroDeposit,
  RentalFailed,
  UnknownCluster,
  WrongState,
  MissingSignature,
  UnknownChannel,
  // proofs
  EmptyData,
  KTooLarge,
  MalformedProof,
  // channels
  BadSignature,
  InsufficientBalance,
  WrongPhase,
  DisputeWindowOpen,
  DisputeWindowClosed,
  NotNewer,
  // trust
  TooFewMembers,
  NoRatings,
  NotEvaluated,
  // adaptive
  IncompleteGrid,
  TooFewSamples,
  BadModel,
  // codec
  Truncated,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  explicit Error(Errc code, const std::string& detail = {});
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

std::string to_hex(ByteView bytes);
inline std::string to_hex(const Hash32& h) { return to_hex(ByteView(h)); }
Bytes from_hex(std::string_view hex);
Hash32 hash_from_hex(std::string_view hex);

/// Big-endian canonical encoder used for every hashed or signed structure.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
  }
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  ByteWriter& raw(ByteView v) {
    out_.insert(out_.end(), v.begin(), v.end());
    return *this;
  }
  ByteWriter& hash(const Hash32& h) { return raw(ByteView(h)); }
  // u32 length prefix followed by the bytes
  ByteWriter& blob(ByteView v) {
    u32(static_cast<std::uint32_t>(v.size()));
    return raw(v);
  }
  ByteWriter& str(std::string_view s) {
    return blob(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView in) : in_(in) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  Hash32 hash();
  Bytes raw(std::size_t n);
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace metachain
