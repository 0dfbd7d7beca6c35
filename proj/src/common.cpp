#include "metachain/common.hpp"

namespace metachain {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::UnknownParent: return "UnknownParent";
    case Errc::WrongParentArity: return "WrongParentArity";
    case Errc::DuplicateBlock: return "DuplicateBlock";
    case Errc::BadBlockHash: return "BadBlockHash";
    case Errc::BadHeight: return "BadHeight";
    case Errc::NotAnchored: return "NotAnchored";
    case Errc::WrongMode: return "WrongMode";
    case Errc::ConvertHeightTooLow: return "ConvertHeightTooLow";
    case Errc::NoCandidateAtHeight: return "NoCandidateAtHeight";
    case Errc::EmptyCandidates: return "EmptyCandidates";
    case Errc::MalformedMeta: return "MalformedMeta";
    case Errc::EmptyAuthorities: return "EmptyAuthorities";
    case Errc::NoVoters: return "NoVoters";
    case Errc::NotMyTurn: return "NotMyTurn";
    case Errc::PowNotFound: return "PowNotFound";
    case Errc::SameKind: return "SameKind";
    case Errc::HeightInPast: return "HeightInPast";
    case Errc::AlreadyResolved: return "AlreadyResolved";
    case Errc::CoolDown: return "CoolDown";
    case Errc::BadConfig: return "BadConfig";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::OutOfGas: return "OutOfGas";
    case Errc::UnknownFunction: return "UnknownFunction";
    case Errc::BadArguments: return "BadArguments";
    case Errc::InsufficientFunds: return "InsufficientFunds";
    case Errc::AlreadyVoted: return "AlreadyVoted";
    case Errc::ThresholdNotMet: return "ThresholdNotMet";
    case Errc::NoPendingConversion: return "NoPendingConversion";
    case Errc::ZeroPrice: return "ZeroPrice";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::TokenUnproven: return "TokenUnproven";
    case Errc::AlreadyRented: return "AlreadyRented";
    case Errc::InsufficientDeposit: return "InsufficientDeposit";
    case Errc::NoActiveRental: return "NoActiveRental";
    case Errc::NotRenterBeforeTimeout: return "NotRenterBeforeTimeout";
    case Errc::NotOwner: return "NotOwner";
    case Errc::ActiveRentalExists: return "ActiveRentalExists";
    case Errc::TooFewParticipants: return "TooFewParticipants";
    case Errc::ZeroDeposit: return "ZeroDeposit";
    case Errc::RentalFailed: return "RentalFailed";
    case Errc::UnknownCluster: return "UnknownCluster";
    case Errc::WrongState: return "WrongState";
    case Errc::MissingSignature: return "MissingSignature";
    case Errc::UnknownChannel: return "UnknownChannel";
    case Errc::EmptyData: return "EmptyData";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::MalformedProof: return "MalformedProof";
    case Errc::BadSignature: return "BadSignature";
    case Errc::InsufficientBalance: return "InsufficientBalance";
    case Errc::WrongPhase: return "WrongPhase";
    case Errc::DisputeWindowOpen: return "DisputeWindowOpen";
    case Errc::DisputeWindowClosed: return "DisputeWindowClosed";
    case Errc::NotNewer: return "NotNewer";
    case Errc::TooFewMembers: return "TooFewMembers";
    case Errc::NoRatings: return "NoRatings";
    case Errc::NotEvaluated: return "NotEvaluated";
    case Errc::IncompleteGrid: return "IncompleteGrid";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::BadModel: return "BadModel";
    case Errc::Truncated: return "Truncated";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(detail.empty() ? std::string(errc_name(code))
                                        : std::string(errc_name(code)) + ": " + detail),
      code_(code) {}

std::string to_hex(ByteView bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::Truncated, "odd hex length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::Truncated, "bad hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

Hash32 hash_from_hex(std::string_view hex) {
  Bytes b = from_hex(hex);
  if (b.size() != 32) throw Error(Errc::Truncated, "hash must be 32 bytes");
  Hash32 h;
  std::copy(b.begin(), b.end(), h.begin());
  return h;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  return *this;
}

void ByteReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw Error(Errc::Truncated);
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = v << 8 | in_[pos_++];
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | in_[pos_++];
  return v;
}

Hash32 ByteReader::hash() {
  need(32);
  Hash32 h;
  std::copy_n(in_.begin() + static_cast<std::ptrdiff_t>(pos_), 32, h.begin());
  pos_ += 32;
  return h;
}

Bytes ByteReader::raw(std::size_t n) {
  need(n);
  Bytes out(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
            in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

}  // namespace metachain
