#include "metachain/channels.hpp"

#include <algorithm>

namespace metachain {

std::string_view phase_name(ChannelPhase p) {
  switch (p) {
    case ChannelPhase::Opening: return "Opening";
    case ChannelPhase::Open: return "Open";
    case ChannelPhase::Closing: return "Closing";
    case ChannelPhase::Closed: return "Closed";
  }
  return "?";
}

Bytes Certificate::signing_bytes() const {
  ByteWriter w;
  w.str("metachain-cert").hash(channel_id).u64(seq).i64(balances[0]).i64(balances[1]).i64(timestamp);
  return std::move(w).take();
}

Bytes Certificate::encode() const {
  ByteWriter body;
  body.hash(channel_id).u64(seq).i64(balances[0]).i64(balances[1]).i64(timestamp);
  body.raw(sigs[0]).raw(sigs[1]);
  ByteWriter w;
  w.blob(body.bytes());
  return std::move(w).take();
}

Certificate Certificate::decode(ByteView data) {
  ByteReader r(data);
  const std::uint32_t len = r.u32();
  if (len != 32 + 8 + 16 + 8 + 128 || r.remaining() != len) throw Error(Errc::Truncated, "certificate length");
  Certificate c;
  c.channel_id = r.hash();
  c.seq = r.u64();
  c.balances = {r.i64(), r.i64()};
  c.timestamp = r.i64();
  for (auto& s : c.sigs) {
    const Bytes raw = r.raw(64);
    std::copy(raw.begin(), raw.end(), s.begin());
  }
  return c;
}

Bytes open_message(NodeId a, NodeId b, Amount deposit_a, Amount deposit_b, std::uint64_t nonce) {
  ByteWriter w;
  w.str("metachain-channel-open").u32(a).u32(b).i64(deposit_a).i64(deposit_b).u64(nonce);
  return std::move(w).take();
}

ChannelState ch_open(NodeId a, NodeId b, const PublicKey& key_a, const PublicKey& key_b, Amount deposit_a,
                     Amount deposit_b, const Signature& sig_a, const Signature& sig_b, std::uint64_t nonce) {
  if (deposit_a <= 0 || deposit_b <= 0) throw Error(Errc::ZeroDeposit);
  const Bytes msg = open_message(a, b, deposit_a, deposit_b, nonce);
  if (!verify_signature(key_a, msg, sig_a)) throw Error(Errc::BadSignature, "party a");
  if (!verify_signature(key_b, msg, sig_b)) throw Error(Errc::BadSignature, "party b");
  ChannelState st;
  st.parties = {a, b};
  st.keys = {key_a, key_b};
  st.deposits = {deposit_a, deposit_b};
  st.balances = st.deposits;
  st.phase = ChannelPhase::Open;
  st.channel_id = sha256(msg);
  return st;
}

Certificate ch_transfer(ChannelState& state, Amount amount, Direction dir, Tick timestamp, const KeyPair& key_a,
                        const KeyPair& key_b) {
  if (state.phase != ChannelPhase::Open) throw Error(Errc::WrongPhase, std::string(phase_name(state.phase)));
  const int payer = dir == Direction::AtoB ? 0 : 1;
  if (amount < 0 || amount > state.balances[payer]) throw Error(Errc::InsufficientBalance);
  Certificate c;
  c.channel_id = state.channel_id;
  c.seq = state.seq + 1;
  c.balances = state.balances;
  c.balances[payer] -= amount;
  c.balances[1 - payer] += amount;
  c.timestamp = timestamp;
  const Bytes msg = c.signing_bytes();
  c.sigs = {key_a.sign(msg), key_b.sign(msg)};
  state.balances = c.balances;
  state.seq = c.seq;
  return c;
}

bool certificate_valid(const ChannelState& state, const Certificate& cert) {
  if (cert.channel_id != state.channel_id) return false;
  if (cert.balances[0] < 0 || cert.balances[1] < 0) return false;
  if (cert.balances[0] + cert.balances[1] != state.total()) return false;
  const Bytes msg = cert.signing_bytes();
  return verify_signature(state.keys[0], msg, cert.sigs[0]) && verify_signature(state.keys[1], msg, cert.sigs[1]);
}

namespace {

// Seq 0 settles at the opening deposits; nothing to sign.
Certificate opening_certificate(const ChannelState& st) {
  Certificate c;
  c.channel_id = st.channel_id;
  c.balances = st.deposits;
  return c;
}

}  // namespace

ChannelState ch_close(ChannelState state, const Certificate& cert, NodeId closer, Height current, Height window) {
  if (state.phase != ChannelPhase::Open) throw Error(Errc::WrongPhase, std::string(phase_name(state.phase)));
  if (closer != state.parties[0] && closer != state.parties[1]) throw Error(Errc::UnknownNode, "closer");
  if (cert.seq == 0) {
    if (cert.balances != state.deposits || cert.channel_id != state.channel_id) throw Error(Errc::BadSignature);
    state.proposed = opening_certificate(state);
  } else {
    if (!certificate_valid(state, cert)) throw Error(Errc::BadSignature);
    state.proposed = cert;
  }
  state.phase = ChannelPhase::Closing;
  state.dispute_deadline = current + window;
  return state;
}

ChannelState ch_appeal(ChannelState state, const Certificate& better, Height current) {
  if (state.phase != ChannelPhase::Closing) throw Error(Errc::WrongPhase, std::string(phase_name(state.phase)));
  if (current > *state.dispute_deadline) throw Error(Errc::DisputeWindowClosed);
  if (!certificate_valid(state, better)) throw Error(Errc::BadSignature);
  if (better.seq <= state.proposed->seq) throw Error(Errc::NotNewer);
  state.proposed = better;
  return state;
}

ChannelState ch_finalize(ChannelState state, Height current) {
  if (state.phase != ChannelPhase::Closing) throw Error(Errc::WrongPhase, std::string(phase_name(state.phase)));
  if (current <= *state.dispute_deadline) throw Error(Errc::DisputeWindowOpen);
  state.balances = state.proposed->balances;
  state.seq = state.proposed->seq;
  state.phase = ChannelPhase::Closed;
  return state;
}

std::array<Amount, 2> ch_payouts(const ChannelState& state) {
  if (state.phase != ChannelPhase::Closed) throw Error(Errc::WrongPhase, std::string(phase_name(state.phase)));
  return state.balances;
}

}  // namespace metachain
