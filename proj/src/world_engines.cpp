#include <cmath>

#include "world_impl.hpp"

namespace metachain {

namespace {

Tick round_timeout(const EngineConfig& e, const SimTuning& t) { return e.block_interval_ticks * t.round_timeout_blocks; }

}  // namespace

void World::Impl::start_engine() {
  ++gen;
  ++mine_gen;
  round_open = false;
  beacon_scheduled = false;
  if (engine.kind == ConsensusKind::PoW) {
    for (auto& s : nodes) s.tip = head;
    schedule_mine();
  } else {
    push(now, Ev::RoundStart, gen);
  }
}

int World::Impl::make_block(int parent, NodeId proposer) {
  SimBlock b;
  b.parent = parent;
  const SimBlock& p = blocks[static_cast<std::size_t>(parent)];
  b.height = p.height + 1;
  b.proposer = proposer;
  b.created = now;
  b.tx_begin = p.tx_end;
  b.tx_end = std::max(b.tx_begin, std::min<std::int64_t>(b.tx_begin + tuning.max_block_txs, available(now)));
  ByteWriter w;
  w.hash(p.hash).i64(b.height).u32(proposer).i64(now).i64(b.tx_begin).i64(b.tx_end);
  b.hash = sha256(w.bytes());
  blocks.push_back(b);
  return static_cast<int>(blocks.size() - 1);
}

// ---- PoA / TDPoS ---------------------------------------------------------------

void World::Impl::round_start_ev(const Event& e) {
  if (e.gen != gen) return;
  if (scheduled_switch && blocks[static_cast<std::size_t>(head)].height >= scheduled_switch->effective_height - 1) {
    if (!blocks[static_cast<std::size_t>(head)].committed) commit_through(head);
    activate();
    return;
  }
  const NodeId leader = *scheduled_proposer(engine, round);
  round_start = now;
  round_open = true;
  round_block = -1;
  poa_committed = false;
  approvals_processed = 0;
  leader_busy = now;
  const Tick timeout = round_timeout(engine, tuning);

  if (!can_propose(leader)) {
    skipped.emplace_back(round, leader);
    witness(leader, true, flag_slot);
    push(now + timeout, Ev::RoundTimeout, gen, static_cast<std::int64_t>(round));
    return;
  }
  witness(leader, false, flag_slot);

  const int b = make_block(head, leader);
  const SimBlock& blk = blocks[static_cast<std::size_t>(b)];
  const double bytes = tuning.header_bytes + static_cast<double>(blk.tx_end - blk.tx_begin) * tuning.tx_bytes;
  const double per_peer = bytes / params.bandwidth_bytes_per_tick;

  std::vector<NodeId> order;
  if (engine.kind == ConsensusKind::TDPoS) {
    const auto delegates = tdpos_elect(engine.votes, engine.delegate_count);
    for (NodeId d : delegates)
      if (d != leader) order.push_back(d);
    for (int i = 1; i < n(); ++i) {
      const auto peer = static_cast<NodeId>((leader + static_cast<NodeId>(i)) % static_cast<NodeId>(n()));
      if (std::find(delegates.begin(), delegates.end(), peer) == delegates.end()) order.push_back(peer);
    }
  } else {
    for (int i = 1; i < n(); ++i) order.push_back(static_cast<NodeId>((leader + static_cast<NodeId>(i)) % static_cast<NodeId>(n())));
  }

  double sent = static_cast<double>(now);
  for (NodeId peer : order) {
    sent += per_peer;
    const Tick out = static_cast<Tick>(std::ceil(sent));
    const Tick arrive = out + latency();
    note_message(out, arrive, leader, peer, "block");
    if (engine.kind == ConsensusKind::PoA && participates(peer)) {
      const Tick back = arrive + tuning.verify_ticks + latency();
      note_message(arrive + tuning.verify_ticks, back, peer, leader, "approval");
      push(back, Ev::Approval, gen, static_cast<std::int64_t>(round), peer);
    }
  }
  const Tick upload_end = static_cast<Tick>(std::ceil(sent));

  round_leader[round] = leader;
  if (engine.kind == ConsensusKind::PoA) {
    round_block = b;
    push(now + timeout, Ev::RoundTimeout, gen, static_cast<std::int64_t>(round));
    push(now + timeout, Ev::ApprovalAudit, 0, static_cast<std::int64_t>(round));
    const auto authorities = static_cast<int>(engine.authorities.size());
    const int quorum = (2 * authorities + 2) / 3;
    if (quorum <= 1) {
      poa_committed = true;
      push(now + tuning.verify_ticks, Ev::PoaCommit, gen, static_cast<std::int64_t>(round));
    }
  } else {
    head = b;
    round_leader.erase(round);
    const auto k = static_cast<Tick>(std::min<std::size_t>(static_cast<std::size_t>(engine.delegate_count), engine.votes.size()));
    push(upload_end + latency() + k * tuning.verify_ticks + tuning.tdpos_confirm_overhead, Ev::RoundEnd, gen,
         static_cast<std::int64_t>(round));
  }
}

void World::Impl::close_round(Tick next_start) {
  round_open = false;
  ++round;
  push(next_start, Ev::RoundStart, gen);
}

void World::Impl::round_timeout_ev(const Event& e) {
  if (e.gen != gen || static_cast<std::uint64_t>(e.a) != round || !round_open || poa_committed) return;
  close_round(now);
}

void World::Impl::approval_ev(const Event& e) {
  const auto r = static_cast<std::uint64_t>(e.a);
  approvals[r].insert(static_cast<NodeId>(e.b));
  if (e.gen != gen || r != round || !round_open || poa_committed) return;
  const Tick done = std::max(leader_busy, now) + tuning.verify_ticks;
  leader_busy = done;
  ++approvals_processed;
  const int quorum = (2 * static_cast<int>(engine.authorities.size()) + 2) / 3;
  if (1 + approvals_processed >= quorum) {
    poa_committed = true;
    push(done, Ev::PoaCommit, gen, e.a);
  }
}

void World::Impl::poa_commit_ev(const Event& e) {
  if (e.gen != gen || static_cast<std::uint64_t>(e.a) != round) return;
  head = round_block;
  commit_through(head);
  close_round(std::max(round_start + engine.block_interval_ticks, now));
}

void World::Impl::approval_audit_ev(const Event& e) {
  const auto r = static_cast<std::uint64_t>(e.a);
  auto it = round_leader.find(r);
  if (it != round_leader.end() && responsive(it->second)) {
    const auto& got = approvals[r];
    for (int i = 0; i < n(); ++i) {
      const auto peer = static_cast<NodeId>(i);
      if (peer == it->second) continue;
      const bool missed = got.count(peer) == 0;
      observe(it->second, peer, missed);
      if (missed && !participates(peer))
        flag_silent.insert(peer);
      else if (!missed)
        flag_silent.erase(peer);
    }
  }
  if (it != round_leader.end()) round_leader.erase(it);
  approvals.erase(r);
}

void World::Impl::round_end_ev(const Event& e) {
  if (e.gen != gen || static_cast<std::uint64_t>(e.a) != round) return;
  tdpos_lib();
  close_round(std::max(round_start + engine.block_interval_ticks, now));
}

// A block is final once more than 2/3 of the delegates have built on or
// after it.
void World::Impl::tdpos_lib() {
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(engine.delegate_count), engine.votes.size());
  std::set<NodeId> producers;
  for (int b = head; b >= 0 && b != committed_tip; b = blocks[static_cast<std::size_t>(b)].parent) {
    producers.insert(blocks[static_cast<std::size_t>(b)].proposer);
    if (producers.size() * 3 > 2 * k) {
      commit_through(b);
      return;
    }
  }
}

// ---- PoW -------------------------------------------------------------------------

double World::Impl::live_hash_weight() const {
  double w = 0.0;
  for (int i = 0; i < n(); ++i)
    if (can_propose(static_cast<NodeId>(i))) w += hash_multiplier(nodes[static_cast<std::size_t>(i)].hw);
  return w;
}

// Difficulty is set at genesis so the nominal all-Large network averages
// pow_target_interval; a weaker or thinner network is proportionally slower.
void World::Impl::schedule_mine() {
  if (engine.kind != ConsensusKind::PoW) return;
  const double w = live_hash_weight();
  if (w <= 0.0) return;
  const double mean = static_cast<double>(tuning.pow_target_interval) * 2.0 * n() / w;
  const double draw = -std::log(1.0 - unit_uniform(mine_rng));
  const Tick dt = std::max<Tick>(1, static_cast<Tick>(std::llround(draw * mean)));
  push(now + dt, Ev::Mine, mine_gen);
}

bool World::Impl::better(int a, int b) const {
  const auto& x = blocks[static_cast<std::size_t>(a)];
  const auto& y = blocks[static_cast<std::size_t>(b)];
  if (x.height != y.height) return x.height > y.height;
  return x.hash < y.hash;
}

bool World::Impl::extends_committed(int b) const {
  const Height ch = blocks[static_cast<std::size_t>(committed_tip)].height;
  while (b >= 0 && blocks[static_cast<std::size_t>(b)].height > ch) b = blocks[static_cast<std::size_t>(b)].parent;
  return b == committed_tip;
}

void World::Impl::mine_ev(const Event& e) {
  if (e.gen != mine_gen || engine.kind != ConsensusKind::PoW) return;
  const double w = live_hash_weight();
  if (w <= 0.0) return;
  double pick = unit_uniform(winner_rng) * w;
  NodeId winner = 0;
  for (int i = 0; i < n(); ++i) {
    const auto id = static_cast<NodeId>(i);
    if (!can_propose(id)) continue;
    winner = id;
    pick -= hash_multiplier(nodes[id].hw);
    if (pick < 0.0) break;
  }
  NodeState& ws = nodes[winner];
  if (!extends_committed(ws.tip)) ws.tip = head;
  const Height eff = scheduled_switch ? scheduled_switch->effective_height : 0;
  if (scheduled_switch && blocks[static_cast<std::size_t>(ws.tip)].height >= eff - 1) {
    schedule_mine();
    return;
  }

  const int b = make_block(ws.tip, winner);
  ws.tip = b;
  flag_slot.erase(winner);
  const SimBlock& blk = blocks[static_cast<std::size_t>(b)];
  const double bytes = tuning.header_bytes + static_cast<double>(blk.tx_end - blk.tx_begin) * tuning.pow_relay_bytes_per_tx;
  const double per_hop = bytes / params.bandwidth_bytes_per_tick;

  std::vector<NodeId> order;
  for (int i = 0; i < n(); ++i) {
    const auto id = static_cast<NodeId>(i);
    if (id != winner && responsive(id)) order.push_back(id);
  }
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(gossip_rng, i)]);
  order.insert(order.begin(), winner);
  std::vector<Tick> arrival(order.size(), now);
  const auto fanout = static_cast<std::size_t>(std::max(1, tuning.pow_fanout));
  for (std::size_t p = 1; p < order.size(); ++p) {
    const std::size_t parent = (p - 1) / fanout;
    const auto j = static_cast<double>((p - 1) % fanout + 1);
    const Tick out = arrival[parent] + static_cast<Tick>(std::ceil(j * per_hop));
    arrival[p] = out + latency();
    note_message(out, arrival[p], order[parent], order[p], "block");
    push(arrival[p], Ev::BlockArrive, 0, order[p], b);
  }

  if (better(b, head) && extends_committed(b)) head = b;
  int c = head;
  for (int i = 0; i < tuning.pow_confirmations && c > 0; ++i) c = blocks[static_cast<std::size_t>(c)].parent;
  if (c > 0 && !blocks[static_cast<std::size_t>(c)].committed && extends_committed(c)) commit_through(c);

  if (scheduled_switch && blk.height == eff - 1 && !beacon_scheduled) {
    beacon_scheduled = true;
    push(now + 3 * (params.latency_base + params.latency_jitter), Ev::BeaconElect, mine_gen);
  }
  schedule_mine();
}

void World::Impl::block_arrive_ev(const Event& e) {
  const auto id = static_cast<NodeId>(e.a);
  const int b = static_cast<int>(e.b);
  if (!responsive(id)) return;
  NodeState& s = nodes[id];
  if (s.tip != b && better(b, s.tip) && extends_committed(b)) s.tip = b;
}

// Fork candidates at effective-1 are settled by the shared beacon; the
// incoming engine builds on the elected block.
void World::Impl::beacon_ev(const Event& e) {
  if (e.gen != mine_gen || !scheduled_switch) return;
  const Height target = scheduled_switch->effective_height - 1;
  std::vector<Hash32> candidates;
  std::map<Hash32, int> index;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].height == target && extends_committed(static_cast<int>(i))) {
      candidates.push_back(blocks[i].hash);
      index[blocks[i].hash] = static_cast<int>(i);
    }
  }
  if (candidates.empty()) return;
  std::sort(candidates.begin(), candidates.end());
  const Hash32 leader = beacon_elect(derive_beacon_seed(mirror, target + 1), candidates);
  log("beacon", {{"height", target}, {"candidates", candidates.size()}, {"leader", to_hex(leader)}});
  commit_through(index.at(leader));
  activate();
}

}  // namespace metachain
