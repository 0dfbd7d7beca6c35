#include <cmath>

#include "world_impl.hpp"

namespace metachain {

namespace {

constexpr NodeId kControllerNode = 0xFFFF'FFFFu;

nlohmann::json action_json(const ControlAction& a) {
  if (const auto* s = std::get_if<SwitchAction>(&a)) return {{"switch", kind_name(s->to)}};
  return {{"convert", mode_name(std::get<ConvertAction>(a).to)}};
}

Transaction control_tx(KeyRing& keys, NodeId sender, const nlohmann::json& body, std::uint64_t nonce) {
  const std::string text = body.dump();
  return Transaction::make(keys.keys(sender), sender, Bytes(text.begin(), text.end()), nonce);
}

}  // namespace

void World::Impl::commit_through(int b) {
  std::vector<int> path;
  for (int c = b; c != committed_tip; c = blocks[static_cast<std::size_t>(c)].parent) {
    if (c < 0 || blocks[static_cast<std::size_t>(c)].height <= blocks[static_cast<std::size_t>(committed_tip)].height)
      throw Error(Errc::NotAnchored, "commit does not extend the committed prefix");
    path.push_back(c);
  }
  for (auto it = path.rbegin(); it != path.rend(); ++it) on_committed(*it);
}

void World::Impl::mirror_append(int b, std::vector<Transaction> txs) {
  const SimBlock& sb = blocks[static_cast<std::size_t>(b)];
  Block blk;
  blk.height = sb.height;
  blk.parents = {mirror.committed().back()};
  blk.proposer = sb.proposer;
  blk.tick = sb.created;
  if (sb.tx_end > sb.tx_begin) {
    ByteWriter w;
    w.str("workload").i64(sb.tx_begin).i64(sb.tx_end);
    Transaction batch;
    batch.sender = sb.proposer;
    batch.payload = std::move(w).take();
    batch.nonce = static_cast<std::uint64_t>(sb.tx_begin);
    batch.txid = batch.compute_id();
    txs.push_back(std::move(batch));
  }
  blk.txs = std::move(txs);
  const Bytes header = blk.header_bytes();
  if (engine.kind == ConsensusKind::PoW) {
    blk.consensus_meta = encode_nonce(pow_mine(header, engine.difficulty, ~std::uint64_t{0}).value());
  } else {
    const Signature sig = keys.keys(sb.proposer).sign(header);
    blk.consensus_meta.assign(sig.begin(), sig.end());
  }
  blk.seal();
  mirror.append(blk);
  mirror.commit_through(blk.blockhash);
}

void World::Impl::on_committed(int b) {
  SimBlock& sb = blocks[static_cast<std::size_t>(b)];
  sb.committed = true;
  committed_tip = b;
  for (std::int64_t i = sb.tx_begin; i < sb.tx_end; ++i) {
    commit_at[static_cast<std::size_t>(i)] = now;
    recent_latency.push_back(static_cast<double>(now - submit[static_cast<std::size_t>(i)]));
  }
  if (sb.tx_end > sb.tx_begin) last_commit_tick = now;
  committed_txs = std::max(committed_txs, sb.tx_end);
  last_progress = now;
  commit_proposers.push_back(sb.proposer);

  const Height h = sb.height;
  mirror_append(b, include_action(b));
  if (governor.pending() && h >= governor.current()->vote_collect_height) resolve_switch(h);
  if ((conversion.pending && h >= conversion.pending->convert_height - 1) ||
      (conversion.proposal && h >= conversion.proposal->convert_height - 1))
    convert_ledger(h);
  if (tuning.controller_interval_blocks > 0 && h % tuning.controller_interval_blocks == 0) controller_tick();
}

std::vector<Transaction> World::Impl::include_action(int b) {
  const SimBlock& sb = blocks[static_cast<std::size_t>(b)];
  if (!emitted || sb.created < emitted_tick) return {};
  const ControlAction action = *emitted;
  emitted.reset();
  const Height h = sb.height;
  std::vector<NodeId> voters;
  for (int i = 0; i < n(); ++i)
    if (participates(static_cast<NodeId>(i))) voters.push_back(static_cast<NodeId>(i));

  std::vector<Transaction> txs;
  nlohmann::json body;
  if (const auto* s = std::get_if<SwitchAction>(&action)) {
    try {
      const auto& p = governor.propose(engine.kind, s->to, h + tuning.vote_collect_offset, tuning.trigger_threshold,
                                       h + tuning.effective_offset, h);
      if (switch_slot) switches[*switch_slot].proposal_id = p.proposal_id;
      body = {{"type", "switch"},
              {"proposalId", to_hex(p.proposal_id)},
              {"from", kind_name(p.from)},
              {"to", kind_name(p.to)},
              {"voteCollectHeight", p.vote_collect_height},
              {"effectiveHeight", p.effective_height}};
    } catch (const Error& e) {
      log("rejected", {{"height", h}, {"reason", errc_name(e.code())}});
      if (switch_slot) switches[*switch_slot].status = ProposalStatus::Failure;
      action_in_flight = false;
      return {};
    }
    for (NodeId v : voters) governor.vote(v);
  } else {
    const auto dir = std::get<ConvertAction>(action).to == LedgerMode::Dag ? ConversionDirection::ChainToDag
                                                                          : ConversionDirection::DagToChain;
    GasMeter gas(~std::uint64_t{0});
    try {
      lc_propose(conversion, dir, h + tuning.effective_offset, std::string(kind_name(engine.kind)), h, gas);
    } catch (const Error& e) {
      log("rejected", {{"height", h}, {"reason", errc_name(e.code())}});
      action_in_flight = false;
      return {};
    }
    for (NodeId v : voters) lc_vote(conversion, v, gas);
    body = {{"type", "conversion"},
            {"direction", direction_name(dir)},
            {"convertHeight", h + tuning.effective_offset},
            {"consensus", kind_name(engine.kind)}};
  }
  log("proposal", body);
  log("vote", {{"height", h}, {"voters", voters}, {"count", voters.size()}});
  txs.push_back(control_tx(keys, kControllerNode, body, static_cast<std::uint64_t>(h)));
  for (NodeId v : voters)
    txs.push_back(control_tx(keys, v, {{"type", "vote"}, {"on", body.at("type")}}, static_cast<std::uint64_t>(h)));
  return txs;
}

void World::Impl::resolve_switch(Height h) {
  const SwitchProposal p = governor.resolve(static_cast<std::size_t>(n()), h);
  log("switch", {{"proposalId", to_hex(p.proposal_id)},
                 {"from", kind_name(p.from)},
                 {"to", kind_name(p.to)},
                 {"status", status_name(p.status)},
                 {"votes", governor.vote_count()}});
  if (switch_slot) switches[*switch_slot].status = p.status;
  if (p.status != ProposalStatus::Success) {
    action_in_flight = false;
    return;
  }
  scheduled_switch = p;
  if (engine.kind == ConsensusKind::PoW && !beacon_scheduled) {
    for (const auto& blk : blocks)
      if (blk.height == p.effective_height - 1) {
        beacon_scheduled = true;
        push(now, Ev::BeaconElect, mine_gen);
        break;
      }
  }
}

void World::Impl::convert_ledger(Height h) {
  if (!conversion.pending) {
    log("conversion", {{"height", h}, {"status", "Failure"}, {"votes", conversion.vote_count}});
    lc_reset(conversion);
    action_in_flight = false;
    return;
  }
  const PendingConversion pc = *conversion.pending;
  const Height target = h + 1;
  if (pc.direction == ConversionDirection::ChainToDag)
    mirror = chain_to_dag(mirror, target, derive_beacon_seed(mirror, target));
  else
    mirror = dag_to_chain(mirror, target);
  log("conversion", {{"height", target},
                     {"direction", direction_name(pc.direction)},
                     {"consensus", pc.consensus_name},
                     {"status", "Success"}});
  lc_reset(conversion);
  action_in_flight = false;
}

void World::Impl::heartbeat() {
  for (int s = 0; s < n(); ++s) {
    const auto subject = static_cast<NodeId>(s);
    const bool failed = !responsive(subject);
    for (int o = 0; o < n(); ++o) {
      const auto obs = static_cast<NodeId>(o);
      if (obs != subject && responsive(obs)) observe(obs, subject, failed);
    }
    if (failed)
      flag_silent.insert(subject);
    else
      flag_silent.erase(subject);
  }
}

void World::Impl::controller_tick() {
  heartbeat();
  if (!hook || action_in_flight) {
    recent_latency.clear();
    return;
  }
  LiveStatus st;
  st.tick = now;
  st.height = blocks[static_cast<std::size_t>(committed_tip)].height;
  st.engine = engine.kind;
  st.ledger_mode = mirror.mode();
  st.node_count = n();
  st.observed_fault_ratio = observed_fault_ratio();
  st.hw = params.hw;
  st.recent_p50 = percentile(recent_latency, 0.5);
  st.link_latency_p50 = params.link_latency_p50();
  st.pool_size = std::max<std::int64_t>(0, available(now) - committed_txs);
  st.proposal_pending = false;
  recent_latency.clear();

  auto action = hook(st);
  if (action) {
    if (const auto* s = std::get_if<SwitchAction>(&*action); s && s->to == engine.kind) action.reset();
    if (const auto* c = std::get_if<ConvertAction>(&*action); c && c->to == mirror.mode()) action.reset();
  }
  nlohmann::json detail = {{"height", st.height},
                           {"engine", kind_name(st.engine)},
                           {"observedFaultRatio", st.observed_fault_ratio},
                           {"pool", st.pool_size},
                           {"action", action ? action_json(*action) : nlohmann::json()}};
  log("controller", detail);
  if (!action) return;
  action_in_flight = true;
  decided = action;
  switch_slot.reset();
  if (const auto* s = std::get_if<SwitchAction>(&*action)) {
    SwitchRecord rec;
    rec.from = engine.kind;
    rec.to = s->to;
    rec.decision_tick = now;
    switches.push_back(rec);
    switch_slot = switches.size() - 1;
  }
  push(now + tuning.inference_ticks, Ev::Emit);
}

void World::Impl::emit_ev(const Event&) {
  if (!decided) return;
  emitted = decided;
  decided.reset();
  emitted_tick = now;
  if (switch_slot) switches[*switch_slot].emit_tick = now;
  log("emit", action_json(*emitted));
}

void World::Impl::activate() {
  const SwitchProposal p = *scheduled_switch;
  scheduled_switch.reset();
  engine.kind = p.to;
  engine.validate();
  std::vector<NodeId> missed;
  for (int i = 0; i < n(); ++i) {
    auto& s = nodes[static_cast<std::size_t>(i)];
    if (!s.online || s.syncing) {
      s.barred = true;
      missed.push_back(static_cast<NodeId>(i));
    }
  }
  if (switch_slot) switches[*switch_slot].activation_tick = now;
  log("activated", {{"proposalId", to_hex(p.proposal_id)},
                    {"from", kind_name(p.from)},
                    {"to", kind_name(p.to)},
                    {"height", blocks[static_cast<std::size_t>(committed_tip)].height},
                    {"missed", missed}});
  action_in_flight = false;
  head = committed_tip;
  start_engine();
}

void World::Impl::add_fault(NodeId id, FaultKind kind, const FaultSchedule& sch) {
  if (id >= static_cast<NodeId>(n())) throw Error(Errc::UnknownNode, std::to_string(id));
  auto& s = nodes[id];
  s.fault = kind;
  s.fault_start = sch.start;
  s.fault_live = false;
  if (kind == FaultKind::Churn) churn_toggles[id] = sch.toggles;
  push(sch.start, Ev::FaultOn, 0, id);
}

void World::Impl::fault_on_ev(const Event& e) {
  const auto id = static_cast<NodeId>(e.a);
  auto& s = nodes[id];
  s.fault_live = true;
  log("fault", {{"node", id}, {"kind", fault_name(*s.fault)}});
  if (*s.fault == FaultKind::Churn) {
    const auto& t = churn_toggles[id];
    if (t.empty()) {
      push(now, Ev::Toggle, 1, id);
    } else {
      for (Tick at : t) push(at, Ev::Toggle, 0, id);
    }
  }
  if (engine.kind == ConsensusKind::PoW) {
    ++mine_gen;
    schedule_mine();
  }
}

// gen = 1 marks a periodic toggle that reschedules itself.
void World::Impl::toggle_ev(const Event& e) {
  const auto id = static_cast<NodeId>(e.a);
  auto& s = nodes[id];
  s.online = !s.online;
  log("churn", {{"node", id}, {"online", s.online}});
  if (s.online) {
    s.syncing = true;
    push(now + tuning.sync_ticks, Ev::SyncDone, 0, id);
  }
  if (e.gen == 1) push(now + tuning.churn_period, Ev::Toggle, 1, id);
  if (engine.kind == ConsensusKind::PoW) {
    ++mine_gen;
    schedule_mine();
  }
}

void World::Impl::sync_done_ev(const Event& e) {
  const auto id = static_cast<NodeId>(e.a);
  auto& s = nodes[id];
  if (!s.online) return;
  s.syncing = false;
  s.barred = false;
  s.tip = head;
  syncs.emplace_back(now, id);
  log("sync", {{"node", id}, {"engine", kind_name(engine.kind)}});
  if (engine.kind == ConsensusKind::PoW) {
    ++mine_gen;
    schedule_mine();
  }
}

}  // namespace metachain
