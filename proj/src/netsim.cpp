#include <cmath>

#include "world_impl.hpp"

namespace metachain {

RunMetrics World::Impl::run(Tick duration, bool stop_when_drained) {
  if (!started) {
    started = true;
    start_engine();
  }
  const Tick stall_window = engine.block_interval_ticks * tuning.stall_window_blocks;
  while (!queue.empty() && !stalled) {
    const Event e = queue.top();
    if (e.t > duration) break;
    queue.pop();
    now = e.t;
    switch (e.type) {
      case Ev::RoundStart: round_start_ev(e); break;
      case Ev::RoundTimeout: round_timeout_ev(e); break;
      case Ev::RoundEnd: round_end_ev(e); break;
      case Ev::Approval: approval_ev(e); break;
      case Ev::PoaCommit: poa_commit_ev(e); break;
      case Ev::ApprovalAudit: approval_audit_ev(e); break;
      case Ev::BlockArrive: block_arrive_ev(e); break;
      case Ev::Mine: mine_ev(e); break;
      case Ev::BeaconElect: beacon_ev(e); break;
      case Ev::Toggle: toggle_ev(e); break;
      case Ev::FaultOn: fault_on_ev(e); break;
      case Ev::SyncDone: sync_done_ev(e); break;
      case Ev::Emit: emit_ev(e); break;
    }
    const bool waiting = available(now) > committed_txs;
    if (waiting && now - std::max(last_progress, workload.start) > stall_window) {
      stalled = true;
      log("stall", {{"height", blocks[static_cast<std::size_t>(committed_tip)].height},
                    {"committed", committed_txs},
                    {"lastProgress", last_progress}});
    }
    if (stop_when_drained && committed_txs >= workload.tx_count) break;
  }
  if (queue.empty() && committed_txs < workload.tx_count && !stalled) {
    stalled = true;
    log("stall", {{"height", blocks[static_cast<std::size_t>(committed_tip)].height}, {"committed", committed_txs}});
  }
  return metrics();
}

RunMetrics World::Impl::metrics() const {
  RunMetrics m;
  m.submitted = std::upper_bound(submit.begin(), submit.end(), now) - submit.begin();
  m.committed = committed_txs;
  m.stalled = stalled;
  if (stalled || committed_txs == 0) {
    m.tps = 0.0;
    m.lat_p50 = m.lat_p95 = RunMetrics::kInfinity;
  } else {
    m.elapsed = std::max<Tick>(1, last_commit_tick - submit.front());
    m.tps = static_cast<double>(committed_txs) / (static_cast<double>(m.elapsed) / 1000.0);
    std::vector<double> lat;
    lat.reserve(static_cast<std::size_t>(committed_txs));
    for (std::int64_t i = 0; i < committed_txs; ++i)
      lat.push_back(static_cast<double>(commit_at[static_cast<std::size_t>(i)] - submit[static_cast<std::size_t>(i)]));
    m.lat_p50 = percentile(lat, 0.5);
    m.lat_p95 = percentile(lat, 0.95);
  }
  std::map<std::string, std::pair<double, int>> per;
  double total = 0.0;
  int count = 0;
  for (const auto& s : switches) {
    if (!s.activation_tick) continue;
    const auto d = static_cast<double>(*s.activation_tick - s.emit_tick);
    auto& slot = per["switch:" + std::string(kind_name(s.from)) + "->" + std::string(kind_name(s.to))];
    slot.first += d;
    ++slot.second;
    total += d;
    ++count;
  }
  for (const auto& [k, v] : per) m.per_op_latency[k] = v.first / v.second;
  if (count > 0) m.switch_latency = total / count;
  if (!m.stalled && committed_txs > 0) m.per_op_latency["commit_p50"] = m.lat_p50;
  return m;
}

World::World(NetworkParams params, EngineConfig engine, Workload workload, SimTuning tuning)
    : impl_(std::make_unique<Impl>(std::move(params), std::move(engine), workload, tuning)) {}
World::~World() = default;
World::World(World&&) noexcept = default;
World& World::operator=(World&&) noexcept = default;

void World::inject_fault(NodeId node, FaultKind kind, FaultSchedule schedule) {
  impl_->add_fault(node, kind, schedule);
}
void World::set_controller(ControllerHook hook) { impl_->hook = std::move(hook); }
void World::trace_messages(bool on) { impl_->trace = on; }
RunMetrics World::run(Tick duration, bool stop_when_drained) { return impl_->run(duration, stop_when_drained); }

const LedgerView& World::ledger() const { return impl_->mirror; }
const std::vector<EventRecord>& World::events() const { return impl_->events; }
const std::vector<MessageRecord>& World::messages() const { return impl_->messages; }
const std::vector<SwitchRecord>& World::switches() const { return impl_->switches; }
ConsensusKind World::current_engine() const { return impl_->engine.kind; }
const std::vector<std::pair<std::uint64_t, NodeId>>& World::skipped_rounds() const { return impl_->skipped; }
const std::vector<std::pair<Tick, NodeId>>& World::syncs() const { return impl_->syncs; }
std::vector<NodeId> World::committed_proposers() const { return impl_->commit_proposers; }
const std::map<NodeId, Amount>& World::stakes() const { return impl_->stakes; }

double World::observed_failure_rate(NodeId observer, NodeId subject) const {
  const auto e = observed_expected(observer, subject);
  if (e == 0) return 0.0;
  return static_cast<double>(impl_->obs_failed[static_cast<std::size_t>(observer) * impl_->nodes.size() + subject]) /
         static_cast<double>(e);
}

std::int64_t World::observed_expected(NodeId observer, NodeId subject) const {
  const auto n = impl_->nodes.size();
  if (observer >= n || subject >= n) throw Error(Errc::UnknownNode);
  return impl_->obs_expected[static_cast<std::size_t>(observer) * n + subject];
}

std::vector<NodeId> World::faulty_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < impl_->nodes.size(); ++i)
    if (impl_->nodes[i].fault) out.push_back(static_cast<NodeId>(i));
  return out;
}

}  // namespace metachain
