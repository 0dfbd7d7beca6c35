#pragma once

#include "metachain/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "metachain/contracts.hpp"

namespace metachain {

namespace sim {

enum class Ev {
  RoundStart,
  RoundTimeout,
  RoundEnd,
  Approval,
  PoaCommit,
  ApprovalAudit,
  BlockArrive,
  Mine,
  BeaconElect,
  Toggle,
  FaultOn,
  SyncDone,
  Emit,
};

struct Event {
  Tick t = 0;
  std::uint64_t seq = 0;
  Ev type = Ev::RoundStart;
  std::uint64_t gen = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
};

struct Later {
  bool operator()(const Event& x, const Event& y) const {
    return x.t != y.t ? x.t > y.t : x.seq > y.seq;
  }
};

struct SimBlock {
  int parent = -1;
  Height height = 0;
  NodeId proposer = 0;
  Tick created = 0;
  std::int64_t tx_begin = 0;
  std::int64_t tx_end = 0;
  Hash32 hash{};
  bool committed = false;
};

struct NodeState {
  HardwareClass hw = HardwareClass::Large;
  std::optional<FaultKind> fault;
  Tick fault_start = 0;
  bool fault_live = false;
  bool online = true;
  bool syncing = false;
  bool barred = false;
  int tip = 0;
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace sim

using namespace sim;

struct World::Impl {
  NetworkParams params;
  EngineConfig engine;
  Workload workload;
  SimTuning tuning;
  std::map<NodeId, Amount> stakes;
  std::vector<NodeState> nodes;
  KeyRing keys;
  std::mt19937_64 lat_rng, mine_rng, winner_rng, gossip_rng;

  std::priority_queue<Event, std::vector<Event>, Later> queue;
  std::uint64_t seq = 0;
  Tick now = 0;

  std::vector<Tick> submit;
  std::vector<Tick> commit_at;
  std::int64_t committed_txs = 0;
  Tick last_commit_tick = -1;
  Tick last_progress = 0;
  bool stalled = false;

  std::vector<SimBlock> blocks;
  int committed_tip = 0;
  int head = 0;
  LedgerView mirror;
  std::vector<NodeId> commit_proposers;

  // leader-scheduled engines
  std::uint64_t gen = 0;
  std::uint64_t round = 0;
  Tick round_start = 0;
  bool round_open = false;
  int round_block = -1;
  Tick leader_busy = 0;
  std::map<std::uint64_t, std::set<NodeId>> approvals;
  std::map<std::uint64_t, NodeId> round_leader;
  bool poa_committed = false;
  int approvals_processed = 0;

  // PoW
  std::uint64_t mine_gen = 0;
  bool beacon_scheduled = false;

  // observations
  std::vector<std::int64_t> obs_expected, obs_failed;
  std::set<NodeId> flag_slot;    // missed a proposer slot; cleared by proposing
  std::set<NodeId> flag_silent;  // missed an approval or heartbeat; cleared by answering
  std::map<NodeId, std::vector<Tick>> churn_toggles;  // empty vector: periodic

  // control plane
  ControllerHook hook;
  bool action_in_flight = false;
  std::optional<ControlAction> decided;
  std::optional<ControlAction> emitted;
  Tick emitted_tick = 0;
  bool started = false;
  std::optional<std::size_t> switch_slot;
  SwitchGovernor governor;
  std::optional<SwitchProposal> scheduled_switch;
  LedgerConversionState conversion;
  std::vector<double> recent_latency;

  std::vector<EventRecord> events;
  std::vector<MessageRecord> messages;
  std::vector<SwitchRecord> switches;
  std::vector<std::pair<std::uint64_t, NodeId>> skipped;
  std::vector<std::pair<Tick, NodeId>> syncs;
  bool trace = false;

  Impl(NetworkParams p, EngineConfig e, Workload w, SimTuning t)
      : params(std::move(p)),
        engine(std::move(e)),
        workload(w),
        tuning(t),
        keys(params.seed),
        lat_rng(sub_seed(params.seed, "latency")),
        mine_rng(sub_seed(params.seed, "mining")),
        winner_rng(sub_seed(params.seed, "winner")),
        gossip_rng(sub_seed(params.seed, "gossip")) {
    params.validate();
    engine.validate();
    if (workload.tx_count < 0 || !(workload.rate_tps > 0.0))
      throw Error(Errc::InvalidParams, "workload rate must be positive");
    stakes = seeded_stakes(params);
    const auto n = static_cast<std::size_t>(params.node_count);
    nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i].hw = params.hw_of(static_cast<NodeId>(i));
    obs_expected.assign(n * n, 0);
    obs_failed.assign(n * n, 0);

    submit.resize(static_cast<std::size_t>(workload.tx_count));
    for (std::int64_t i = 0; i < workload.tx_count; ++i)
      submit[static_cast<std::size_t>(i)] =
          workload.start + static_cast<Tick>(std::floor(static_cast<double>(i) * 1000.0 / workload.rate_tps));
    commit_at.assign(submit.size(), -1);

    SimBlock g;
    g.hash = mirror.genesis().blockhash;
    g.committed = true;
    blocks.push_back(g);

    conversion.threshold =
        static_cast<int>(std::ceil(tuning.trigger_threshold * static_cast<double>(params.node_count) - 1e-9));

    // Faults from fault_ratio land on the highest-stake nodes.
    const auto faulty = static_cast<int>(std::floor(params.fault_ratio * params.node_count + 1e-9));
    if (faulty > 0) {
      std::vector<std::pair<Amount, NodeId>> ranked;
      for (const auto& [id, s] : stakes) ranked.emplace_back(-s, id);
      std::sort(ranked.begin(), ranked.end());
      for (int i = 0; i < faulty; ++i) {
        FaultSchedule sch;
        sch.start = params.fault_start;
        add_fault(ranked[static_cast<std::size_t>(i)].second, params.fault_kind, sch);
      }
    }
  }

  // ---- small helpers ------------------------------------------------------

  void push(Tick t, Ev type, std::uint64_t g = 0, std::int64_t a = 0, std::int64_t b = 0) {
    queue.push(Event{t, seq++, type, g, a, b});
  }

  Tick latency() {
    return params.latency_base + static_cast<Tick>(uniform_below(lat_rng, static_cast<std::uint64_t>(params.latency_jitter) + 1));
  }

  int n() const { return params.node_count; }
  NodeState& node(NodeId id) { return nodes[id]; }

  bool silent(NodeId id) const {
    const auto& s = nodes[id];
    return s.fault_live && s.fault == FaultKind::SilentStop;
  }
  bool mute(NodeId id) const {
    const auto& s = nodes[id];
    return s.fault_live && s.fault == FaultKind::MuteMiner;
  }
  /// Sends and receives messages.
  bool responsive(NodeId id) const { return nodes[id].online && !silent(id); }
  /// May vote, approve or sign.
  bool participates(NodeId id) const { return responsive(id) && !nodes[id].syncing && !nodes[id].barred; }
  bool can_propose(NodeId id) const { return participates(id) && !mute(id); }

  Tick upload_ticks(double bytes) const { return static_cast<Tick>(std::ceil(bytes / params.bandwidth_bytes_per_tick)); }

  std::int64_t available(Tick t) const {
    return std::upper_bound(submit.begin(), submit.end(), t - params.latency_base) - submit.begin();
  }

  void log(std::string kind, nlohmann::json detail) {
    events.push_back(EventRecord{now, std::move(kind), std::move(detail)});
  }

  void note_message(Tick sent, Tick delivered, NodeId from, NodeId to, const char* kind) {
    if (trace) messages.push_back(MessageRecord{sent, delivered, from, to, kind});
  }

  void observe(NodeId observer, NodeId subject, bool failed) {
    const auto idx = static_cast<std::size_t>(observer) * nodes.size() + subject;
    ++obs_expected[idx];
    if (failed) ++obs_failed[idx];
  }

  /// Every responsive peer sees the subject miss (or perform) a duty.
  void witness(NodeId subject, bool failed, std::set<NodeId>& flags) {
    for (int o = 0; o < n(); ++o) {
      const auto obs = static_cast<NodeId>(o);
      if (obs != subject && responsive(obs)) observe(obs, subject, failed);
    }
    if (failed)
      flags.insert(subject);
    else
      flags.erase(subject);
  }

  double observed_fault_ratio() const {
    std::set<NodeId> all = flag_slot;
    all.insert(flag_silent.begin(), flag_silent.end());
    return static_cast<double>(all.size()) / n();
  }

  void add_fault(NodeId id, FaultKind kind, const FaultSchedule& sch);

  // ---- engines (world_engines.cpp) ------------------------------------------
  void start_engine();
  void round_start_ev(const Event& e);
  void round_timeout_ev(const Event& e);
  void round_end_ev(const Event& e);
  void approval_ev(const Event& e);
  void poa_commit_ev(const Event& e);
  void approval_audit_ev(const Event& e);
  void close_round(Tick next_start);
  int make_block(int parent, NodeId proposer);
  void tdpos_lib();

  double live_hash_weight() const;
  void schedule_mine();
  void mine_ev(const Event& e);
  void block_arrive_ev(const Event& e);
  bool better(int a, int b) const;
  bool extends_committed(int b) const;
  void beacon_ev(const Event& e);

  // ---- control plane (world_control.cpp) ------------------------------------
  void commit_through(int b);
  void on_committed(int b);
  void controller_tick();
  void emit_ev(const Event& e);
  std::vector<Transaction> include_action(int b);
  void resolve_switch(Height h);
  void convert_ledger(Height h);
  void mirror_append(int b, std::vector<Transaction> txs);
  void activate();
  void toggle_ev(const Event& e);
  void fault_on_ev(const Event& e);
  void sync_done_ev(const Event& e);
  void heartbeat();

  RunMetrics run(Tick duration, bool stop_when_drained);
  RunMetrics metrics() const;
};

}  // namespace metachain
