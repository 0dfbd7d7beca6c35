#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <variant>

#include "metachain/consensus.hpp"
#include "metachain/ledger.hpp"

namespace metachain {

enum class HardwareClass { Small, Large };
enum class FaultKind { SilentStop, Churn, MuteMiner };

std::string_view hw_name(HardwareClass hw);
HardwareClass hw_from_name(std::string_view name);
std::string_view fault_name(FaultKind kind);
FaultKind fault_from_name(std::string_view name);

/// PoW hash-rate multiplier: Small = 1x, Large = 2x.
inline double hash_multiplier(HardwareClass hw) { return hw == HardwareClass::Large ? 2.0 : 1.0; }

struct NetworkParams {
  int node_count = 10;
  Tick latency_base = 20;
  Tick latency_jitter = 10;  // uniform in [0, jitter]
  HardwareClass hw = HardwareClass::Large;
  std::map<NodeId, HardwareClass> hw_overrides;
  double fault_ratio = 0.0;
  FaultKind fault_kind = FaultKind::MuteMiner;
  Tick fault_start = 0;  // faults from fault_ratio activate here
  std::uint64_t seed = 1;
  double bandwidth_bytes_per_tick = 12'500.0;  // 100 Mbps at 1 tick = 1 ms

  void validate() const;
  HardwareClass hw_of(NodeId node) const;
  double link_latency_p50() const { return static_cast<double>(latency_base) + latency_jitter / 2.0; }
};

/// Protocol cost model. Defaults are the calibration used for every
/// shipped scenario.
struct SimTuning {
  int max_block_txs = 200;
  int tx_bytes = 250;
  int header_bytes = 200;
  int pow_relay_bytes_per_tx = 8;  // compact relay: short ids only
  Tick verify_ticks = 2;           // one signature check
  Tick tdpos_confirm_overhead = 3;
  int round_timeout_blocks = 10;   // x block interval
  Tick pow_target_interval = 200;  // nominal network-wide, Large hardware
  int pow_confirmations = 2;
  int pow_fanout = 8;
  int stall_window_blocks = 50;    // x block interval
  Tick sync_ticks = 200;
  Tick churn_period = 1000;
  Tick inference_ticks = 1000;     // model evaluation before a proposal is emitted
  int controller_interval_blocks = 20;
  Height vote_collect_offset = 5;
  Height effective_offset = 10;
  double trigger_threshold = 2.0 / 3.0;
};

struct Workload {
  std::int64_t tx_count = 20000;
  double rate_tps = 5000.0;
  Tick start = 0;
};

struct FaultSchedule {
  Tick start = 0;
  /// Churn only: alternating leave/join ticks after `start`. Empty means a
  /// periodic toggle every SimTuning::churn_period.
  std::vector<Tick> toggles;
};

struct RunMetrics {
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();

  double tps = 0.0;
  double lat_p50 = 0.0;
  double lat_p95 = 0.0;
  bool stalled = false;
  std::int64_t submitted = 0;
  std::int64_t committed = 0;
  Tick elapsed = 0;
  double switch_latency = 0.0;  // mean over completed switches, 0 if none
  std::map<std::string, double> per_op_latency;

  bool operator==(const RunMetrics&) const = default;
};

/// One line of the structured event log.
struct EventRecord {
  Tick tick = 0;
  std::string kind;  // controller, proposal, vote, switch, conversion, fault, sync, stall
  nlohmann::json detail;
};

struct MessageRecord {
  Tick sent = 0;
  Tick delivered = 0;
  NodeId from = 0;
  NodeId to = 0;
  std::string kind;
};

struct SwitchRecord {
  Hash32 proposal_id{};
  ConsensusKind from = ConsensusKind::PoA;
  ConsensusKind to = ConsensusKind::PoW;
  Tick decision_tick = 0;
  Tick emit_tick = 0;
  std::optional<Tick> activation_tick;
  ProposalStatus status = ProposalStatus::Pending;
};

/// What the controller sees at each controller interval.
struct LiveStatus {
  Tick tick = 0;
  Height height = 0;
  ConsensusKind engine = ConsensusKind::PoA;
  LedgerMode ledger_mode = LedgerMode::Chain;
  int node_count = 0;
  double observed_fault_ratio = 0.0;
  HardwareClass hw = HardwareClass::Large;
  double recent_p50 = 0.0;  // commit latency since the last controller tick
  double link_latency_p50 = 0.0;
  std::int64_t pool_size = 0;
  bool proposal_pending = false;
};

struct SwitchAction {
  ConsensusKind to;
};
struct ConvertAction {
  LedgerMode to;
};
using ControlAction = std::variant<SwitchAction, ConvertAction>;
using ControllerHook = std::function<std::optional<ControlAction>(const LiveStatus&)>;

/// Deterministic discrete-event world: nodes, a simulated network, the
/// active consensus engine with hot-plug replacement, and a committed
/// ledger mirror.
class World {
 public:
  World(NetworkParams params, EngineConfig engine, Workload workload, SimTuning tuning = {});
  ~World();
  World(World&&) noexcept;
  World& operator=(World&&) noexcept;

  void inject_fault(NodeId node, FaultKind kind, FaultSchedule schedule = {});
  void set_controller(ControllerHook hook);
  void trace_messages(bool on);

  /// Runs until `duration` ticks, a stall, or (if stop_when_drained) every
  /// workload transaction has committed.
  RunMetrics run(Tick duration, bool stop_when_drained = true);

  const LedgerView& ledger() const;
  const std::vector<EventRecord>& events() const;
  const std::vector<MessageRecord>& messages() const;
  const std::vector<SwitchRecord>& switches() const;
  ConsensusKind current_engine() const;
  /// Scheduled proposer of each round that produced no block.
  const std::vector<std::pair<std::uint64_t, NodeId>>& skipped_rounds() const;
  /// Ticks at which each node finished a state sync.
  const std::vector<std::pair<Tick, NodeId>>& syncs() const;
  /// Proposers of committed blocks, in commit order.
  std::vector<NodeId> committed_proposers() const;
  /// failures[observer][subject] / expected[observer][subject]: the
  /// simulator's record of missed duties, used to seed trust ratings.
  double observed_failure_rate(NodeId observer, NodeId subject) const;
  std::int64_t observed_expected(NodeId observer, NodeId subject) const;
  const std::map<NodeId, Amount>& stakes() const;
  std::vector<NodeId> faulty_nodes() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Engine defaults for a network: every node is an authority, stakes come
/// from the network seed.
EngineConfig default_engine(ConsensusKind kind, const NetworkParams& params, Tick block_interval = 50);

/// Stakes drawn from the network seed; also decides which nodes fault
/// (the highest-stake ones).
std::map<NodeId, Amount> seeded_stakes(const NetworkParams& params);

RunMetrics run_scenario(const NetworkParams& params, const EngineConfig& engine, const Workload& workload,
                        Tick duration, const SimTuning& tuning = {});

struct SweepPoint {
  std::string scenario;
  NetworkParams network;
  ConsensusKind engine = ConsensusKind::PoA;
  Tick block_interval = 50;
  Workload workload;
  SimTuning tuning;
  Tick duration = 600'000;
};

struct SweepRow {
  SweepPoint point;
  RunMetrics metrics;
};

/// Grid points run independently (OpenMP over points); rows come back in
/// grid order.
std::vector<SweepRow> sweep(const std::vector<SweepPoint>& grid);
/// Single-threaded reference for `sweep`.
std::vector<SweepRow> sweep_serial(const std::vector<SweepPoint>& grid);

inline constexpr std::string_view kMetricsCsvHeader = "scenario,engine,nodes,fault_ratio,hw_class,seed,tps,lat_p50,lat_p95";
std::string metrics_csv(const std::vector<SweepRow>& rows);
std::string format_metric(double v);

/// Named sub-seed so components can be re-run in isolation.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view name);

/// Portable uniform helpers over a 64-bit engine (std distributions are
/// implementation-defined).
double unit_uniform(std::mt19937_64& rng);
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace metachain
