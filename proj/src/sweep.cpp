#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "metachain/netsim.hpp"

namespace metachain {

std::string_view hw_name(HardwareClass hw) { return hw == HardwareClass::Large ? "Large" : "Small"; }

HardwareClass hw_from_name(std::string_view name) {
  if (name == "Large") return HardwareClass::Large;
  if (name == "Small") return HardwareClass::Small;
  throw Error(Errc::BadConfig, "hardware class '" + std::string(name) + "'");
}

std::string_view fault_name(FaultKind kind) {
  switch (kind) {
    case FaultKind::SilentStop: return "SilentStop";
    case FaultKind::Churn: return "Churn";
    case FaultKind::MuteMiner: return "MuteMiner";
  }
  return "?";
}

FaultKind fault_from_name(std::string_view name) {
  for (auto k : {FaultKind::SilentStop, FaultKind::Churn, FaultKind::MuteMiner})
    if (fault_name(k) == name) return k;
  throw Error(Errc::BadConfig, "fault kind '" + std::string(name) + "'");
}

void NetworkParams::validate() const {
  if (node_count < 1) throw Error(Errc::InvalidParams, "nodeCount must be >= 1");
  if (latency_base < 0 || latency_jitter < 0) throw Error(Errc::InvalidParams, "latency must be non-negative");
  if (!(fault_ratio >= 0.0 && fault_ratio < 1.0)) throw Error(Errc::InvalidParams, "faultRatio must be in [0,1)");
  if (!(bandwidth_bytes_per_tick > 0.0)) throw Error(Errc::InvalidParams, "bandwidth must be positive");
  for (const auto& [n, hw] : hw_overrides)
    if (n >= static_cast<NodeId>(node_count)) throw Error(Errc::UnknownNode, std::to_string(n));
}

HardwareClass NetworkParams::hw_of(NodeId node) const {
  auto it = hw_overrides.find(node);
  return it == hw_overrides.end() ? hw : it->second;
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view name) {
  ByteWriter w;
  w.u64(seed).str(name);
  return hash_prefix_u64(sha256(w.bytes()));
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return x % n;
  }
}

std::map<NodeId, Amount> seeded_stakes(const NetworkParams& params) {
  std::mt19937_64 rng(sub_seed(params.seed, "stake"));
  std::map<NodeId, Amount> out;
  for (int i = 0; i < params.node_count; ++i)
    out[static_cast<NodeId>(i)] = 100 + static_cast<Amount>(uniform_below(rng, 900));
  return out;
}

EngineConfig default_engine(ConsensusKind kind, const NetworkParams& params, Tick block_interval) {
  EngineConfig e;
  e.kind = kind;
  e.block_interval_ticks = block_interval;
  for (int i = 0; i < params.node_count; ++i) e.authorities.push_back(static_cast<NodeId>(i));
  e.votes = seeded_stakes(params);
  e.delegate_count = std::min(3, params.node_count);
  return e;
}

RunMetrics run_scenario(const NetworkParams& params, const EngineConfig& engine, const Workload& workload,
                        Tick duration, const SimTuning& tuning) {
  if (workload.tx_count < 1) throw Error(Errc::InvalidParams, "workload needs at least one transaction");
  World w(params, engine, workload, tuning);
  return w.run(duration, true);
}

namespace {

SweepRow run_point(const SweepPoint& p) {
  return SweepRow{p, run_scenario(p.network, default_engine(p.engine, p.network, p.block_interval), p.workload,
                                  p.duration, p.tuning)};
}

}  // namespace

std::vector<SweepRow> sweep_serial(const std::vector<SweepPoint>& grid) {
  if (grid.empty()) throw Error(Errc::EmptyGrid);
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const auto& p : grid) rows.push_back(run_point(p));
  return rows;
}

std::vector<SweepRow> sweep(const std::vector<SweepPoint>& grid) {
  if (grid.empty()) throw Error(Errc::EmptyGrid);
  std::vector<std::optional<SweepRow>> slots(grid.size());
  std::vector<std::optional<Error>> errors(grid.size());
  const auto n = static_cast<std::int64_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      slots[static_cast<std::size_t>(i)] = run_point(grid[static_cast<std::size_t>(i)]);
    } catch (const Error& e) {
      errors[static_cast<std::size_t>(i)] = e;
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (errors[i]) throw *errors[i];
    rows.push_back(std::move(*slots[i]));
  }
  return rows;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string metrics_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    char fr[32];
    std::snprintf(fr, sizeof fr, "%.2f", r.point.network.fault_ratio);
    out << r.point.scenario << ',' << kind_name(r.point.engine) << ',' << r.point.network.node_count << ',' << fr
        << ',' << hw_name(r.point.network.hw) << ',' << r.point.network.seed << ',' << format_metric(r.metrics.tps)
        << ',' << format_metric(r.metrics.lat_p50) << ',' << format_metric(r.metrics.lat_p95) << '\n';
  }
  return out.str();
}

}  // namespace metachain
