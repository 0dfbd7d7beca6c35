// One PASS/FAIL line per acceptance criterion. Run from the source tree.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "metachain/adaptive.hpp"
#include "metachain/scenario.hpp"

using namespace metachain;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double tps_of(const std::vector<SweepRow>& rows, ConsensusKind k, int n, double fr) {
  for (const auto& r : rows)
    if (r.point.engine == k && r.point.network.node_count == n && std::abs(r.point.network.fault_ratio - fr) < 1e-9)
      return r.metrics.tps;
  return -1.0;
}

void node_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = sweep(grid_points(load_scenario("configs/node_sweep.json")));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = rows.size() == 15 && secs < 60.0;
  for (auto k : {ConsensusKind::PoA, ConsensusKind::TDPoS})
    for (int n = 20; n <= 50; n += 10) ok = ok && tps_of(rows, k, n, 0) <= tps_of(rows, k, n - 10, 0);
  double lo = 1e300, hi = 0;
  for (int n = 10; n <= 50; n += 10) {
    lo = std::min(lo, tps_of(rows, ConsensusKind::PoW, n, 0));
    hi = std::max(hi, tps_of(rows, ConsensusKind::PoW, n, 0));
  }
  const double spread = lo > 0 ? (hi - lo) / lo : 1.0;
  ok = ok && spread < 0.25;
  report(1, ok, fmt("PoA/TDPoS tps non-increasing in N; PoW spread %.3f (< 0.25); %.2f s", spread, secs));
}

void fault_tolerance() {
  const auto rows = sweep(grid_points(load_scenario("configs/fault_sweep.json")));
  bool stalled = true, pow_wins = true;
  for (int n = 10; n <= 50; n += 10) {
    stalled = stalled && tps_of(rows, ConsensusKind::TDPoS, n, 0.1) == 0.0;
    pow_wins = pow_wins && tps_of(rows, ConsensusKind::PoW, n, 0.3) >= tps_of(rows, ConsensusKind::PoA, n, 0.3);
  }
  report(2, stalled && pow_wins,
         std::string("TDPoS stalls at FR 0.1: ") + (stalled ? "yes" : "no") +
             "; PoW >= PoA at FR 0.3 for every N: " + (pow_wins ? "yes" : "no"));
}

void model_ordering() {
  const auto samples = build_dataset(sweep(grid_points(load_scenario("configs/dataset.json"))));
  const auto tree = train(samples, ModelKind::Tree, 1);
  const auto stumps = train(samples, ModelKind::BoostedStumps, 1);
  const bool ok = stumps.test_accuracy >= tree.test_accuracy && stumps.test_accuracy >= 0.85;
  report(3, ok,
         fmt("BoostedStumps testAcc %.4f, Tree testAcc %.4f (need stumps >= tree and >= 0.85)", stumps.test_accuracy,
             tree.test_accuracy));
}

ControllerHook schedule(std::vector<ConsensusKind> order) {
  auto idx = std::make_shared<std::size_t>(0);
  return [order = std::move(order), idx](const LiveStatus& st) -> std::optional<ControlAction> {
    if (st.proposal_pending) return std::nullopt;
    for (std::size_t tries = 0; tries < order.size(); ++tries) {
      const ConsensusKind target = order[(*idx)++ % order.size()];
      if (target != st.engine) return SwitchAction{target};
    }
    return std::nullopt;
  };
}

void switch_latency() {
  const auto cfg = load_scenario("configs/switch_latency.json");
  const SweepPoint p = single_point(cfg, cfg.engines.front());
  World w(p.network, default_engine(p.engine, p.network, p.block_interval), p.workload, p.tuning);
  w.set_controller(schedule(cfg.adaptive.schedule));
  const RunMetrics m = w.run(p.duration, false);
  double lo = 1e300, hi = 0;
  int pairs = 0;
  for (const auto& [k, v] : m.per_op_latency)
    if (k.rfind("switch:", 0) == 0) {
      ++pairs;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double spread = pairs ? (hi - lo) / lo : 1.0;
  report(4, pairs == 6 && spread < 0.2, fmt("%.0f engine pairs, mean latency %.0f..%.0f ticks", pairs, lo, hi) +
                                            fmt(", spread %.3f (< 0.2)", spread));
}

void gas_ranking() {
  const auto cfg = load_scenario("configs/contracts.json");
  const auto rows = run_contracts_bench(cfg.contracts, cfg.seeds.front());
  const ContractBenchRow* top = nullptr;
  for (const auto& r : rows)
    if (!top || r.gas_used > top->gas_used) top = &r;
  const bool ok = rows.size() == 8 && top && top->contract == "OTMC" && top->function == "open";
  report(5, ok,
         (top ? top->contract + "." + top->function : std::string("none")) +
             fmt(" has the maximum gas %.0f of %.0f functions", top ? static_cast<double>(top->gas_used) : 0,
                 static_cast<double>(rows.size())));
}

void conversion() {
  const auto d = convert_demo(30, 1);
  bool forks = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) forks = forks && fork_demo(seed).descends;
  report(6, d.identical && forks,
         std::string("30-block round trip identical: ") + (d.identical ? "yes" : "no") +
             "; forked fixtures descend from the beacon leader: " + (forks ? "yes" : "no"));
}

void properties() {
  bool ok = true;
  std::string detail;
  for (const char* bin : {METACHAIN_PROPERTIES_BIN, METACHAIN_TRUST_BIN}) {
    const std::string cmd = std::string("\"") + bin + "\" --minimal > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    ok = ok && rc == 0;
    const std::string name = std::string(bin).substr(std::string(bin).find_last_of('/') + 1);
    detail += (detail.empty() ? "" : ", ") + name + (rc == 0 ? " ok" : " failed");
  }
  report(7, ok, detail);
}

void fault_step() {
  const auto cfg = load_scenario("configs/fault_step.json");
  std::ifstream in(cfg.adaptive.model_path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto model = DecisionModel::from_json(nlohmann::json::parse(ss.str()));
  const SweepPoint p = single_point(cfg, cfg.engines.front());
  World w(p.network, default_engine(p.engine, p.network, p.block_interval), p.workload, p.tuning);
  w.set_controller(model_controller(model, cfg.adaptive.controller));
  w.run(p.duration, false);

  Tick fault_tick = -1;
  std::vector<std::int64_t> ticks_after;  // controller heights at or after the step
  std::optional<std::int64_t> proposed, activated;
  for (const auto& e : w.events()) {
    if (e.kind == "fault" && fault_tick < 0) fault_tick = e.tick;
    if (fault_tick < 0) continue;
    if (e.kind == "controller") {
      const auto h = e.detail.at("height").get<std::int64_t>();
      ticks_after.push_back(h);
      const auto& a = e.detail.at("action");
      if (!proposed && a.is_object() && a.value("switch", "") == "PoW") proposed = h;
    }
    if (e.kind == "activated" && !activated && e.detail.at("to") == "PoW")
      activated = e.detail.at("height").get<std::int64_t>();
  }
  const bool ok = fault_tick >= 0 && ticks_after.size() >= 3 && proposed && activated &&
                  *proposed <= ticks_after[2] && *activated <= ticks_after[2];
  std::string detail = "step at tick " + std::to_string(fault_tick);
  if (ticks_after.size() >= 3)
    detail += "; controller heights " + std::to_string(ticks_after[0]) + "," + std::to_string(ticks_after[1]) + "," +
              std::to_string(ticks_after[2]);
  detail += "; PoW proposed at " + (proposed ? std::to_string(*proposed) : std::string("never")) +
            ", active from " + (activated ? std::to_string(*activated) : std::string("never"));
  report(8, ok, detail);
}

}  // namespace

int main() {
  const std::pair<int, void (*)()> steps[] = {{1, node_scaling},   {2, fault_tolerance}, {3, model_ordering},
                                              {4, switch_latency}, {5, gas_ranking},     {6, conversion},
                                              {7, properties},     {8, fault_step}};
  for (const auto& [n, f] : steps) {
    try {
      f();
    } catch (const std::exception& e) {
      report(n, false, std::string("error: ") + e.what());
    }
  }
  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return failures ? 1 : 0;
}
