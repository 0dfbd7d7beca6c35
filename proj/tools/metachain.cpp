#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "metachain/adaptive.hpp"
#include "metachain/scenario.hpp"

namespace fs = std::filesystem;
using namespace metachain;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadInput = 2, kStalled = 3, kNoSwitch = 4 };

int log_level() {
  const char* v = std::getenv("METACHAIN_LOG");
  if (!v) return 1;
  const std::string s = v;
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

void write_atomic(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << data;
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
};

ScenarioConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  ScenarioConfig cfg = load_scenario(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.outputs = c.out;
  if (!c.model.empty()) cfg.adaptive.model_path = c.model;
  return cfg;
}

int cmd_bench(const Common& c) {
  const ScenarioConfig cfg = load(c);
  const auto grid = grid_points(cfg);
  info("bench " + cfg.name + ": " + std::to_string(grid.size()) + " runs");
  const auto rows = sweep(grid);
  const fs::path csv = fs::path(cfg.outputs) / (cfg.name + "_metrics.csv");
  write_atomic(csv, metrics_csv(rows));

  std::size_t stalled = 0;
  std::ostringstream summary;
  for (const auto& r : rows) {
    stalled += r.metrics.stalled ? 1 : 0;
    char line[160];
    std::snprintf(line, sizeof line, "%-6s N=%-3d FR=%.2f %-5s seed=%llu  tps=%9s  p50=%9s  p95=%9s%s\n",
                  std::string(kind_name(r.point.engine)).c_str(), r.point.network.node_count,
                  r.point.network.fault_ratio, std::string(hw_name(r.point.network.hw)).c_str(),
                  static_cast<unsigned long long>(r.point.network.seed), format_metric(r.metrics.tps).c_str(),
                  format_metric(r.metrics.lat_p50).c_str(), format_metric(r.metrics.lat_p95).c_str(),
                  r.metrics.stalled ? "  STALLED" : "");
    summary << line;
  }
  std::cout << summary.str() << "wrote " << csv.string() << '\n';
  return !rows.empty() && stalled == rows.size() ? kStalled : kOk;
}

int cmd_train(const Common& c, const std::string& dataset, const std::string& kind_name_) {
  ModelKind kind;
  std::vector<LabeledSample> samples;
  try {
    kind = model_kind_from_name(kind_name_);
    samples = build_dataset(parse_metrics_csv(read_file(dataset)));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  DecisionModel m;
  try {
    m = train(samples, kind, c.seed.value_or(1));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  const fs::path out = !c.model.empty() ? fs::path(c.model)
                                        : fs::path(c.out.empty() ? "out" : c.out) /
                                              ("model_" + std::string(model_kind_name(kind)) + ".json");
  write_atomic(out, m.to_json().dump(2) + "\n");
  std::printf("%s samples=%zu trainAccuracy=%.4f testAccuracy=%.4f\n", std::string(model_kind_name(kind)).c_str(),
              samples.size(), m.train_accuracy, m.test_accuracy);
  std::cout << "wrote " << out.string() << '\n';
  return kOk;
}

ControllerHook schedule_hook(std::vector<ConsensusKind> schedule) {
  auto idx = std::make_shared<std::size_t>(0);
  return [schedule = std::move(schedule), idx](const LiveStatus& st) -> std::optional<ControlAction> {
    if (st.proposal_pending) return std::nullopt;
    for (std::size_t tries = 0; tries < schedule.size(); ++tries) {
      const ConsensusKind target = schedule[*idx % schedule.size()];
      *idx += 1;
      if (target != st.engine) return SwitchAction{target};
    }
    return std::nullopt;
  };
}

int cmd_adaptive_run(const Common& c) {
  const ScenarioConfig cfg = load(c);
  if (!cfg.adaptive.enabled) throw ConfigError("adaptive-run needs \"adaptive\": {\"enabled\": true}");
  ControllerHook hook;
  if (!cfg.adaptive.schedule.empty()) {
    hook = schedule_hook(cfg.adaptive.schedule);
  } else {
    DecisionModel model;
    try {
      model = DecisionModel::from_json(nlohmann::json::parse(read_file(cfg.adaptive.model_path)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    } catch (const Error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    hook = model_controller(std::move(model), cfg.adaptive.controller);
  }

  const SweepPoint p = single_point(cfg, cfg.engines.front());
  World world(p.network, default_engine(p.engine, p.network, p.block_interval), p.workload, p.tuning);
  world.set_controller(hook);
  const RunMetrics m = world.run(p.duration, false);

  std::ostringstream events;
  for (const auto& e : world.events())
    events << nlohmann::json{{"tick", e.tick}, {"kind", e.kind}, {"detail", e.detail}}.dump() << '\n';
  const fs::path dir(cfg.outputs);
  write_atomic(dir / (cfg.name + "_events.jsonl"), events.str());

  std::ostringstream sw;
  sw << "from,to,decision_tick,emit_tick,activation_tick,latency_ticks,status\n";
  int completed = 0;
  for (const auto& s : world.switches()) {
    sw << kind_name(s.from) << ',' << kind_name(s.to) << ',' << s.decision_tick << ',' << s.emit_tick << ',';
    if (s.activation_tick) {
      ++completed;
      sw << *s.activation_tick << ',' << (*s.activation_tick - s.emit_tick);
    } else {
      sw << ",";
    }
    sw << ',' << status_name(s.status) << '\n';
  }
  write_atomic(dir / (cfg.name + "_switches.csv"), sw.str());

  if (log_level() >= 2)
    for (const auto& e : world.events()) std::cerr << e.tick << ' ' << e.kind << ' ' << e.detail.dump() << '\n';
  std::printf("switches=%d final=%s tps=%s\n", completed, std::string(kind_name(world.current_engine())).c_str(),
              format_metric(m.tps).c_str());
  for (const auto& [k, v] : m.per_op_latency)
    if (k.rfind("switch:", 0) == 0) std::printf("  %s mean=%s ticks\n", k.c_str(), format_metric(v).c_str());
  if (completed == 0) {
    std::printf("no switch completed within %lld ticks\n", static_cast<long long>(p.duration));
    return kNoSwitch;
  }
  std::printf("mean switch latency=%s ticks\n", format_metric(m.switch_latency).c_str());
  if (completed < cfg.adaptive.min_switches)
    info("warning: " + std::to_string(completed) + " switches, fewer than minSwitches=" +
         std::to_string(cfg.adaptive.min_switches));
  return kOk;
}

int cmd_contracts_bench(const Common& c) {
  const ScenarioConfig cfg = load(c);
  std::vector<ContractBenchRow> rows;
  try {
    rows = run_contracts_bench(cfg.contracts, cfg.seeds.front());
  } catch (const Error& e) {
    if (e.code() != Errc::UnknownFunction) throw;
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  const auto text = contracts_csv(rows);
  const fs::path out = fs::path(cfg.outputs) / (cfg.name + "_contracts.csv");
  write_atomic(out, text);
  std::cout << text << "wrote " << out.string() << '\n';
  return kOk;
}

int cmd_convert_demo(const Common& c, int blocks) {
  const std::uint64_t seed = c.seed.value_or(1);
  const fs::path dir(c.out.empty() ? "out" : c.out);
  const ConvertDemo d = convert_demo(blocks, seed);
  write_atomic(dir / "convert_chain.json", d.original.dump() + "\n");
  write_atomic(dir / "convert_dag.json", d.dag.dump() + "\n");
  write_atomic(dir / "convert_restored.json", d.restored.dump() + "\n");
  const ForkDemo f = fork_demo(seed);
  write_atomic(dir / "fork_before.json", f.before.dump() + "\n");
  write_atomic(dir / "fork_after.json", f.after.dump() + "\n");
  std::printf("round trip: %zu committed blocks, chain->DAG at %lld, DAG->chain at %lld, identical=%s\n",
              d.restored.committed().size(), static_cast<long long>(d.convert_height),
              static_cast<long long>(d.back_height), d.identical ? "true" : "false");
  std::printf("fork: leader %s, post-convert blocks descend from leader=%s\n", to_hex(f.leader).substr(0, 16).c_str(),
              f.descends ? "true" : "false");
  return d.identical && f.descends ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metachain: modular blockchain simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "scenario config (JSON)");
    sub->add_option("--seed", common.seed, "overrides the config seed");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--model", common.model, "model file");
  };
  auto* bench = app.add_subcommand("bench", "run the configured sweep, write the metrics CSV");
  add_common(bench);
  auto* trainc = app.add_subcommand("train", "train a consensus selector from a metrics CSV");
  add_common(trainc);
  std::string dataset, kind = "BoostedStumps";
  trainc->add_option("--dataset", dataset, "metrics CSV")->required();
  trainc->add_option("--kind", kind, "Tree or BoostedStumps");
  auto* adaptive = app.add_subcommand("adaptive-run", "run one world under the adaptive controller");
  add_common(adaptive);
  auto* contracts = app.add_subcommand("contracts-bench", "per-function latency and gas");
  add_common(contracts);
  auto* convert = app.add_subcommand("convert-demo", "chain->DAG->chain round trip and fork election");
  add_common(convert);
  int blocks = 30;
  convert->add_option("--blocks", blocks, "chain length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;
  }

  try {
    if (*bench) return cmd_bench(common);
    if (*trainc) return cmd_train(common, dataset, kind);
    if (*adaptive) return cmd_adaptive_run(common);
    if (*contracts) return cmd_contracts_bench(common);
    if (*convert) return cmd_convert_demo(common, blocks);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
