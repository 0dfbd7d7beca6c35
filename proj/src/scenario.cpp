#include "metachain/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace metachain {

using nlohmann::json;

ConfigError::ConfigError(std::string message, int line, int column)
    : std::runtime_error(line > 0 ? std::to_string(line) + ":" + std::to_string(column) + ": " + message : message),
      line_(line),
      column_(column) {}

namespace {

std::pair<int, int> position_of(std::string_view text, std::size_t offset) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Best-effort source location for schema errors: first occurrence of the
/// quoted key.
std::pair<int, int> locate_key(std::string_view text, const std::string& key) {
  const auto at = text.find("\"" + key + "\"");
  if (at == std::string_view::npos) return {0, 0};
  return position_of(text, at);
}

struct Reader {
  std::string_view text;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    auto [l, c] = locate_key(text, key);
    throw ConfigError(msg, l, c);
  }

  void only(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(where, "'" + where + "' must be an object");
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(k, "unknown key '" + k + "' in " + where);
    }
  }

  template <typename T>
  T get(const json& obj, const char* key) const {
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, std::string("bad value for '") + key + "'");
    }
  }

  template <typename T>
  std::vector<T> list(const json& obj, const char* key) const {
    const json& v = obj.at(key);
    if (v.is_array()) {
      if (v.empty()) fail(key, std::string("'") + key + "' must not be empty");
      std::vector<T> out;
      for (const auto& x : v) {
        try {
          out.push_back(x.get<T>());
        } catch (const json::exception&) {
          fail(key, std::string("bad element in '") + key + "'");
        }
      }
      return out;
    }
    return {get<T>(obj, key)};
  }

  template <typename T, typename F>
  std::vector<T> names(const json& obj, const char* key, F from_name) const {
    std::vector<T> out;
    for (const auto& s : list<std::string>(obj, key)) {
      try {
        out.push_back(from_name(s));
      } catch (const Error&) {
        fail(key, "unknown name '" + s + "' in '" + key + "'");
      }
    }
    return out;
  }
};

void parse_network(const Reader& r, const json& j, ScenarioConfig& c) {
  r.only(j, "network",
         {"nodes", "latencyBase", "latencyJitter", "hwClass", "faultRatio", "faultKind", "faultStart", "bandwidth"});
  if (j.contains("nodes")) c.nodes = r.list<int>(j, "nodes");
  if (j.contains("latencyBase")) c.network.latency_base = r.get<Tick>(j, "latencyBase");
  if (j.contains("latencyJitter")) c.network.latency_jitter = r.get<Tick>(j, "latencyJitter");
  if (j.contains("hwClass")) c.hw = r.names<HardwareClass>(j, "hwClass", hw_from_name);
  if (j.contains("faultRatio")) c.fault_ratios = r.list<double>(j, "faultRatio");
  if (j.contains("faultKind")) {
    try {
      c.network.fault_kind = fault_from_name(r.get<std::string>(j, "faultKind"));
    } catch (const Error&) {
      r.fail("faultKind", "unknown fault kind");
    }
  }
  if (j.contains("faultStart")) c.network.fault_start = r.get<Tick>(j, "faultStart");
  if (j.contains("bandwidth")) c.network.bandwidth_bytes_per_tick = r.get<double>(j, "bandwidth");
}

void parse_engine(const Reader& r, const json& j, ScenarioConfig& c) {
  r.only(j, "engine", {"kinds", "blockInterval"});
  if (j.contains("kinds")) c.engines = r.names<ConsensusKind>(j, "kinds", kind_from_name);
  if (j.contains("blockInterval")) c.block_interval = r.get<Tick>(j, "blockInterval");
}

void parse_tuning(const Reader& r, const json& j, SimTuning& t) {
  r.only(j, "tuning",
         {"maxBlockTxs", "powTargetInterval", "powConfirmations", "roundTimeoutBlocks", "stallWindowBlocks",
          "syncTicks", "churnPeriod", "inferenceTicks", "controllerIntervalBlocks", "voteCollectOffset",
          "effectiveOffset"});
  if (j.contains("maxBlockTxs")) t.max_block_txs = r.get<int>(j, "maxBlockTxs");
  if (j.contains("powTargetInterval")) t.pow_target_interval = r.get<Tick>(j, "powTargetInterval");
  if (j.contains("powConfirmations")) t.pow_confirmations = r.get<int>(j, "powConfirmations");
  if (j.contains("roundTimeoutBlocks")) t.round_timeout_blocks = r.get<int>(j, "roundTimeoutBlocks");
  if (j.contains("stallWindowBlocks")) t.stall_window_blocks = r.get<int>(j, "stallWindowBlocks");
  if (j.contains("syncTicks")) t.sync_ticks = r.get<Tick>(j, "syncTicks");
  if (j.contains("churnPeriod")) t.churn_period = r.get<Tick>(j, "churnPeriod");
  if (j.contains("inferenceTicks")) t.inference_ticks = r.get<Tick>(j, "inferenceTicks");
  if (j.contains("controllerIntervalBlocks")) t.controller_interval_blocks = r.get<int>(j, "controllerIntervalBlocks");
  if (j.contains("voteCollectOffset")) t.vote_collect_offset = r.get<Height>(j, "voteCollectOffset");
  if (j.contains("effectiveOffset")) t.effective_offset = r.get<Height>(j, "effectiveOffset");
}

void parse_adaptive(const Reader& r, const json& j, AdaptiveSettings& a) {
  r.only(j, "adaptive", {"enabled", "model", "schedule", "minSwitches", "highWater", "lowWater"});
  if (j.contains("enabled")) a.enabled = r.get<bool>(j, "enabled");
  if (j.contains("model")) a.model_path = r.get<std::string>(j, "model");
  if (j.contains("schedule")) a.schedule = r.names<ConsensusKind>(j, "schedule", kind_from_name);
  if (j.contains("minSwitches")) a.min_switches = r.get<int>(j, "minSwitches");
  if (j.contains("highWater")) a.controller.high_water = r.get<std::int64_t>(j, "highWater");
  if (j.contains("lowWater")) a.controller.low_water = r.get<std::int64_t>(j, "lowWater");
}

void parse_contracts(const Reader& r, const json& j, ContractScript& s) {
  r.only(j, "contracts", {"repeat", "functions", "blockInterval", "gasPerTick"});
  if (j.contains("repeat")) s.repeat = r.get<int>(j, "repeat");
  if (j.contains("functions")) s.functions = r.list<std::string>(j, "functions");
  if (j.contains("blockInterval")) s.block_interval = r.get<Tick>(j, "blockInterval");
  if (j.contains("gasPerTick")) s.gas_per_tick = r.get<double>(j, "gasPerTick");
  const auto known = default_contract_functions();
  for (const auto& f : s.functions)
    if (std::find(known.begin(), known.end(), f) == known.end()) r.fail(f, "unknown contract function '" + f + "'");
  if (s.repeat < 1) r.fail("repeat", "'repeat' must be at least 1");
  if (s.block_interval < 1 || s.gas_per_tick <= 0.0) r.fail("contracts", "contract timing must be positive");
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [l, c] = position_of(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    throw ConfigError("syntax error: " + what.substr(what.find(':') + 2), l, c);
  }
  const Reader r{text};
  ScenarioConfig c;
  r.only(j, "config",
         {"name", "seed", "seeds", "network", "engine", "ledgerMode", "workload", "durationTicks", "tuning",
          "adaptive", "contracts", "outputs"});
  if (j.contains("name")) c.name = r.get<std::string>(j, "name");
  if (j.contains("seed")) c.seeds = {r.get<std::uint64_t>(j, "seed")};
  if (j.contains("seeds")) c.seeds = r.list<std::uint64_t>(j, "seeds");
  if (j.contains("seed") && j.contains("seeds")) r.fail("seeds", "give either 'seed' or 'seeds'");
  if (j.contains("network")) parse_network(r, j.at("network"), c);
  if (j.contains("engine")) parse_engine(r, j.at("engine"), c);
  if (j.contains("ledgerMode")) {
    const auto m = r.get<std::string>(j, "ledgerMode");
    if (m == "Dag") r.fail("ledgerMode", "runs start on a chain ledger; DAG is reached by conversion");
    if (m != "Chain") r.fail("ledgerMode", "unknown ledger mode '" + m + "'");
  }
  if (j.contains("workload")) {
    const json& w = j.at("workload");
    r.only(w, "workload", {"txCount", "rateTps", "start"});
    if (w.contains("txCount")) c.workload.tx_count = r.get<std::int64_t>(w, "txCount");
    if (w.contains("rateTps")) c.workload.rate_tps = r.get<double>(w, "rateTps");
    if (w.contains("start")) c.workload.start = r.get<Tick>(w, "start");
  }
  if (j.contains("durationTicks")) c.duration = r.get<Tick>(j, "durationTicks");
  if (j.contains("tuning")) parse_tuning(r, j.at("tuning"), c.tuning);
  if (j.contains("adaptive")) parse_adaptive(r, j.at("adaptive"), c.adaptive);
  if (j.contains("contracts")) parse_contracts(r, j.at("contracts"), c.contracts);
  if (c.contracts.functions.empty()) c.contracts.functions = default_contract_functions();
  if (j.contains("outputs")) c.outputs = r.get<std::string>(j, "outputs");

  // Semantic checks, all before any simulation runs.
  if (c.workload.tx_count < 1 || c.workload.rate_tps <= 0.0) r.fail("workload", "workload must be positive");
  if (c.duration < 1) r.fail("durationTicks", "'durationTicks' must be positive");
  if (c.block_interval < 1) r.fail("blockInterval", "'blockInterval' must be positive");
  for (const auto& p : grid_points(c)) {
    try {
      p.network.validate();
      default_engine(p.engine, p.network, p.block_interval).validate();
    } catch (const Error& e) {
      r.fail("network", std::string("invalid parameters: ") + e.what());
    }
  }
  if (c.adaptive.enabled && c.adaptive.model_path.empty() && c.adaptive.schedule.empty())
    r.fail("adaptive", "adaptive runs need a model path or a schedule");
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

SweepPoint single_point(const ScenarioConfig& cfg, ConsensusKind engine) {
  SweepPoint p;
  p.scenario = cfg.name;
  p.network = cfg.network;
  p.network.node_count = cfg.nodes.front();
  p.network.fault_ratio = cfg.fault_ratios.front();
  p.network.hw = cfg.hw.front();
  p.network.seed = cfg.seeds.front();
  p.engine = engine;
  p.block_interval = cfg.block_interval;
  p.workload = cfg.workload;
  p.tuning = cfg.tuning;
  p.duration = cfg.duration;
  return p;
}

std::vector<SweepPoint> grid_points(const ScenarioConfig& cfg) {
  std::vector<SweepPoint> out;
  for (auto seed : cfg.seeds)
    for (auto hw : cfg.hw)
      for (double fr : cfg.fault_ratios)
        for (int n : cfg.nodes)
          for (auto k : cfg.engines) {
            SweepPoint p = single_point(cfg, k);
            p.network.seed = seed;
            p.network.hw = hw;
            p.network.fault_ratio = fr;
            p.network.node_count = n;
            out.push_back(p);
          }
  return out;
}

}  // namespace metachain
