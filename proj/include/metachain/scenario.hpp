#pragma once

#include <optional>

#include "metachain/adaptive.hpp"
#include "metachain/contracts.hpp"

namespace metachain {

/// Config rejection with a source position (1-based; 0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string message, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct AdaptiveSettings {
  bool enabled = false;
  std::string model_path;
  /// Forced targets, cycled in order, instead of model predictions.
  std::vector<ConsensusKind> schedule;
  int min_switches = 0;
  ControllerConfig controller;
};

struct ContractScript {
  int repeat = 200;
  /// "contract.function", e.g. "NFR.rental" or "LedgerConversion.vote".
  std::vector<std::string> functions;
  Tick block_interval = 50;
  double gas_per_tick = 10.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::vector<std::uint64_t> seeds = {1};
  std::vector<int> nodes = {10};
  std::vector<double> fault_ratios = {0.0};
  std::vector<HardwareClass> hw = {HardwareClass::Large};
  NetworkParams network;  // scalar fields; the grid axes above override it
  std::vector<ConsensusKind> engines = {ConsensusKind::PoA, ConsensusKind::TDPoS, ConsensusKind::PoW};
  Tick block_interval = 50;
  LedgerMode ledger_mode = LedgerMode::Chain;
  Workload workload;
  Tick duration = 600'000;
  SimTuning tuning;
  AdaptiveSettings adaptive;
  ContractScript contracts;
  std::string outputs = "out";
};

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);

/// Every (seed, hw, fault ratio, nodes, engine) combination in that nesting.
std::vector<SweepPoint> grid_points(const ScenarioConfig& cfg);
SweepPoint single_point(const ScenarioConfig& cfg, ConsensusKind engine);

std::vector<std::string> default_contract_functions();

struct ContractBenchRow {
  std::string contract;
  std::string function;
  int count = 0;
  double mean_latency_ticks = 0.0;
  std::uint64_t gas_used = 0;
};

/// Runs the scripted calls `repeat` times each against a seeded state.
/// Latency: wait for the next block plus gas at `gas_per_tick`.
/// Throws UnknownFunction for names outside the benchmark set.
std::vector<ContractBenchRow> run_contracts_bench(const ContractScript& script, std::uint64_t seed);

inline constexpr std::string_view kContractsCsvHeader = "contract,function,count,mean_latency_ticks,gas_used";
std::string contracts_csv(const std::vector<ContractBenchRow>& rows);

struct ConvertDemo {
  LedgerView original;
  LedgerView dag;
  LedgerView restored;
  Height convert_height = 0;
  Height back_height = 0;
  bool identical = false;
};

/// Fork-free chain of `blocks` blocks, chain->DAG partway, then DAG->chain
/// above the tip; compares the committed sequences before and after.
ConvertDemo convert_demo(int blocks, std::uint64_t seed);

struct ForkDemo {
  LedgerView before;
  LedgerView after;
  Height convert_height = 0;
  Hash32 leader{};
  bool descends = false;
};

/// Two branches at convertHeight-1; every committed block above the
/// convert height must descend from the beacon winner.
ForkDemo fork_demo(std::uint64_t seed);

}  // namespace metachain
