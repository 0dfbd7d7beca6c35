#pragma once

#include <optional>

#include "json.hpp"
#include "metachain/netsim.hpp"

namespace metachain {

enum class LatencyClass { Low, Mid, High };
std::string_view latency_name(LatencyClass c);

/// One-way link delay P50 buckets, in ticks: Low < 15 <= Mid < 50 <= High.
LatencyClass latency_class(double p50_ticks);

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {"nodeCount", "faultRatio", "hwClass",
                                                                               "latencyClass"};

struct FeatureVector {
  int node_count = 0;
  double fault_ratio = 0.0;
  HardwareClass hw = HardwareClass::Large;
  LatencyClass latency = LatencyClass::Low;

  std::array<double, kFeatureCount> values() const;
  bool operator==(const FeatureVector&) const = default;
};

struct LabeledSample {
  FeatureVector features;
  ConsensusKind label = ConsensusKind::PoA;
};

/// Row-level view of the metrics CSV, enough to rebuild a dataset.
struct MetricsRow {
  std::string scenario;
  ConsensusKind engine = ConsensusKind::PoA;
  int nodes = 0;
  double fault_ratio = 0.0;
  HardwareClass hw = HardwareClass::Large;
  std::uint64_t seed = 0;
  double tps = 0.0;
  double lat_p50 = 0.0;
  double lat_p95 = 0.0;
  /// Not a CSV column; parsed rows assume the default network.
  double link_latency_p50 = NetworkParams{}.link_latency_p50();
};

std::vector<MetricsRow> metrics_rows(const std::vector<SweepRow>& rows);
/// Parses the metrics CSV; throws BadConfig on a header or field mismatch.
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

/// Label = argmax TPS, then lower P50, then PoA < TDPoS < PoW.
ConsensusKind best_engine(const std::vector<MetricsRow>& point);

/// One sample per grid point (scenario, nodes, fault ratio, hw, seed, link latency).
std::vector<LabeledSample> build_dataset(const std::vector<MetricsRow>& rows);
std::vector<LabeledSample> build_dataset(const std::vector<SweepRow>& rows);

enum class ModelKind { Tree, BoostedStumps };
std::string_view model_kind_name(ModelKind k);
ModelKind model_kind_from_name(std::string_view name);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x <= threshold
  int right = -1;
  ConsensusKind label = ConsensusKind::PoA;
  bool operator==(const TreeNode&) const = default;
};

struct Stump {
  int klass = 0;  // index into kAllKinds
  int feature = 0;
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
  bool operator==(const Stump&) const = default;
};

struct TrainParams {
  int max_depth = 6;  // -1: unlimited
  std::size_t min_leaf = 2;
  int rounds = 50;
  double shrinkage = 0.1;
  double train_fraction = 0.7;
  int repeats = 10;
};

struct DecisionModel {
  static constexpr int kVersion = 1;

  ModelKind kind = ModelKind::Tree;
  std::vector<TreeNode> nodes;  // root at 0
  std::vector<Stump> stumps;
  std::array<double, 3> base{};  // per-class prior log-odds
  double shrinkage = 0.1;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  ConsensusKind predict(const FeatureVector& f) const;
  nlohmann::json to_json() const;
  static DecisionModel from_json(const nlohmann::json& j);
  bool operator==(const DecisionModel&) const = default;
};

/// Fits on all of `samples`; accuracies are left at zero.
DecisionModel fit(const std::vector<LabeledSample>& samples, ModelKind kind, const TrainParams& params = {});

double accuracy(const DecisionModel& model, const std::vector<LabeledSample>& samples);

/// Repeated random train/test splits for testAccuracy, then a final fit on
/// every sample.
DecisionModel train(const std::vector<LabeledSample>& samples, ModelKind kind, std::uint64_t seed,
                    const TrainParams& params = {});

ConsensusKind predict(const DecisionModel& model, const FeatureVector& f);

struct ControllerConfig {
  std::int64_t high_water = 500;
  std::int64_t low_water = 50;
};

FeatureVector live_features(const LiveStatus& status);

/// At most one action; a switch wins over a conversion; nothing while a
/// proposal is still pending.
std::optional<ControlAction> controller_tick(const DecisionModel& model, const LiveStatus& status,
                                             const ControllerConfig& cfg = {});

/// Hook for World::set_controller backed by a model.
ControllerHook model_controller(DecisionModel model, ControllerConfig cfg = {});

}  // namespace metachain
