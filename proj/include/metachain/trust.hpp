#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "metachain/contracts.hpp"

namespace metachain {

class World;

enum class TrustAlgorithm { PowerIteration, WeightedAverage };
std::string_view algorithm_name(TrustAlgorithm a);
TrustAlgorithm algorithm_from_name(std::string_view name);

struct Hyperedge {
  std::string task_id;
  std::vector<NodeId> members;  // sorted
  double weight = 0.0;
};

/// H = (V, E, W): one hyperedge per task.
class TrustHypergraph {
 public:
  TrustHypergraph() = default;
  explicit TrustHypergraph(int nodes);

  void add_node(NodeId v) { nodes_.insert(v); }
  bool contains(NodeId v) const { return nodes_.count(v) != 0; }
  const std::set<NodeId>& nodes() const { return nodes_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }

  Hyperedge& add_edge(std::string task_id, std::vector<NodeId> members);
  /// Throws UnknownNode for a task without an edge.
  void set_weight(const std::string& task_id, double weight);

 private:
  std::set<NodeId> nodes_;
  std::vector<Hyperedge> edges_;
};

/// Rating of `ratee` by `rater` in [0,1], or nullopt when the rater has no
/// experience of the ratee.
using RatingSource = std::function<std::optional<double>(NodeId rater, NodeId ratee)>;

/// 1 - the failure rate the simulator observed from rater toward ratee.
RatingSource ratings_from_world(const World& world);

struct LocalTrustModel {
  std::string task_id;
  std::vector<NodeId> members;  // sorted
  std::map<std::pair<NodeId, NodeId>, double> ratings;
  std::map<NodeId, double> trust_values;
  std::optional<TrustAlgorithm> algorithm;
  double edge_weight = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// Adds the task's hyperedge (weight 0) and pulls ratings among members only.
LocalTrustModel form_ltm(TrustHypergraph& graph, std::string task_id, std::vector<NodeId> members,
                         const RatingSource& ratings);

struct TrustOptions {
  double tolerance = 1e-9;
  int max_iterations = 200;
  /// Members with no outgoing ratings rate everyone else equally.
  bool uniform_defaults = true;
};

LocalTrustModel eval_trust(LocalTrustModel ltm, TrustAlgorithm algorithm, const TrustOptions& opt = {});

/// Row-stochastic matrix the power iteration runs on, members in order.
std::vector<std::vector<double>> trust_matrix(const LocalTrustModel& ltm, bool uniform_defaults = true);

/// TrustRegistry call carrying (taskId, members, algorithm, trustValues).
ContractCall record_trust(const LocalTrustModel& ltm, NodeId caller);

double default_min_trust(std::size_t members);
std::map<NodeId, bool> gate_otmc(const std::map<NodeId, double>& trust_values, double min_trust);

}  // namespace metachain
