#include "metachain/trust.hpp"

#include <algorithm>
#include <cmath>

#include "metachain/netsim.hpp"

namespace metachain {

std::string_view algorithm_name(TrustAlgorithm a) {
  return a == TrustAlgorithm::PowerIteration ? "PowerIteration" : "WeightedAverage";
}

TrustAlgorithm algorithm_from_name(std::string_view name) {
  if (name == "PowerIteration") return TrustAlgorithm::PowerIteration;
  if (name == "WeightedAverage") return TrustAlgorithm::WeightedAverage;
  throw Error(Errc::BadConfig, "trust algorithm '" + std::string(name) + "'");
}

TrustHypergraph::TrustHypergraph(int nodes) {
  for (int i = 0; i < nodes; ++i) nodes_.insert(static_cast<NodeId>(i));
}

Hyperedge& TrustHypergraph::add_edge(std::string task_id, std::vector<NodeId> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (members.size() < 2) throw Error(Errc::TooFewMembers);
  for (NodeId m : members)
    if (!contains(m)) throw Error(Errc::UnknownNode, std::to_string(m));
  edges_.push_back(Hyperedge{std::move(task_id), std::move(members), 0.0});
  return edges_.back();
}

void TrustHypergraph::set_weight(const std::string& task_id, double weight) {
  for (auto& e : edges_)
    if (e.task_id == task_id) {
      e.weight = std::max(0.0, weight);
      return;
    }
  throw Error(Errc::UnknownNode, "no hyperedge for task " + task_id);
}

RatingSource ratings_from_world(const World& world) {
  return [&world](NodeId rater, NodeId ratee) -> std::optional<double> {
    if (world.observed_expected(rater, ratee) == 0) return std::nullopt;
    return 1.0 - world.observed_failure_rate(rater, ratee);
  };
}

LocalTrustModel form_ltm(TrustHypergraph& graph, std::string task_id, std::vector<NodeId> members,
                         const RatingSource& ratings) {
  const Hyperedge& e = graph.add_edge(task_id, std::move(members));
  LocalTrustModel ltm;
  ltm.task_id = std::move(task_id);
  ltm.members = e.members;
  for (NodeId i : ltm.members)
    for (NodeId j : ltm.members) {
      if (i == j) continue;
      if (auto r = ratings(i, j)) ltm.ratings[{i, j}] = std::clamp(*r, 0.0, 1.0);
    }
  return ltm;
}

std::vector<std::vector<double>> trust_matrix(const LocalTrustModel& ltm, bool uniform_defaults) {
  const std::size_t m = ltm.members.size();
  std::vector<std::vector<double>> M(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      auto it = ltm.ratings.find({ltm.members[i], ltm.members[j]});
      if (it != ltm.ratings.end()) {
        M[i][j] = it->second;
        sum += it->second;
      }
    }
    if (sum > 0.0) {
      for (auto& x : M[i]) x /= sum;
    } else if (uniform_defaults) {
      for (std::size_t j = 0; j < m; ++j) M[i][j] = i == j ? 0.0 : 1.0 / static_cast<double>(m - 1);
    }
  }
  return M;
}

namespace {

void normalize(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    return;
  }
  for (auto& x : v) x /= sum;
}

}  // namespace

LocalTrustModel eval_trust(LocalTrustModel ltm, TrustAlgorithm algorithm, const TrustOptions& opt) {
  const std::size_t m = ltm.members.size();
  if (m < 2) throw Error(Errc::TooFewMembers);
  if (ltm.ratings.empty() && !opt.uniform_defaults) throw Error(Errc::NoRatings);

  std::vector<double> t(m, 1.0 / static_cast<double>(m));
  ltm.iterations = 0;
  ltm.residual = 0.0;
  if (algorithm == TrustAlgorithm::PowerIteration) {
    const auto M = trust_matrix(ltm, opt.uniform_defaults);
    for (int it = 0; it < opt.max_iterations; ++it) {
      std::vector<double> next(m, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) next[j] += M[i][j] * t[i];
      normalize(next);
      double delta = 0.0;
      for (std::size_t j = 0; j < m; ++j) delta += std::abs(next[j] - t[j]);
      t = std::move(next);
      ltm.iterations = it + 1;
      ltm.residual = delta;
      if (delta < opt.tolerance) break;
    }
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < m; ++i) {
        auto r = ltm.ratings.find({ltm.members[i], ltm.members[j]});
        if (i == j || r == ltm.ratings.end()) continue;
        sum += r->second;
        ++count;
      }
      t[j] = count > 0 ? sum / count : (opt.uniform_defaults ? 1.0 : 0.0);
    }
    normalize(t);
  }

  ltm.trust_values.clear();
  for (std::size_t i = 0; i < m; ++i) ltm.trust_values[ltm.members[i]] = t[i];
  ltm.algorithm = algorithm;
  double sum = 0.0;
  for (const auto& [k, v] : ltm.ratings) sum += v;
  ltm.edge_weight = ltm.ratings.empty() ? 0.0 : sum / static_cast<double>(ltm.ratings.size());
  return ltm;
}

ContractCall record_trust(const LocalTrustModel& ltm, NodeId caller) {
  if (!ltm.algorithm || ltm.trust_values.empty()) throw Error(Errc::NotEvaluated, ltm.task_id);
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [n, v] : ltm.trust_values) values[std::to_string(n)] = v;
  ContractCall call;
  call.contract = ContractKind::TrustRegistry;
  call.function = "record";
  call.caller = caller;
  call.args = {{"taskId", ltm.task_id},
               {"members", ltm.members},
               {"algorithm", algorithm_name(*ltm.algorithm)},
               {"values", values}};
  return call;
}

double default_min_trust(std::size_t members) { return members == 0 ? 0.0 : 0.05 / static_cast<double>(members); }

std::map<NodeId, bool> gate_otmc(const std::map<NodeId, double>& trust_values, double min_trust) {
  std::map<NodeId, bool> out;
  for (const auto& [n, v] : trust_values) out[n] = v >= min_trust;
  return out;
}

}  // namespace metachain
