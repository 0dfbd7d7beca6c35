#include "metachain/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace metachain {

using nlohmann::json;

std::string_view latency_name(LatencyClass c) {
  switch (c) {
    case LatencyClass::Low: return "Low";
    case LatencyClass::Mid: return "Mid";
    case LatencyClass::High: return "High";
  }
  return "?";
}

LatencyClass latency_class(double p50) {
  if (p50 < 15.0) return LatencyClass::Low;
  if (p50 < 50.0) return LatencyClass::Mid;
  return LatencyClass::High;
}

std::array<double, kFeatureCount> FeatureVector::values() const {
  return {static_cast<double>(node_count), fault_ratio, hw == HardwareClass::Large ? 1.0 : 0.0,
          static_cast<double>(static_cast<int>(latency))};
}

std::string_view model_kind_name(ModelKind k) { return k == ModelKind::Tree ? "Tree" : "BoostedStumps"; }

ModelKind model_kind_from_name(std::string_view name) {
  if (name == "Tree") return ModelKind::Tree;
  if (name == "BoostedStumps") return ModelKind::BoostedStumps;
  throw Error(Errc::BadConfig, "model kind '" + std::string(name) + "'");
}

namespace {

int kind_index(ConsensusKind k) {
  for (std::size_t i = 0; i < kAllKinds.size(); ++i)
    if (kAllKinds[i] == k) return static_cast<int>(i);
  return 0;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<MetricsRow> metrics_rows(const std::vector<SweepRow>& rows) {
  std::vector<MetricsRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back(MetricsRow{r.point.scenario, r.point.engine, r.point.network.node_count,
                             round2(r.point.network.fault_ratio), r.point.network.hw, r.point.network.seed,
                             r.metrics.tps, r.metrics.lat_p50, r.metrics.lat_p95, r.point.network.link_latency_p50()});
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::BadConfig, "empty metrics csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader) throw Error(Errc::BadConfig, "unexpected csv header: " + line);
  std::vector<MetricsRow> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw Error(Errc::BadConfig, "line " + std::to_string(lineno) + ": expected 9 fields");
    try {
      MetricsRow r;
      r.scenario = f[0];
      r.engine = kind_from_name(f[1]);
      r.nodes = std::stoi(f[2]);
      r.fault_ratio = round2(std::stod(f[3]));
      r.hw = hw_from_name(f[4]);
      r.seed = std::stoull(f[5]);
      r.tps = std::stod(f[6]);
      r.lat_p50 = std::stod(f[7]);
      r.lat_p95 = std::stod(f[8]);
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(Errc::BadConfig, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::logic_error&) {
      throw Error(Errc::BadConfig, "line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

ConsensusKind best_engine(const std::vector<MetricsRow>& point) {
  if (point.empty()) throw Error(Errc::IncompleteGrid, "empty grid point");
  const MetricsRow* best = &point.front();
  for (const auto& r : point) {
    if (r.tps > best->tps) {
      best = &r;
    } else if (r.tps == best->tps) {
      if (r.lat_p50 < best->lat_p50 ||
          (r.lat_p50 == best->lat_p50 && kind_index(r.engine) < kind_index(best->engine)))
        best = &r;
    }
  }
  return best->engine;
}

std::vector<LabeledSample> build_dataset(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, int, double, HardwareClass, std::uint64_t, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<MetricsRow>> groups;
  for (const auto& r : rows) {
    Key k{r.scenario, r.nodes, r.fault_ratio, r.hw, r.seed, r.link_latency_p50};
    auto [it, fresh] = groups.try_emplace(k);
    if (fresh) order.push_back(k);
    for (const auto& other : it->second)
      if (other.engine == r.engine) throw Error(Errc::IncompleteGrid, "duplicate row for " + r.scenario);
    it->second.push_back(r);
  }
  std::vector<LabeledSample> out;
  for (const auto& k : order) {
    const auto& g = groups.at(k);
    if (g.size() != kAllKinds.size())
      throw Error(Errc::IncompleteGrid, std::get<0>(k) + " n=" + std::to_string(std::get<1>(k)) + " has " +
                                            std::to_string(g.size()) + " engines");
    LabeledSample s;
    s.features = FeatureVector{std::get<1>(k), std::get<2>(k), std::get<3>(k), latency_class(g.front().link_latency_p50)};
    s.label = best_engine(g);
    out.push_back(s);
  }
  return out;
}

std::vector<LabeledSample> build_dataset(const std::vector<SweepRow>& rows) { return build_dataset(metrics_rows(rows)); }

// ---- CART ----

namespace {

using Counts = std::array<int, 3>;

double gini(const Counts& c) {
  const double n = c[0] + c[1] + c[2];
  if (n == 0) return 0.0;
  double g = 1.0;
  for (int v : c) g -= (v / n) * (v / n);
  return g;
}

ConsensusKind majority(const Counts& c) {
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (c[i] > c[best]) best = i;
  return kAllKinds[best];
}

struct TreeBuilder {
  const std::vector<LabeledSample>& data;
  const TrainParams& p;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t> idx, int depth) {
    Counts c{};
    for (auto i : idx) ++c[kind_index(data[i].label)];
    const int self = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{-1, 0.0, -1, -1, majority(c)});

    const bool pure = std::count(c.begin(), c.end(), 0) >= 2;
    if (pure || (p.max_depth >= 0 && depth >= p.max_depth) || idx.size() < 2 * p.min_leaf) return self;

    const double parent = gini(c);
    // zero-gain splits are allowed so impure nodes keep splitting (XOR-like data)
    double best_gain = -1.0;
    int best_f = -1;
    double best_t = 0.0;
    for (int f = 0; f < static_cast<int>(kFeatureCount); ++f) {
      std::vector<std::pair<double, int>> xs;
      for (auto i : idx) xs.emplace_back(data[i].features.values()[f], kind_index(data[i].label));
      std::sort(xs.begin(), xs.end());
      Counts left{};
      Counts right = c;
      for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        ++left[xs[k].second];
        --right[xs[k].second];
        if (xs[k].first == xs[k + 1].first) continue;
        const std::size_t nl = k + 1, nr = xs.size() - nl;
        if (nl < p.min_leaf || nr < p.min_leaf) continue;
        const double child = (nl * gini(left) + nr * gini(right)) / static_cast<double>(xs.size());
        if (parent - child > best_gain) {
          best_gain = parent - child;
          best_f = f;
          best_t = xs[k].first;
        }
      }
    }
    if (best_f < 0) return self;

    std::vector<std::size_t> l, r;
    for (auto i : idx) (data[i].features.values()[best_f] <= best_t ? l : r).push_back(i);
    nodes[self].feature = best_f;
    nodes[self].threshold = best_t;
    const int li = build(std::move(l), depth + 1);
    const int ri = build(std::move(r), depth + 1);
    nodes[self].left = li;
    nodes[self].right = ri;
    return self;
  }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Stump fit_stump(const std::vector<LabeledSample>& data, const std::vector<double>& resid, const std::vector<double>& hess,
                int klass) {
  const std::size_t n = data.size();
  double tot_r = 0.0, tot_h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tot_r += resid[i];
    tot_h += hess[i];
  }
  auto leaf = [](double r, double h) { return std::clamp(r / std::max(h, 1e-9), -4.0, 4.0); };

  Stump best{klass, 0, 0.0, leaf(tot_r, tot_h), 0.0};
  double best_x = -1.0;
  {
    double mx = data[0].features.values()[0];
    for (const auto& s : data) mx = std::max(mx, s.features.values()[0]);
    best.threshold = mx;
  }
  // Second-order gain: G_l^2/(H_l+1) + G_r^2/(H_r+1).
  best_x = tot_r * tot_r / (tot_h + 1.0);
  for (int f = 0; f < static_cast<int>(kFeatureCount); ++f) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data[a].features.values()[f] < data[b].features.values()[f];
    });
    double lr = 0.0, lh = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      lr += resid[order[k]];
      lh += hess[order[k]];
      const double x = data[order[k]].features.values()[f];
      if (x == data[order[k + 1]].features.values()[f]) continue;
      const double rr = tot_r - lr, rh = tot_h - lh;
      const double score = lr * lr / (lh + 1.0) + rr * rr / (rh + 1.0);
      if (score > best_x + 1e-12) {
        best_x = score;
        best = Stump{klass, f, x, leaf(lr, lh), leaf(rr, tot_h - lh)};
      }
    }
  }
  return best;
}

double stump_value(const Stump& s, const FeatureVector& f) {
  return f.values()[s.feature] <= s.threshold ? s.left : s.right;
}

}  // namespace

DecisionModel fit(const std::vector<LabeledSample>& samples, ModelKind kind, const TrainParams& params) {
  if (samples.empty()) throw Error(Errc::TooFewSamples, "0 samples");
  DecisionModel m;
  m.kind = kind;
  if (kind == ModelKind::Tree) {
    TreeBuilder b{samples, params, {}};
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    b.build(std::move(idx), 0);
    m.nodes = std::move(b.nodes);
    return m;
  }

  m.shrinkage = params.shrinkage;
  const std::size_t n = samples.size();
  for (int c = 0; c < 3; ++c) {
    double pos = 0.0;
    for (const auto& smp : samples) pos += kind_index(smp.label) == c ? 1.0 : 0.0;
    const double p = std::clamp(pos / static_cast<double>(n), 1e-3, 1.0 - 1e-3);
    m.base[c] = std::log(p / (1.0 - p));
  }
  std::vector<std::array<double, 3>> F(n, m.base);
  for (int round = 0; round < params.rounds; ++round) {
    for (int c = 0; c < 3; ++c) {
      std::vector<double> resid(n), hess(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = sigmoid(F[i][c]);
        const double y = kind_index(samples[i].label) == c ? 1.0 : 0.0;
        resid[i] = y - p;
        hess[i] = p * (1.0 - p);
      }
      Stump s = fit_stump(samples, resid, hess, c);
      for (std::size_t i = 0; i < n; ++i) F[i][c] += m.shrinkage * stump_value(s, samples[i].features);
      m.stumps.push_back(s);
    }
  }
  return m;
}

ConsensusKind DecisionModel::predict(const FeatureVector& f) const {
  if (kind == ModelKind::Tree) {
    if (nodes.empty()) throw Error(Errc::BadModel, "empty tree");
    std::size_t at = 0;
    for (std::size_t steps = 0; steps <= nodes.size(); ++steps) {
      const auto& node = nodes[at];
      if (node.feature < 0) return node.label;
      at = static_cast<std::size_t>(f.values()[node.feature] <= node.threshold ? node.left : node.right);
    }
    throw Error(Errc::BadModel, "cycle in tree");
  }
  std::array<double, 3> score = base;
  for (const auto& s : stumps) score[s.klass] += shrinkage * stump_value(s, f);
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (score[c] > score[best]) best = c;
  return kAllKinds[best];
}

ConsensusKind predict(const DecisionModel& model, const FeatureVector& f) { return model.predict(f); }

double accuracy(const DecisionModel& model, const std::vector<LabeledSample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& s : samples)
    if (model.predict(s.features) == s.label) ++hit;
  return static_cast<double>(hit) / static_cast<double>(samples.size());
}

DecisionModel train(const std::vector<LabeledSample>& samples, ModelKind kind, std::uint64_t seed,
                    const TrainParams& params) {
  if (samples.size() < 10) throw Error(Errc::TooFewSamples, std::to_string(samples.size()) + " samples");
  const std::size_t n = samples.size();
  const std::size_t n_train =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(params.train_fraction * n)), 1, n - 1);
  double acc = 0.0;
  for (int r = 0; r < params.repeats; ++r) {
    std::mt19937_64 rng(sub_seed(seed, "split-" + std::to_string(r)));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
    std::vector<LabeledSample> tr, te;
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? tr : te).push_back(samples[perm[i]]);
    acc += accuracy(fit(tr, kind, params), te);
  }
  DecisionModel m = fit(samples, kind, params);
  m.train_accuracy = accuracy(m, samples);
  m.test_accuracy = params.repeats > 0 ? acc / params.repeats : 0.0;
  return m;
}

json DecisionModel::to_json() const {
  json j = {{"version", kVersion},
            {"kind", model_kind_name(kind)},
            {"features", kFeatureNames},
            {"classes", {"PoA", "TDPoS", "PoW"}},
            {"trainAccuracy", train_accuracy},
            {"testAccuracy", test_accuracy}};
  if (kind == ModelKind::Tree) {
    json arr = json::array();
    for (const auto& n : nodes) {
      if (n.feature < 0)
        arr.push_back({{"label", kind_name(n.label)}});
      else
        arr.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    j["nodes"] = std::move(arr);
  } else {
    j["shrinkage"] = shrinkage;
    j["base"] = base;
    json arr = json::array();
    for (const auto& s : stumps)
      arr.push_back({{"class", s.klass},
                     {"feature", s.feature},
                     {"threshold", s.threshold},
                     {"left", s.left},
                     {"right", s.right}});
    j["stumps"] = std::move(arr);
  }
  return j;
}

DecisionModel DecisionModel::from_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(Errc::BadModel, "not an object");
    if (!j.contains("version") || j.at("version").get<int>() != kVersion)
      throw Error(Errc::BadModel, "unsupported version");
    DecisionModel m;
    m.kind = model_kind_from_name(j.at("kind").get<std::string>());
    m.train_accuracy = j.value("trainAccuracy", 0.0);
    m.test_accuracy = j.value("testAccuracy", 0.0);
    const int nf = static_cast<int>(kFeatureCount);
    if (m.kind == ModelKind::Tree) {
      for (const auto& n : j.at("nodes")) {
        TreeNode t;
        if (n.contains("label")) {
          t.label = kind_from_name(n.at("label").get<std::string>());
        } else {
          t.feature = n.at("feature").get<int>();
          t.threshold = n.at("threshold").get<double>();
          t.left = n.at("left").get<int>();
          t.right = n.at("right").get<int>();
          if (t.feature < 0 || t.feature >= nf) throw Error(Errc::BadModel, "feature index");
        }
        m.nodes.push_back(t);
      }
      const int size = static_cast<int>(m.nodes.size());
      if (size == 0) throw Error(Errc::BadModel, "empty tree");
      for (int i = 0; i < size; ++i) {
        const auto& t = m.nodes[i];
        if (t.feature >= 0 && (t.left <= i || t.right <= i || t.left >= size || t.right >= size))
          throw Error(Errc::BadModel, "child index");
      }
    } else {
      m.shrinkage = j.at("shrinkage").get<double>();
      m.base = j.at("base").get<std::array<double, 3>>();
      for (const auto& s : j.at("stumps")) {
        Stump st{s.at("class").get<int>(), s.at("feature").get<int>(), s.at("threshold").get<double>(),
                 s.at("left").get<double>(), s.at("right").get<double>()};
        if (st.klass < 0 || st.klass > 2 || st.feature < 0 || st.feature >= nf)
          throw Error(Errc::BadModel, "stump index");
        m.stumps.push_back(st);
      }
    }
    return m;
  } catch (const Error& e) {
    if (e.code() == Errc::BadModel) throw;
    throw Error(Errc::BadModel, e.what());
  } catch (const json::exception& e) {
    throw Error(Errc::BadModel, e.what());
  }
}

FeatureVector live_features(const LiveStatus& st) {
  return FeatureVector{st.node_count, std::max(0.0, round2(st.observed_fault_ratio)), st.hw,
                       latency_class(st.link_latency_p50)};
}

std::optional<ControlAction> controller_tick(const DecisionModel& model, const LiveStatus& st,
                                             const ControllerConfig& cfg) {
  if (st.proposal_pending) return std::nullopt;
  const ConsensusKind want = model.predict(live_features(st));
  if (want != st.engine) return SwitchAction{want};
  if (st.ledger_mode == LedgerMode::Chain && st.pool_size > cfg.high_water) return ConvertAction{LedgerMode::Dag};
  if (st.ledger_mode == LedgerMode::Dag && st.pool_size < cfg.low_water) return ConvertAction{LedgerMode::Chain};
  return std::nullopt;
}

ControllerHook model_controller(DecisionModel model, ControllerConfig cfg) {
  return [model = std::move(model), cfg](const LiveStatus& st) { return controller_tick(model, st, cfg); };
}

}  // namespace metachain
