#pragma once

// Walk sessions: node2vec-style second-order random walks over the directed
// graph, and the sliding-window (context, target) dataset built from them.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gnnpf/errors.hpp"
#include "gnnpf/graph.hpp"
#include "gnnpf/rng.hpp"

namespace gnnpf {

enum class StartPolicy { uniform, root_only, degree_weighted };

inline std::string_view to_string(StartPolicy p) {
  switch (p) {
    case StartPolicy::uniform: return "uniform";
    case StartPolicy::root_only: return "root_only";
    case StartPolicy::degree_weighted: return "degree_weighted";
  }
  return "uniform";
}

inline std::optional<StartPolicy> start_policy_from_string(std::string_view s) {
  if (s == "uniform") return StartPolicy::uniform;
  if (s == "root_only") return StartPolicy::root_only;
  if (s == "degree_weighted") return StartPolicy::degree_weighted;
  return std::nullopt;
}

struct WalkConfig {
  std::size_t num_walkers = 1000;
  std::size_t walk_length = 20;
  double p = 1.0;
  double q = 0.5;
  std::uint64_t seed = 0;
  // degree_weighted starts proportionally to out-degree, so sinks never start.
  StartPolicy start_policy = StartPolicy::degree_weighted;

  void validate() const {
    if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("walk: p and q must be positive");
    if (walk_length < 2) throw std::invalid_argument("walk: walk_length must be at least 2");
  }
};

struct Trace {
  std::vector<NodeId> nodes;
  friend bool operator==(const Trace&, const Trace&) = default;
};

// Precomputed sorted out-neighbor lists for fast second-order lookups.
class WalkGraph {
 public:
  explicit WalkGraph(const DomainGraph& g) : adj_(g.out_adjacency()), root_(g.root_id) {}

  std::size_t size() const { return adj_.size(); }
  NodeId root() const { return root_; }
  const std::vector<NodeId>& out(NodeId v) const { return adj_[v]; }
  bool has_edge(NodeId u, NodeId v) const {
    return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
  }

 private:
  std::vector<std::vector<NodeId>> adj_;
  NodeId root_;
};

// Unnormalized weights over out(cur), in the same order: 1/p to return to
// prev, 1 for nodes prev also links to, 1/q for everything else. With no
// previous node every weight is 1. A sink yields an empty vector.
inline std::vector<double> transition_weights(const WalkGraph& g, std::optional<NodeId> prev,
                                              NodeId cur, double p, double q) {
  const auto& nbrs = g.out(cur);
  std::vector<double> w(nbrs.size(), 1.0);
  if (!prev) return w;
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const NodeId x = nbrs[i];
    if (x == *prev) w[i] = 1.0 / p;
    else if (g.has_edge(*prev, x)) w[i] = 1.0;
    else w[i] = 1.0 / q;
  }
  return w;
}

// Up to cfg.walk_length nodes starting at `start`; ends early at a sink.
inline Trace biased_walk(const WalkGraph& g, NodeId start, const WalkConfig& cfg, Rng& rng) {
  if (start >= g.size()) throw std::out_of_range("biased_walk: start node out of range");
  Trace t;
  t.nodes.reserve(cfg.walk_length);
  t.nodes.push_back(start);
  std::optional<NodeId> prev;
  NodeId cur = start;
  while (t.nodes.size() < cfg.walk_length) {
    const auto w = transition_weights(g, prev, cur, cfg.p, cfg.q);
    const auto pick = sample_weighted(w, rng);
    if (pick >= w.size()) break;
    prev = cur;
    cur = g.out(cur)[pick];
    t.nodes.push_back(cur);
  }
  return t;
}

// num_walkers traces. Walker i draws its start node and steps from its own
// generator seeded with seed + i, so output is independent of scheduling.
inline std::vector<Trace> generate_sessions(const DomainGraph& graph, const WalkConfig& cfg) {
  cfg.validate();
  if (graph.nodes.empty()) throw std::invalid_argument("generate_sessions: empty graph");
  const WalkGraph g(graph);
  std::vector<double> start_weights(g.size(), 1.0);
  if (cfg.start_policy == StartPolicy::degree_weighted) {
    double total = 0.0;
    for (NodeId v = 0; v < g.size(); ++v) total += start_weights[v] = static_cast<double>(g.out(v).size());
    if (total == 0.0) std::fill(start_weights.begin(), start_weights.end(), 1.0);
  }
  std::vector<Trace> traces;
  traces.reserve(cfg.num_walkers);
  for (std::size_t i = 0; i < cfg.num_walkers; ++i) {
    Rng rng(cfg.seed + i);
    NodeId start = g.root();
    if (cfg.start_policy != StartPolicy::root_only) start = sample_weighted(start_weights, rng);
    traces.push_back(biased_walk(g, start, cfg, rng));
  }
  return traces;
}

// ---------------------------------------------------------------------------
// Dataset

struct Pair {
  std::vector<NodeId> context;
  NodeId target = 0;
  NodeId last() const { return context.back(); }
  friend bool operator==(const Pair&, const Pair&) = default;
};

inline std::vector<Pair> sliding_windows(const Trace& t, std::size_t n) {
  if (n < 1) throw std::invalid_argument("sliding_windows: window must be at least 1");
  std::vector<Pair> out;
  for (std::size_t i = 0; i + n < t.nodes.size(); ++i) {
    Pair p;
    p.context.assign(t.nodes.begin() + static_cast<std::ptrdiff_t>(i),
                     t.nodes.begin() + static_cast<std::ptrdiff_t>(i + n));
    p.target = t.nodes[i + n];
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Pair> sliding_windows(const std::vector<Trace>& traces, std::size_t n) {
  std::vector<Pair> out;
  for (const auto& t : traces) {
    auto part = sliding_windows(t, n);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct WalkDataset {
  std::vector<Pair> train;
  std::vector<Pair> val;
  std::vector<Pair> test;
  friend bool operator==(const WalkDataset&, const WalkDataset&) = default;
};

// Partition sizes for n items: val and test take floor(ratio * n), the
// remainder goes to train.
struct SplitSizes {
  std::size_t train, val, test;
};

inline SplitSizes split_sizes(std::size_t n, SplitRatios r = {}) {
  // The epsilon keeps exact products such as 0.15 * 100 from flooring to 14.
  const auto part = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  const std::size_t val = part(r.val);
  const std::size_t test = part(r.test);
  return {n - val - test, val, test};
}

// Shuffles by seed, then cuts train | val | test.
inline WalkDataset split_dataset(std::vector<Pair> pairs, std::uint64_t seed, SplitRatios r = {}) {
  if (pairs.empty()) throw std::invalid_argument("split_dataset: no pairs");
  Rng rng(seed);
  shuffle(std::span<Pair>(pairs), rng);
  const auto sizes = split_sizes(pairs.size(), r);
  WalkDataset ds;
  auto it = std::make_move_iterator(pairs.begin());
  ds.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
  it += static_cast<std::ptrdiff_t>(sizes.train);
  ds.val.assign(it, it + static_cast<std::ptrdiff_t>(sizes.val));
  it += static_cast<std::ptrdiff_t>(sizes.val);
  ds.test.assign(it, std::make_move_iterator(pairs.end()));
  return ds;
}

// ---------------------------------------------------------------------------
// JSON Lines

inline std::string traces_to_jsonl(const std::vector<Trace>& traces) {
  std::string out;
  for (const auto& t : traces) out += nlohmann::json{{"nodes", t.nodes}}.dump() + "\n";
  return out;
}

namespace detail {

template <typename Fn>
void for_each_jsonl(std::string_view text, const std::string& where, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string loc = where + ":" + std::to_string(line_no);
    const auto doc = parse_json_text(line, loc);
    try {
      fn(doc, loc);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(loc + ": " + e.what());
    }
  }
}

}  // namespace detail

inline std::vector<Trace> traces_from_jsonl(std::string_view text, const std::string& where = "traces.jsonl") {
  std::vector<Trace> out;
  detail::for_each_jsonl(text, where, [&](const nlohmann::json& doc, const std::string& loc) {
    Trace t;
    t.nodes = doc.at("nodes").get<std::vector<NodeId>>();
    if (t.nodes.empty()) throw FormatError(loc + ": empty trace");
    out.push_back(std::move(t));
  });
  return out;
}

inline std::string dataset_to_jsonl(const WalkDataset& ds) {
  std::string out;
  const auto emit = [&](const std::vector<Pair>& part, const char* name) {
    for (const auto& p : part)
      out += nlohmann::json{{"context", p.context}, {"target", p.target}, {"split", name}}.dump() + "\n";
  };
  emit(ds.train, "train");
  emit(ds.val, "val");
  emit(ds.test, "test");
  return out;
}

inline WalkDataset dataset_from_jsonl(std::string_view text, const std::string& where = "dataset.jsonl") {
  WalkDataset ds;
  detail::for_each_jsonl(text, where, [&](const nlohmann::json& doc, const std::string& loc) {
    Pair p;
    p.context = doc.at("context").get<std::vector<NodeId>>();
    if (p.context.empty()) throw FormatError(loc + ": empty context");
    p.target = doc.at("target").get<NodeId>();
    const auto split = doc.at("split").get<std::string>();
    if (split == "train") ds.train.push_back(std::move(p));
    else if (split == "val") ds.val.push_back(std::move(p));
    else if (split == "test") ds.test.push_back(std::move(p));
    else throw FormatError(loc + ": unknown split '" + split + "'");
  });
  return ds;
}

// Each pair as a short trace: context followed by target.
inline std::vector<Trace> pairs_as_traces(const std::vector<Pair>& pairs) {
  std::vector<Trace> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Trace t{p.context};
    t.nodes.push_back(p.target);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace gnnpf
