#pragma once

// Trace-replay cache simulator with embedding-driven prefetching and the
// no-prefetch and first-order Markov baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gnnpf/matrix.hpp"
#include "gnnpf/walk.hpp"

namespace gnnpf {

enum class CachePolicy { unbounded, lru };

inline std::string_view to_string(CachePolicy p) { return p == CachePolicy::lru ? "lru" : "unbounded"; }

inline std::optional<CachePolicy> cache_policy_from_string(std::string_view s) {
  if (s == "unbounded") return CachePolicy::unbounded;
  if (s == "lru") return CachePolicy::lru;
  return std::nullopt;
}

struct CacheCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t prefetch_inserts = 0;
  std::uint64_t evictions = 0;
  friend bool operator==(const CacheCounters&, const CacheCounters&) = default;
};

struct AccessResult {
  bool hit = false;
  bool prefetched = false;  // hit on an entry brought in by prefetch and not yet used
};

struct CacheEvent {
  enum class Kind { hit, miss, prefetch_insert, prefetch_refresh, evict };
  Kind kind;
  NodeId node;
};

// In-process key store. Recency order is kept for both policies; only the
// LRU policy ever evicts.
class Cache {
 public:
  explicit Cache(CachePolicy policy = CachePolicy::unbounded, std::size_t capacity = 0)
      : policy_(policy), capacity_(capacity) {
    if (policy == CachePolicy::lru && capacity == 0)
      throw std::invalid_argument("Cache: LRU capacity must be at least 1");
  }

  AccessResult access(NodeId node) {
    if (auto it = index_.find(node); it != index_.end()) {
      ++counters_.hits;
      touch(it->second);
      AccessResult r{true, it->second.from_prefetch};
      it->second.from_prefetch = false;
      log(CacheEvent::Kind::hit, node);
      return r;
    }
    ++counters_.misses;
    log(CacheEvent::Kind::miss, node);
    insert(node, false);
    return {false, false};
  }

  void prefetch(NodeId node) {
    if (auto it = index_.find(node); it != index_.end()) {
      touch(it->second);
      log(CacheEvent::Kind::prefetch_refresh, node);
      return;
    }
    ++counters_.prefetch_inserts;
    log(CacheEvent::Kind::prefetch_insert, node);
    insert(node, true);
  }

  bool contains(NodeId node) const { return index_.contains(node); }
  std::size_t size() const { return index_.size(); }
  const CacheCounters& counters() const { return counters_; }
  CachePolicy policy() const { return policy_; }
  std::size_t capacity() const { return capacity_; }

  // Most recent first.
  std::vector<NodeId> contents() const { return {order_.begin(), order_.end()}; }

  // Drops every entry; counters keep accumulating.
  void clear() {
    order_.clear();
    index_.clear();
  }

  void enable_audit(bool on = true) { audit_enabled_ = on; }
  const std::vector<CacheEvent>& audit() const { return audit_; }

 private:
  struct Slot {
    std::list<NodeId>::iterator pos;
    bool from_prefetch = false;
  };

  void touch(Slot& slot) { order_.splice(order_.begin(), order_, slot.pos); }

  void insert(NodeId node, bool from_prefetch) {
    order_.push_front(node);
    index_.emplace(node, Slot{order_.begin(), from_prefetch});
    if (policy_ == CachePolicy::lru && index_.size() > capacity_) {
      const NodeId victim = order_.back();
      order_.pop_back();
      index_.erase(victim);
      ++counters_.evictions;
      log(CacheEvent::Kind::evict, victim);
    }
  }

  void log(CacheEvent::Kind kind, NodeId node) {
    if (audit_enabled_) audit_.push_back({kind, node});
  }

  CachePolicy policy_;
  std::size_t capacity_;
  std::list<NodeId> order_;
  std::unordered_map<NodeId, Slot> index_;
  CacheCounters counters_;
  bool audit_enabled_ = false;
  std::vector<CacheEvent> audit_;
};

// ---------------------------------------------------------------------------
// Predictors

// Top-k nodes by cosine similarity to `current`, current excluded. The
// k + 1 best are taken (ties to the smaller id) and current is removed if
// present, so the result always has exactly k distinct ids.
class EmbeddingPredictor {
 public:
  EmbeddingPredictor(Matrix embeddings, std::size_t top_k)
      : z_(std::move(embeddings)), top_k_(top_k), norms_(z_.rows()) {
    if (top_k_ < 1 || top_k_ >= z_.rows())
      throw std::invalid_argument("EmbeddingPredictor: top_k must satisfy 1 <= top_k < n");
    for (std::size_t i = 0; i < z_.rows(); ++i) norms_[i] = std::sqrt(dot(z_.row(i), z_.row(i)));
  }

  std::vector<double> cosine_scores(NodeId current) const {
    std::vector<double> s(z_.rows(), 0.0);
    const auto zc = z_.row(current);
    for (std::size_t w = 0; w < z_.rows(); ++w) {
      const double denom = norms_[current] * norms_[w];
      s[w] = denom > 0.0 ? dot(zc, z_.row(w)) / denom : 0.0;
    }
    return s;
  }

  std::vector<NodeId> predict_next(NodeId current) const {
    if (current >= z_.rows()) throw std::out_of_range("predict_next: node out of range");
    const auto s = cosine_scores(current);
    std::vector<NodeId> idx(z_.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto better = [&](NodeId a, NodeId b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top_k_ + 1), idx.end(), better);
    idx.resize(top_k_ + 1);
    if (auto it = std::find(idx.begin(), idx.end(), current); it != idx.end()) idx.erase(it);
    idx.resize(top_k_);
    return idx;
  }

  std::vector<NodeId> operator()(NodeId current) const { return predict_next(current); }

  std::size_t top_k() const { return top_k_; }
  const Matrix& embeddings() const { return z_; }

 private:
  Matrix z_;
  std::size_t top_k_;
  std::vector<double> norms_;
};

// First-order transition counts. Successors rank by count, then by id.
// Nodes never seen as a source, and seen nodes with fewer than k distinct
// successors, are filled from the global visit-popularity list.
class MarkovPredictor {
 public:
  MarkovPredictor(const std::vector<Trace>& train, std::size_t top_k) : top_k_(top_k) {
    if (train.empty()) throw std::invalid_argument("MarkovPredictor: no training traces");
    std::map<NodeId, std::uint64_t> visits;
    for (const auto& t : train) {
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        ++visits[t.nodes[i]];
        if (i + 1 < t.nodes.size()) ++counts_[t.nodes[i]][t.nodes[i + 1]];
      }
    }
    popular_ = ranked(visits);
  }

  std::uint64_t count(NodeId from, NodeId to) const {
    const auto it = counts_.find(from);
    if (it == counts_.end()) return 0;
    const auto jt = it->second.find(to);
    return jt == it->second.end() ? 0 : jt->second;
  }

  const std::map<NodeId, std::map<NodeId, std::uint64_t>>& table() const { return counts_; }

  std::vector<NodeId> predict_next(NodeId current) const {
    std::vector<NodeId> out;
    if (const auto it = counts_.find(current); it != counts_.end()) {
      for (NodeId v : ranked(it->second)) {
        if (out.size() == top_k_) break;
        if (v != current) out.push_back(v);
      }
    }
    for (NodeId v : popular_) {
      if (out.size() == top_k_) break;
      if (v != current && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
  }

  std::vector<NodeId> operator()(NodeId current) const { return predict_next(current); }

 private:
  static std::vector<NodeId> ranked(const std::map<NodeId, std::uint64_t>& counts) {
    std::vector<std::pair<NodeId, std::uint64_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<NodeId> out;
    for (const auto& [v, c] : items) out.push_back(v);
    return out;
  }

  std::size_t top_k_;
  std::map<NodeId, std::map<NodeId, std::uint64_t>> counts_;
  std::vector<NodeId> popular_;
};

// ---------------------------------------------------------------------------
// Prefetch manager

inline std::string format_node_list(const std::vector<NodeId>& nodes) {
  std::string s = "[";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(nodes[i]);
  }
  return s + "]";
}

// Couples a predictor with a cache: access() serves a request, prefetch()
// loads the predicted successors of a node.
template <typename Predictor>
class PrefetchManager {
 public:
  PrefetchManager(Predictor predictor, Cache cache, std::ostream* log = nullptr)
      : predictor_(std::move(predictor)), cache_(std::move(cache)), log_(log) {}

  std::vector<NodeId> predict_next(NodeId current) const { return predictor_(current); }

  std::vector<NodeId> prefetch(NodeId current) {
    auto predicted = predictor_(current);
    if (log_)
      *log_ << "Prefetching for Node " << current << ": Predicted Next Nodes -> " << format_node_list(predicted)
            << "\n";
    for (NodeId v : predicted) cache_.prefetch(v);
    return predicted;
  }

  AccessResult access(NodeId node) { return cache_.access(node); }

  Cache& cache() { return cache_; }
  const Cache& cache() const { return cache_; }

 private:
  Predictor predictor_;
  Cache cache_;
  std::ostream* log_;
};

// ---------------------------------------------------------------------------
// Simulation

struct CacheConfig {
  CachePolicy policy = CachePolicy::unbounded;
  std::size_t capacity = 0;
  bool reset_between_traces = true;
};

struct SimulationStats {
  CacheCounters cache;
  std::uint64_t accesses = 0;
  std::uint64_t transition_accesses = 0;  // accesses after the first of each trace
  std::uint64_t transition_hits = 0;
  std::uint64_t prefetch_events = 0;      // (position, predicted node) pairs issued
  std::uint64_t useful_prefetches = 0;    // ... whose node is accessed later in the trace
  std::uint64_t covered_accesses = 0;     // hits served by a prefetched entry

  static double ratio(std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  }
  double hit_rate() const { return ratio(cache.hits, accesses); }
  double transition_hit_rate() const { return ratio(transition_hits, transition_accesses); }
  double prefetch_precision() const { return ratio(useful_prefetches, prefetch_events); }
  double coverage() const { return ratio(covered_accesses, accesses); }
};

// Replays every trace: access(node) then prefetch(node), in order. The
// cache is cleared before each trace unless cfg.reset_between_traces is off.
template <typename Predictor>
SimulationStats simulate(const Predictor& predict, const std::vector<Trace>& traces, const CacheConfig& cfg,
                         std::ostream* log = nullptr, Cache* audit_cache = nullptr) {
  if (traces.empty()) throw std::invalid_argument("simulate: no traces");
  Cache local(cfg.policy, cfg.capacity);
  Cache& cache = audit_cache ? *audit_cache : local;
  SimulationStats stats;
  for (const auto& t : traces) {
    if (cfg.reset_between_traces) cache.clear();
    std::unordered_map<NodeId, std::size_t> last_seen;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) last_seen[t.nodes[i]] = i;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const NodeId node = t.nodes[i];
      const auto r = cache.access(node);
      ++stats.accesses;
      if (i > 0) {
        ++stats.transition_accesses;
        if (r.hit) ++stats.transition_hits;
      }
      if (r.prefetched) ++stats.covered_accesses;
      const auto predicted = predict(node);
      if (log)
        *log << "Prefetching for Node " << node << ": Predicted Next Nodes -> " << format_node_list(predicted)
             << "\n";
      for (NodeId v : predicted) {
        cache.prefetch(v);
        ++stats.prefetch_events;
        const auto it = last_seen.find(v);
        if (it != last_seen.end() && it->second > i) ++stats.useful_prefetches;
      }
    }
  }
  stats.cache = cache.counters();
  return stats;
}

inline std::vector<NodeId> no_prefetch(NodeId) { return {}; }

inline SimulationStats simulate(const Matrix& embeddings, const std::vector<Trace>& traces, std::size_t top_k,
                                const CacheConfig& cfg) {
  return simulate(EmbeddingPredictor(embeddings, top_k), traces, cfg);
}

// ---------------------------------------------------------------------------
// Report

inline constexpr int kReportVersion = 1;

inline nlohmann::json stats_to_json(const SimulationStats& s) {
  return {{"hit_rate", s.hit_rate()},
          {"transition_hit_rate", s.transition_hit_rate()},
          {"prefetch_precision", s.prefetch_precision()},
          {"coverage", s.coverage()},
          {"accesses", s.accesses},
          {"hits", s.cache.hits},
          {"misses", s.cache.misses},
          {"prefetch_inserts", s.cache.prefetch_inserts},
          {"evictions", s.cache.evictions}};
}

struct SimulationReport {
  SimulationStats gnn;
  std::optional<SimulationStats> no_prefetch;
  std::optional<SimulationStats> markov;
  nlohmann::json config = nlohmann::json::object();
};

inline std::string report_to_json(const SimulationReport& r) {
  nlohmann::json doc = stats_to_json(r.gnn);
  doc["schema_version"] = kReportVersion;
  nlohmann::json baselines = nlohmann::json::object();
  if (r.no_prefetch) baselines["no_prefetch"] = stats_to_json(*r.no_prefetch);
  if (r.markov) baselines["markov"] = stats_to_json(*r.markov);
  doc["baselines"] = std::move(baselines);
  doc["config"] = r.config;
  return doc.dump(2) + "\n";
}

}  // namespace gnnpf
