#pragma once

// Graph constructor: DomainGraph built from a MirrorSnapshot, plus the
// per-node structural and content features used as model input.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gnnpf/errors.hpp"
#include "gnnpf/html.hpp"
#include "gnnpf/rng.hpp"
#include "gnnpf/route_mapper.hpp"

namespace gnnpf {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

inline constexpr std::size_t kFeatureCount = 7;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "out_degree", "in_degree", "pagerank", "clustering", "depth", "word_count", "image_count"};

struct FeatureVector {
  std::uint64_t out_degree = 0;
  std::uint64_t in_degree = 0;
  double pagerank = 0.0;
  double clustering = 0.0;
  std::uint64_t depth = 0;
  std::uint64_t word_count = 0;
  std::uint64_t image_count = 0;

  std::array<double, kFeatureCount> values() const {
    return {static_cast<double>(out_degree), static_cast<double>(in_degree), pagerank, clustering,
            static_cast<double>(depth),      static_cast<double>(word_count),
            static_cast<double>(image_count)};
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct GraphNode {
  NodeId id = 0;
  std::string path;
  PageKind kind = PageKind::page;
  FeatureVector features;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct DomainGraph {
  std::vector<GraphNode> nodes;
  std::vector<Edge> edges;
  NodeId root_id = 0;

  std::size_t size() const { return nodes.size(); }

  // Out-neighbor lists, each sorted ascending.
  std::vector<std::vector<NodeId>> out_adjacency() const {
    std::vector<std::vector<NodeId>> adj(nodes.size());
    for (auto [s, d] : edges) adj[s].push_back(d);
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
  }

  // Neighbor lists of the undirected projection: sorted, unique, no self.
  std::vector<std::vector<NodeId>> undirected_adjacency() const {
    std::vector<std::vector<NodeId>> adj(nodes.size());
    for (auto [s, d] : edges) {
      if (s == d) continue;
      adj[s].push_back(d);
      adj[d].push_back(s);
    }
    for (auto& a : adj) {
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return adj;
  }

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const {
    if (nodes.empty()) throw std::invalid_argument("graph has no nodes");
    std::unordered_set<std::string> paths;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id != i) throw std::invalid_argument("node ids are not dense 0..N-1");
      if (!paths.insert(nodes[i].path).second)
        throw std::invalid_argument("duplicate node path: " + nodes[i].path);
    }
    std::set<Edge> seen;
    for (auto e : edges) {
      if (e.first >= nodes.size() || e.second >= nodes.size())
        throw std::invalid_argument("edge references a missing node");
      if (!seen.insert(e).second) throw std::invalid_argument("duplicate edge");
    }
    if (root_id >= nodes.size()) throw std::invalid_argument("root_id out of range");
  }

  friend bool operator==(const DomainGraph&, const DomainGraph&) = default;
};

// ---------------------------------------------------------------------------
// Structural measures

struct PageRankOptions {
  double damping = 0.85;
  double tol = 1e-12;
  std::size_t max_iters = 1000;
};

// Power iteration with uniform teleport; dangling nodes spread their mass
// uniformly. Stops when the L1 change drops below tol.
inline std::vector<double> pagerank(const DomainGraph& g, PageRankOptions opt = {}) {
  const std::size_t n = g.size();
  if (n == 0) throw std::invalid_argument("pagerank: empty graph");
  const auto adj = g.out_adjacency();
  std::vector<double> rank(n, 1.0 / static_cast<double>(n)), next(n);
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    double dangling = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      if (adj[u].empty()) dangling += rank[u];
    const double base =
        (1.0 - opt.damping) / static_cast<double>(n) + opt.damping * dangling / static_cast<double>(n);
    std::fill(next.begin(), next.end(), base);
    for (std::size_t u = 0; u < n; ++u) {
      if (adj[u].empty()) continue;
      const double share = opt.damping * rank[u] / static_cast<double>(adj[u].size());
      for (NodeId v : adj[u]) next[v] += share;
    }
    double change = 0.0;
    for (std::size_t v = 0; v < n; ++v) change += std::abs(next[v] - rank[v]);
    rank.swap(next);
    if (change < opt.tol) break;
  }
  double total = 0.0;
  for (double r : rank) total += r;
  for (double& r : rank) r /= total;
  return rank;
}

// Local clustering coefficient on the undirected projection; nodes with
// fewer than two neighbors score 0.
inline std::vector<double> clustering_coefficient(const DomainGraph& g) {
  const auto adj = g.undirected_adjacency();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto& nb = adj[v];
    const std::size_t k = nb.size();
    if (k < 2) continue;
    std::size_t links = 0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j)
        if (std::binary_search(adj[nb[i]].begin(), adj[nb[i]].end(), nb[j])) ++links;
    out[v] = 2.0 * static_cast<double>(links) / static_cast<double>(k * (k - 1));
  }
  return out;
}

// BFS hop count from root along edge direction. Unreachable nodes get N.
inline std::vector<std::size_t> depth_from_root(const DomainGraph& g) {
  const std::size_t n = g.size();
  if (g.root_id >= n) throw std::invalid_argument("depth_from_root: invalid root");
  const auto adj = g.out_adjacency();
  std::vector<std::size_t> depth(n, n);
  std::deque<NodeId> queue{g.root_id};
  depth[g.root_id] = 0;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : adj[u]) {
      if (depth[v] != n) continue;
      depth[v] = depth[u] + 1;
      queue.push_back(v);
    }
  }
  return depth;
}

inline html::ContentCounts content_features(std::string_view doc) { return html::count_content(doc); }

// Histogram of undirected-projection degree -> node count.
inline std::map<std::size_t, std::size_t> degree_distribution(const DomainGraph& g) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& nb : g.undirected_adjacency()) ++hist[nb.size()];
  return hist;
}

inline std::string degree_distribution_csv(const std::map<std::size_t, std::size_t>& hist) {
  std::string out = "degree,count\n";
  for (auto [degree, count] : hist) out += std::to_string(degree) + "," + std::to_string(count) + "\n";
  return out;
}

// Recomputes degree, PageRank, clustering and depth; content counts are kept.
inline void refresh_structural_features(DomainGraph& g) {
  const auto pr = pagerank(g);
  const auto cc = clustering_coefficient(g);
  const auto depth = depth_from_root(g);
  for (auto& node : g.nodes) {
    node.features.out_degree = 0;
    node.features.in_degree = 0;
  }
  for (auto [s, d] : g.edges) {
    ++g.nodes[s].features.out_degree;
    ++g.nodes[d].features.in_degree;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.nodes[i].features.pagerank = pr[i];
    g.nodes[i].features.clustering = cc[i];
    g.nodes[i].features.depth = depth[i];
  }
}

// ---------------------------------------------------------------------------
// Construction

struct GraphBuild {
  DomainGraph graph;
  std::size_t dropped_links = 0;  // outlinks whose target is not in the snapshot
};

// One node per record (in manifest order, root = first record) and one edge
// per (page, outlink) whose target exists. Content counts come from the
// mirrored file of every non-directory node; missing files count as empty.
inline GraphBuild build_graph(const MirrorSnapshot& snap, bool read_content = true) {
  if (snap.pages.empty()) throw std::invalid_argument("build_graph: empty snapshot");
  GraphBuild out;
  auto& g = out.graph;
  std::unordered_map<std::string, NodeId> index;
  for (const auto& rec : snap.pages) {
    if (!index.emplace(rec.path, g.nodes.size()).second)
      throw std::invalid_argument("build_graph: duplicate path " + rec.path);
    GraphNode node;
    node.id = g.nodes.size();
    node.path = rec.path;
    node.kind = rec.kind;
    g.nodes.push_back(std::move(node));
  }
  std::set<Edge> seen;
  for (std::size_t i = 0; i < snap.pages.size(); ++i) {
    for (const auto& link : snap.pages[i].outlinks) {
      const auto it = index.find(link);
      if (it == index.end()) {
        ++out.dropped_links;
        continue;
      }
      if (it->second == i) continue;
      if (seen.insert({i, it->second}).second) g.edges.emplace_back(i, it->second);
    }
  }
  g.root_id = 0;
  if (read_content) {
    for (auto& node : g.nodes) {
      if (node.kind == PageKind::directory) continue;
      std::error_code ec;
      const auto file = snap.root / node.path;
      if (!fs::is_regular_file(file, ec)) continue;
      const auto counts = content_features(read_text_file(file));
      node.features.word_count = counts.words;
      node.features.image_count = counts.images;
    }
  }
  refresh_structural_features(g);
  return out;
}

// Adds `count` new directed edges between distinct, uniformly sampled
// directory nodes (every node when the graph has no directories), skipping
// pairs that already have an edge. Structural features are refreshed.
inline DomainGraph add_cross_links(DomainGraph g, long long count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("add_cross_links: negative count");
  std::vector<NodeId> pool;
  for (const auto& node : g.nodes)
    if (node.kind == PageKind::directory) pool.push_back(node.id);
  if (pool.empty())
    for (const auto& node : g.nodes) pool.push_back(node.id);
  if (count == 0) return g;
  if (pool.size() < 2) throw std::invalid_argument("add_cross_links: fewer than two candidate nodes");

  std::set<Edge> existing(g.edges.begin(), g.edges.end());
  const std::unordered_set<NodeId> members(pool.begin(), pool.end());
  std::size_t taken = 0;
  for (auto [s, d] : existing)
    if (s != d && members.contains(s) && members.contains(d)) ++taken;
  const std::size_t capacity = pool.size() * (pool.size() - 1) - taken;
  if (static_cast<unsigned long long>(count) > capacity)
    throw std::invalid_argument("add_cross_links: not enough free directory pairs");

  Rng rng(seed);
  long long added = 0;
  while (added < count) {
    const NodeId a = pool[uniform_index(rng, pool.size())];
    const NodeId b = pool[uniform_index(rng, pool.size())];
    if (a == b || !existing.insert({a, b}).second) continue;
    g.edges.emplace_back(a, b);
    ++added;
  }
  refresh_structural_features(g);
  return g;
}

}  // namespace gnnpf
