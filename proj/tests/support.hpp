#pragma once

// Shared fixtures: random graphs, scratch directories and a couple of
// dense reference helpers used as oracles across the suite.

#include <filesystem>
#include <string>
#include <vector>

#include "gnnpf/graph.hpp"
#include "gnnpf/matrix.hpp"
#include "gnnpf/rng.hpp"

namespace gnnpf::testing {

// Directed graph on n nodes, each ordered pair linked with probability p.
inline DomainGraph random_graph(std::size_t n, double p, Rng& rng, bool self_loops = false) {
  DomainGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    GraphNode node;
    node.id = i;
    node.path = "site/n" + std::to_string(i) + ".html";
    node.kind = i % 3 == 0 ? PageKind::directory : (i % 3 == 1 ? PageKind::file : PageKind::page);
    node.features.word_count = uniform_index(rng, 500);
    node.features.image_count = uniform_index(rng, 5);
    g.nodes.push_back(node);
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if ((a != b || self_loops) && uniform01(rng) < p) g.edges.emplace_back(a, b);
  refresh_structural_features(g);
  return g;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = uniform(rng, lo, hi);
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    Rng rng(fnv1a(tag) ^ static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
    path_ = std::filesystem::temp_directory_path() / ("gnnpf_" + tag + "_" + std::to_string(rng() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace gnnpf::testing
