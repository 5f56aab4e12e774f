#pragma once

// Synthetic project tree: a complete directory hierarchy with a fixed number
// of HTML files per directory and a few random directory-to-directory
// cross-links, written to disk and described by a manifest.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "gnnpf/graph.hpp"
#include "gnnpf/route_mapper.hpp"

namespace gnnpf {

struct SyntheticTreeSpec {
  std::size_t branching = 4;
  std::size_t depth = 4;          // directory levels below the root
  std::size_t files_per_dir = 2;
  std::size_t cross_links = 5;
  std::uint64_t seed = 0;
  std::size_t min_words = 50, max_words = 1500;
  std::size_t max_images = 12;

  void validate() const {
    if (branching < 1) throw UsageError("synth: branching must be at least 1");
    if (depth < 1) throw UsageError("synth: depth must be at least 1");
    if (min_words > max_words) throw UsageError("synth: min_words exceeds max_words");
  }
};

struct SyntheticCounts {
  std::size_t directories, files, edges;
};

// dirs = sum_{i=0..depth} b^i, files = f * dirs, edges = (dirs - 1) + files + cross_links
inline SyntheticCounts synthetic_counts(const SyntheticTreeSpec& s) {
  std::size_t dirs = 0, level = 1;
  for (std::size_t i = 0; i <= s.depth; ++i) {
    dirs += level;
    level *= s.branching;
  }
  const std::size_t files = s.files_per_dir * dirs;
  return {dirs, files, dirs - 1 + files + s.cross_links};
}

// Writes the tree under <out>/site and the manifest to <out>/manifest.json.
inline MirrorSnapshot generate_synthetic_tree(const SyntheticTreeSpec& spec, const fs::path& out) {
  spec.validate();
  const fs::path site = out / "site";
  std::error_code ec;
  fs::remove_all(site, ec);
  fs::create_directories(site);

  Rng rng(spec.seed);
  auto make_file = [&](const fs::path& path) {
    const auto words = spec.min_words + uniform_index(rng, spec.max_words - spec.min_words + 1);
    const auto images = uniform_index(rng, spec.max_images + 1);
    std::string doc = "<html><body>\n<p>";
    for (std::size_t w = 0; w < words; ++w) {
      if (w) doc += (w % 16 == 0) ? "\n" : " ";
      doc += "w" + std::to_string(uniform_index(rng, 1000));
    }
    doc += "</p>\n";
    for (std::size_t i = 0; i < images; ++i) doc += "<img src=\"img" + std::to_string(i) + ".png\">\n";
    doc += "</body></html>\n";
    write_text_file(path, doc);
  };
  auto build = [&](auto&& self, const fs::path& dir, std::size_t level) -> void {
    fs::create_directories(dir);
    for (std::size_t f = 0; f < spec.files_per_dir; ++f) make_file(dir / ("file_" + std::to_string(f) + ".html"));
    if (level == spec.depth) return;
    for (std::size_t b = 0; b < spec.branching; ++b) self(self, dir / ("dir_" + std::to_string(b)), level + 1);
  };
  build(build, site, 0);

  MirrorSnapshot snap = scan_filesystem(site);
  const auto built = build_graph(snap, false);
  const auto linked = add_cross_links(built.graph, static_cast<long long>(spec.cross_links),
                                      splitmix64(spec.seed ^ 0x63726f73736c696eULL));
  for (std::size_t e = built.graph.edges.size(); e < linked.edges.size(); ++e) {
    const auto [s, d] = linked.edges[e];
    snap.pages[s].outlinks.push_back(snap.pages[d].path);
  }
  snap.root = out;
  write_manifest(snap, out / "manifest.json", ".");
  return snap;
}

}  // namespace gnnpf
