#pragma once

#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "gnnpf/errors.hpp"
#include "gnnpf/graph.hpp"

namespace gnnpf {

inline constexpr int kGraphSchemaVersion = 1;

inline nlohmann::json graph_to_json_value(const DomainGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    const auto& f = n.features;
    nodes.push_back({{"id", n.id},
                     {"path", n.path},
                     {"kind", to_string(n.kind)},
                     {"features",
                      {{"out_degree", f.out_degree},
                       {"in_degree", f.in_degree},
                       {"pagerank", f.pagerank},
                       {"clustering", f.clustering},
                       {"depth", f.depth},
                       {"word_count", f.word_count},
                       {"image_count", f.image_count}}}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [s, d] : g.edges) edges.push_back({s, d});
  return {{"schema_version", kGraphSchemaVersion},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)},
          {"root_id", g.root_id}};
}

inline std::string to_json(const DomainGraph& g) { return graph_to_json_value(g).dump(1) + "\n"; }

inline DomainGraph from_json(std::string_view text, const std::string& where = "graph.json") {
  const auto doc = parse_json_text(text, where);
  expect_schema(doc, kGraphSchemaVersion, where);
  DomainGraph g;
  try {
    const auto& nodes = doc.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& jn = nodes.at(i);
      GraphNode n;
      n.id = jn.at("id").get<NodeId>();
      n.path = jn.at("path").get<std::string>();
      const auto kind = page_kind_from_string(jn.at("kind").get<std::string>());
      if (!kind) throw FormatError(where + ": nodes[" + std::to_string(i) + "].kind is invalid");
      n.kind = *kind;
      const auto& jf = jn.at("features");
      n.features.out_degree = jf.at("out_degree").get<std::uint64_t>();
      n.features.in_degree = jf.at("in_degree").get<std::uint64_t>();
      n.features.pagerank = jf.at("pagerank").get<double>();
      n.features.clustering = jf.at("clustering").get<double>();
      n.features.depth = jf.at("depth").get<std::uint64_t>();
      n.features.word_count = jf.at("word_count").get<std::uint64_t>();
      n.features.image_count = jf.at("image_count").get<std::uint64_t>();
      g.nodes.push_back(std::move(n));
    }
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw FormatError(where + ": edge is not a [src,dst] pair");
      g.edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
    }
    g.root_id = doc.at("root_id").get<NodeId>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  return g;
}

inline DomainGraph read_graph_file(const fs::path& path) {
  return from_json(read_text_file(path), path.string());
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace detail

// Static GEXF 1.2 document; node attributes are the kind plus the seven
// features, edges are directed.
inline std::string to_gexf(const DomainGraph& g) {
  static constexpr std::array<const char*, kFeatureCount> types = {
      "integer", "integer", "double", "double", "integer", "integer", "integer"};
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<gexf xmlns=\"http://gexf.net/1.2\" version=\"1.2\">\n"
      << "  <meta>\n    <creator>gnnpf</creator>\n  </meta>\n"
      << "  <graph mode=\"static\" defaultedgetype=\"directed\">\n"
      << "    <attributes class=\"node\" mode=\"static\">\n"
      << "      <attribute id=\"0\" title=\"kind\" type=\"string\"/>\n";
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    out << "      <attribute id=\"" << i + 1 << "\" title=\"" << kFeatureNames[i] << "\" type=\""
        << types[i] << "\"/>\n";
  out << "    </attributes>\n    <nodes>\n";
  for (const auto& n : g.nodes) {
    const auto& f = n.features;
    out << "      <node id=\"" << n.id << "\" label=\"" << detail::xml_escape(n.path) << "\">\n"
        << "        <attvalues>\n"
        << "          <attvalue for=\"0\" value=\"" << to_string(n.kind) << "\"/>\n"
        << "          <attvalue for=\"1\" value=\"" << f.out_degree << "\"/>\n"
        << "          <attvalue for=\"2\" value=\"" << f.in_degree << "\"/>\n"
        << "          <attvalue for=\"3\" value=\"" << detail::format_double(f.pagerank) << "\"/>\n"
        << "          <attvalue for=\"4\" value=\"" << detail::format_double(f.clustering) << "\"/>\n"
        << "          <attvalue for=\"5\" value=\"" << f.depth << "\"/>\n"
        << "          <attvalue for=\"6\" value=\"" << f.word_count << "\"/>\n"
        << "          <attvalue for=\"7\" value=\"" << f.image_count << "\"/>\n"
        << "        </attvalues>\n      </node>\n";
  }
  out << "    </nodes>\n    <edges>\n";
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    out << "      <edge id=\"" << i << "\" source=\"" << g.edges[i].first << "\" target=\""
        << g.edges[i].second << "\"/>\n";
  out << "    </edges>\n  </graph>\n</gexf>\n";
  return out.str();
}

}  // namespace gnnpf
