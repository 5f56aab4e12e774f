#include <gtest/gtest.h>

#include <string>

#include "gexf_check.hpp"
#include "gnnpf/graph_io.hpp"
#include "support.hpp"

using namespace gnnpf;
using gnnpf::testing::random_graph;
using gnnpf::testing::validate_gexf;

namespace {

DomainGraph two_nodes() {
  DomainGraph g;
  g.nodes.push_back({0, "site/index.html", PageKind::directory, {}});
  g.nodes.push_back({1, "site/a & <b>.html", PageKind::page, {}});
  g.edges.emplace_back(0, 1);
  refresh_structural_features(g);
  return g;
}

std::string describe(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += e + "\n";
  return out;
}

}  // namespace

TEST(GraphJson, RoundTripIsExactOnRandomGraphs) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_graph(1 + uniform_index(rng, 40), uniform(rng, 0.0, 0.3), rng);
    g.root_id = uniform_index(rng, g.size());
    const auto text = to_json(g);
    const auto back = from_json(text);
    ASSERT_EQ(back, g) << "trial " << trial;
    EXPECT_EQ(to_json(back), text);
  }
}

TEST(GraphJson, CarriesSchemaVersion) {
  const auto doc = nlohmann::json::parse(to_json(two_nodes()));
  EXPECT_EQ(doc.at("schema_version"), kGraphSchemaVersion);
}

TEST(GraphJson, MalformedTextReportsBytePosition) {
  try {
    from_json("{\"schema_version\": 1, \"nodes\": [", "broken.json");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("broken.json"), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte"), std::string::npos) << msg;
  }
}

TEST(GraphJson, RejectsStructuralProblems) {
  auto doc = nlohmann::json::parse(to_json(two_nodes()));
  auto with = [&](auto mutate) {
    auto copy = doc;
    mutate(copy);
    return copy.dump();
  };
  EXPECT_THROW(from_json(with([](auto& d) { d.erase("schema_version"); })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["schema_version"] = 2; })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["edges"].push_back({0, 9}); })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["edges"].push_back({0, 1}); })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["edges"].push_back({0}); })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["nodes"][1]["kind"] = "folder"; })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["nodes"][1]["id"] = 5; })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["nodes"][1]["path"] = "site/index.html"; })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["nodes"][0]["features"].erase("depth"); })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["root_id"] = 2; })), FormatError);
  EXPECT_THROW(from_json(with([](auto& d) { d["nodes"] = nlohmann::json::array(); })), FormatError);
}

TEST(Gexf, TwoNodeGraphIsValidWithExpectedCounts) {
  const auto text = to_gexf(two_nodes());
  const auto errors = validate_gexf(text);
  EXPECT_TRUE(errors.empty()) << describe(errors);
  EXPECT_EQ(gnnpf::testing::gexf_counts(text), (std::pair<std::size_t, std::size_t>{2, 1}));
}

TEST(Gexf, RandomGraphsValidate) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_graph(1 + uniform_index(rng, 30), 0.2, rng);
    const auto text = to_gexf(g);
    const auto errors = validate_gexf(text);
    ASSERT_TRUE(errors.empty()) << describe(errors);
    const auto [n, e] = gnnpf::testing::gexf_counts(text);
    EXPECT_EQ(n, g.size());
    EXPECT_EQ(e, g.edges.size());
  }
}

// The validator itself must reject the things it claims to check.
TEST(Gexf, ValidatorCatchesDefects) {
  const auto good = to_gexf(two_nodes());
  auto broken = [&](const std::string& from, const std::string& to) {
    auto copy = good;
    const auto at = copy.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    copy.replace(at, from.size(), to);
    return copy;
  };
  EXPECT_FALSE(validate_gexf(good.substr(0, good.size() / 2)).empty());
  EXPECT_FALSE(validate_gexf(broken("version=\"1.2\"", "version=\"1.1\"")).empty());
  EXPECT_FALSE(validate_gexf(broken("target=\"1\"", "target=\"7\"")).empty());
  EXPECT_FALSE(validate_gexf(broken("<node id=\"1\"", "<node id=\"0\"")).empty());
  EXPECT_FALSE(validate_gexf(broken("for=\"5\"", "for=\"99\"")).empty());
  EXPECT_FALSE(validate_gexf(broken("defaultedgetype=\"directed\"", "defaultedgetype=\"sideways\"")).empty());
}

TEST(Gexf, EscapesMarkupInLabels) {
  const auto text = to_gexf(two_nodes());
  EXPECT_NE(text.find("a &amp; &lt;b&gt;.html"), std::string::npos);
}
