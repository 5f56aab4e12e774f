// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and never loosened at runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "gexf_check.hpp"
#include "gnnpf/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gnnpf;
using namespace gnnpf::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a sub-check; the first failing one is named in the detail.
  void expect(bool ok, const std::string& what) {
    if (!ok && pass) detail << "FAILED " << what << "; ";
    pass = pass && ok;
  }
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

DomainGraph graph_from_edges(std::size_t n, const std::vector<Edge>& edges) {
  DomainGraph g;
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back({i, "n" + std::to_string(i), PageKind::page, {}});
  g.edges = edges;
  return g;
}

// -- 1 ----------------------------------------------------------------------

// Elementwise |a - n| / max(|a|, |n|, floor). The floor keeps entries whose
// true gradient is zero (dead ReLU paths) from dividing rounding noise by
// nothing; it sits well below every gradient magnitude that carries signal.
constexpr double kGradFloor = 1e-6;

void gradient_correctness(Outcome& out) {
  Rng rng(101);
  const auto g = random_graph(10, 0.25, rng);
  const auto ops = GraphOps::from(g);
  const Matrix x = random_matrix(10, 4, rng);
  std::vector<Edge> batch;
  for (int i = 0; i < 15; ++i) batch.emplace_back(uniform_index(rng, 10), uniform_index(rng, 10));
  const double t = 0.1, h = 1e-5;
  for (auto type : {LayerType::sage, LayerType::gcn}) {
    auto params = init_params(type, {4, 8, 8, 4}, rng);
    for (Matrix* m : params.tensors())
      for (double& v : m->data()) v += uniform(rng, -0.05, 0.05);
    const auto analytic = backward(params, x, ops, batch, t);
    auto ps = params.tensors();
    const auto gs = analytic.grads.tensors();
    double worst = 0.0, worst_abs = 0.0;
    std::size_t entries = 0;
    for (std::size_t k = 0; k < ps.size(); ++k)
      for (std::size_t i = 0; i < ps[k]->data().size(); ++i) {
        double& w = ps[k]->data()[i];
        const double saved = w;
        w = saved + h;
        const double up = linkpred_loss(forward(params, x, ops), batch, t);
        w = saved - h;
        const double down = linkpred_loss(forward(params, x, ops), batch, t);
        w = saved;
        const double numeric = (up - down) / (2 * h), a = gs[k]->data()[i];
        const double scale = std::max({std::abs(a), std::abs(numeric), kGradFloor});
        worst = std::max(worst, std::abs(a - numeric) / scale);
        worst_abs = std::max(worst_abs, std::abs(a - numeric));
        ++entries;
      }
    out.detail << to_string(type) << " max rel err " << fmt(worst, 3) << " (max abs " << fmt(worst_abs, 3) << ", "
               << entries << " entries); ";
    out.expect(worst < 1e-5, std::string(to_string(type)) + " gradient");
  }
}

// -- 2 ----------------------------------------------------------------------

void layer_oracles(Outcome& out) {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_graph(1 + uniform_index(rng, 12), uniform(rng, 0.05, 0.5), rng, trial % 3 == 0);
    const std::size_t n = g.size(), din = 1 + uniform_index(rng, 6), dout = 1 + uniform_index(rng, 6);
    const Matrix h = random_matrix(n, din, rng), w = random_matrix(din, dout, rng), wn = random_matrix(din, dout, rng);
    const Matrix b = random_matrix(1, dout, rng);
    const auto na = normalize_adjacency(g);
    const auto nb = neighborhoods(g);
    worst = std::max(worst, max_abs_diff(na.dense(), dense_norm_adjacency(g)));
    for (bool r : {false, true}) {
      const auto act = r ? Activation::relu : Activation::identity;
      worst = std::max(worst, max_abs_diff(gcn_layer(h, na, w, act), dense_gcn(g, h, w, r)));
      worst = std::max(worst, max_abs_diff(sage_layer(h, nb, w, wn, b, act), dense_sage(g, h, w, wn, b, r)));
    }
  }
  out.detail << "max L-inf " << fmt(worst, 3) << " over 50 graphs; ";
  out.expect(worst < 1e-10, "L-inf bound");
}

// -- 3 ----------------------------------------------------------------------

void pagerank_and_clustering(Outcome& out) {
  Rng rng(303);
  double worst_pr = 0.0, worst_sum = 0.0;
  std::size_t clustering_mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_graph(1 + uniform_index(rng, 15), uniform(rng, 0.0, 0.4), rng);
    const auto pr = pagerank(g);
    const auto ref = dense_pagerank(g);
    double sum = 0.0;
    for (std::size_t i = 0; i < pr.size(); ++i) {
      worst_pr = std::max(worst_pr, std::abs(pr[i] - ref[i]));
      sum += pr[i];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    if (clustering_coefficient(g) != brute_clustering(g)) ++clustering_mismatches;
  }
  out.detail << "PageRank L-inf " << fmt(worst_pr, 3) << ", |sum-1| " << fmt(worst_sum, 3)
             << ", clustering mismatches " << clustering_mismatches << "; ";
  out.expect(worst_pr < 1e-8, "PageRank L-inf");
  out.expect(worst_sum <= 1e-9, "PageRank sum");
  out.expect(clustering_mismatches == 0, "clustering exact");
}

// -- 4 ----------------------------------------------------------------------

void walk_statistics(Outcome& out) {
  // Circulant graph: i -> i+1, i+3, i+4 (mod 10), plus 0 -> 5.
  std::vector<Edge> edges;
  for (NodeId i = 0; i < 10; ++i)
    for (NodeId s : {1u, 3u, 4u}) edges.emplace_back(i, (i + s) % 10);
  edges.emplace_back(0, 5);
  const auto dg = graph_from_edges(10, edges);
  const WalkGraph g(dg);

  bool uniform_ok = true;
  for (NodeId cur = 0; cur < 10; ++cur) {
    std::vector<std::optional<NodeId>> prevs = {std::nullopt};
    for (NodeId p = 0; p < 10; ++p)
      if (g.has_edge(p, cur)) prevs.push_back(p);
    for (auto prev : prevs)
      for (double w : transition_weights(g, prev, cur, 1.0, 1.0)) uniform_ok = uniform_ok && w == 1.0;
  }
  out.expect(uniform_ok, "p=q=1 weights uniform");

  WalkConfig cfg;
  cfg.p = cfg.q = 1.0;
  cfg.num_walkers = 1000;
  cfg.walk_length = 101;  // 100 steps each
  cfg.seed = 404;
  cfg.start_policy = StartPolicy::uniform;
  std::map<Edge, std::size_t> counts;
  std::vector<std::size_t> departures(10, 0);
  std::size_t steps = 0;
  for (const auto& t : generate_sessions(dg, cfg))
    for (std::size_t i = 1; i < t.nodes.size(); ++i) {
      ++counts[{t.nodes[i - 1], t.nodes[i]}];
      ++departures[t.nodes[i - 1]];
      ++steps;
    }
  double worst_sigma = 0.0;
  for (NodeId u = 0; u < 10; ++u) {
    const double n = static_cast<double>(departures[u]);
    const double prob = 1.0 / static_cast<double>(g.out(u).size());
    for (NodeId v : g.out(u)) {
      const double sigma = std::sqrt(n * prob * (1 - prob));
      worst_sigma = std::max(worst_sigma, std::abs(static_cast<double>(counts[{u, v}]) - n * prob) / sigma);
    }
  }
  out.detail << steps << " steps, worst deviation " << fmt(worst_sigma, 3) << " sigma; ";
  out.expect(steps == 100000, "step count");
  out.expect(worst_sigma <= 3.0, "3-sigma frequencies");

  // Rule tables. Path a -> b -> c with b -> a: return 1/p, outward 1/q.
  const WalkGraph path(graph_from_edges(3, {{0, 1}, {1, 0}, {1, 2}}));
  out.expect(transition_weights(path, NodeId{0}, 1, 2.0, 0.5) == std::vector<double>{0.5, 2.0}, "path table");
  // Triangle a -> b, a -> c, b -> a, b -> c: from (a, b), back to a is 1/p, c is a shared neighbor.
  const WalkGraph tri(graph_from_edges(3, {{0, 1}, {0, 2}, {1, 0}, {1, 2}}));
  out.expect(transition_weights(tri, NodeId{0}, 1, 2.0, 0.5) == std::vector<double>{0.5, 1.0}, "triangle table");
  out.expect(transition_weights(tri, NodeId{1}, 0, 4.0, 0.25) == std::vector<double>{0.25, 1.0}, "triangle table 2");
}

// -- 5 and 6 share the headline run ----------------------------------------

struct Headline {
  TrainHistory history;
  double test_topk = 0.0;
  double loss_floor = 0.0;  // empirical conditional entropy of train transitions
  nlohmann::json report;
  Matrix embeddings;
  std::vector<Trace> walk_traces;
  fs::path gexf;
  double seconds = 0.0;
};

TrainHistory read_history(const fs::path& p) {
  TrainHistory h;
  std::istringstream in(read_text_file(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    h.train_loss.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    h.val_topk.push_back(std::stod(line.substr(b + 1)));
  }
  return h;
}

double conditional_entropy(const std::vector<Edge>& pairs) {
  std::map<NodeId, std::map<NodeId, double>> c;
  for (auto [u, v] : pairs) c[u][v] += 1.0;
  double h = 0.0;
  for (const auto& [u, row] : c) {
    double total = 0.0;
    for (const auto& [v, n] : row) total += n;
    for (const auto& [v, n] : row) h -= n * std::log(n / total);
  }
  return h / static_cast<double>(pairs.size());
}

Headline run_headline(const fs::path& dir) {
  PipelineConfig cfg;
  cfg.seed = 42;
  cfg.out_dir = dir;
  cfg.synth = {};  // branching 4, depth 4, 2 files per directory, 5 cross-links
  cfg.walks.num_walkers = 1000;
  cfg.walks.walk_length = 20;
  cfg.walks.p = 1.0;
  cfg.walks.q = 0.5;
  cfg.window = 1;
  cfg.train = {};  // SAGE 7-128-128-64, Adam lr 0.005 wd 1e-4, 100 epochs
  cfg.simulate.top_k = 5;
  cfg.simulate.cache.policy = CachePolicy::unbounded;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream log;
  const auto paths = run_all(cfg, log);
  Headline h;
  h.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  h.history = read_history(paths.model_dir / "history.csv");
  h.embeddings = embeddings_from_csv(read_text_file(paths.model_dir / "embeddings.csv"));
  const auto ds = dataset_from_jsonl(read_text_file(paths.walks_dir / "dataset.jsonl"));
  h.test_topk = evaluate_topk(h.embeddings, transitions(ds.test), 5);
  h.loss_floor = conditional_entropy(transitions(ds.train));
  h.report = parse_json_file(paths.report);
  h.walk_traces = traces_from_jsonl(read_text_file(paths.walks_dir / "traces.jsonl"));
  h.gexf = paths.export_dir / "graph.gexf";
  return h;
}

void headline(const Headline& h, Outcome& out) {
  const auto& loss = h.history.train_loss;
  const auto& val = h.history.val_topk;
  if (loss.size() != 100) {
    out.expect(false, "100 epochs recorded");
    return;
  }
  const double min_loss = *std::min_element(loss.begin(), loss.end());
  const double ratio = loss[9] / loss[0];
  out.detail << "loss e1 " << fmt(loss[0]) << ", e10 " << fmt(loss[9]) << " (ratio " << fmt(ratio, 3) << "), e100 "
             << fmt(loss[99]) << ", min " << fmt(min_loss) << ", floor " << fmt(h.loss_floor) << "; val top5 "
             << fmt(val.back()) << ", test top5 " << fmt(h.test_topk) << "; run " << fmt(h.seconds, 3) << " s; ";
  out.expect(ratio < 0.5, "(a) epoch-10 loss < 50% of epoch-1");
  out.expect(loss[99] <= 1.05 * min_loss, "(a) final loss within 5% of minimum");
  out.expect(val.back() >= 0.80, "(b) val top5 >= 0.80");
  out.expect(std::abs(h.test_topk - val.back()) <= 0.05, "(c) |test - val| <= 0.05");
  out.expect(h.seconds < 300.0, "runtime < 5 min");
}

void simulator(const Headline& h, Outcome& out) {
  const auto& r = h.report;
  const double gnn = r.at("hit_rate").get<double>();
  const double gnn_transition = r.at("transition_hit_rate").get<double>();
  const double none = r.at("baselines").at("no_prefetch").at("hit_rate").get<double>();
  const double markov = r.at("baselines").at("markov").at("hit_rate").get<double>();
  out.detail << "hit_rate gnn " << fmt(gnn) << " vs no-prefetch " << fmt(none) << " (markov " << fmt(markov)
             << "); transition hit rate " << fmt(gnn_transition) << " vs test top5 " << fmt(h.test_topk) << "; ";
  out.expect(gnn > none, "(a) beats no-prefetch");
  out.expect(gnn_transition >= h.test_topk - 0.02, "(b) prefetch hits cover test top5");
  for (const auto* s : {&r, &r.at("baselines").at("no_prefetch"), &r.at("baselines").at("markov")})
    out.expect(s->at("hits").get<std::uint64_t>() + s->at("misses").get<std::uint64_t>() ==
                   s->at("accesses").get<std::uint64_t>(),
               "hits + misses == accesses");
  // Prefetching every other node leaves one miss per trace.
  const EmbeddingPredictor all(h.embeddings, h.embeddings.rows() - 1);
  bool exact = true;
  for (std::size_t i = 0; i < 20 && i < h.walk_traces.size(); ++i) {
    const auto s = simulate(all, {h.walk_traces[i]}, CacheConfig{});
    const double len = static_cast<double>(h.walk_traces[i].nodes.size());
    exact = exact && s.hit_rate() == (len - 1) / len;
  }
  out.expect(exact, "top_k = n-1 gives (L-1)/L");
}

// -- 7 ----------------------------------------------------------------------

void predict_next_contract(Outcome& out) {
  Rng rng(707);
  std::size_t calls = 0, bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 30), d = 1 + uniform_index(rng, 8);
    Matrix z = random_matrix(n, d, rng);
    if (trial % 4 == 0)
      for (double& v : z.data()) v = std::round(v);  // ties and zero rows
    const std::size_t k = 1 + uniform_index(rng, n - 1);
    const EmbeddingPredictor p(z, k);
    for (NodeId cur = 0; cur < n; ++cur) {
      const auto got = p.predict_next(cur);
      std::vector<NodeId> sorted = got;
      std::sort(sorted.begin(), sorted.end());
      const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
      const bool ok = got.size() == k && distinct && std::find(got.begin(), got.end(), cur) == got.end() &&
                      got == predict_by_sorting(z, cur, k);
      bad += !ok;
      ++calls;
    }
  }
  out.detail << calls << " predictions over 1000 matrices, " << bad << " mismatches; ";
  out.expect(bad == 0, "oracle agreement");
}

// -- 8 ----------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& output) {
  const std::string cmd = std::string(GNNPF_CLI_PATH) + " " + args + " > " + output.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism(const fs::path& dir, Outcome& out) {
  write_text_file(dir / "small.ini",
                  "[run]\nseed = 8\n[source]\nmode = synth\nbranching = 3\ndepth = 2\nfiles_per_dir = 1\n"
                  "cross_links = 2\n[walks]\nwalkers = 300\nlength = 12\n[train]\nepochs = 10\nhidden_dim = 32\n"
                  "embed_dim = 16\n");
  for (const char* run : {"a", "b"}) {
    const int code =
        run_cli("--config " + (dir / "small.ini").string() + " run-all --out " + (dir / run).string(), dir / "log.txt");
    out.expect(code == 0, std::string("run-all ") + run + " exit code");
  }
  for (const char* rel : {"report.json", "model/history.csv", "model/embeddings.csv"}) {
    const bool same = fs::exists(dir / "a" / rel) && read_text_file(dir / "a" / rel) == read_text_file(dir / "b" / rel);
    out.detail << rel << (same ? " identical" : " DIFFERS") << "; ";
    out.expect(same, std::string(rel) + " byte-identical");
  }
}

// -- 9 ----------------------------------------------------------------------

void serialization(const fs::path& headline_gexf, Outcome& out) {
  Rng rng(909);
  std::size_t round_trips = 0, gexf_errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_graph(1 + uniform_index(rng, 40), uniform(rng, 0.0, 0.3), rng);
    g.root_id = uniform_index(rng, g.size());
    round_trips += from_json(to_json(g)) == g;
    gexf_errors += validate_gexf(to_gexf(g)).size();
  }
  const auto headline_errors = validate_gexf(read_text_file(headline_gexf));
  out.detail << round_trips << "/100 JSON round trips exact, " << gexf_errors << " GEXF problems on random graphs, "
             << headline_errors.size() << " on the headline export; ";
  out.expect(round_trips == 100, "JSON identity");
  out.expect(gexf_errors == 0 && headline_errors.empty(), "GEXF validation");
}

// -- 10 ---------------------------------------------------------------------

void pca(Outcome& out) {
  Rng rng(1010);
  double worst_dot = 0.0, worst_cos = 1.0;
  bool ordered = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix z = random_matrix(30, 64, rng);
    const auto r = pca_2d(z);
    const auto ref = jacobi(covariance(z));
    worst_dot = std::max(worst_dot, std::abs(dot(r.components[0], r.components[1])));
    ordered = ordered && r.explained_variance[0] >= r.explained_variance[1];
    for (int k = 0; k < 2; ++k) worst_cos = std::min(worst_cos, std::abs(dot(r.components[k], ref.vectors[k])));
  }
  out.detail << "20 random 30x64 inputs, max |pc1.pc2| " << fmt(worst_dot, 3) << ", min |cos| vs Jacobi 1-"
             << fmt(1 - worst_cos, 3) << "; ";
  out.expect(worst_dot < 1e-9, "orthogonality");
  out.expect(ordered, "variance order");
  out.expect(worst_cos >= 1 - 1e-8, "oracle agreement");
}

}  // namespace

int main() {
  ScratchDir scratch("acceptance");
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      body(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << " [" << fmt(secs, 3) << " s] "
              << o.detail.str() << std::endl;
  };

  report(1, "gradient correctness", [](Outcome& o) {
    const auto start = std::chrono::steady_clock::now();
    gradient_correctness(o);
    o.expect(std::chrono::steady_clock::now() - start < std::chrono::seconds(5), "runtime < 5 s");
  });
  report(2, "layer and normalization oracles", [](Outcome& o) {
    const auto start = std::chrono::steady_clock::now();
    layer_oracles(o);
    o.expect(std::chrono::steady_clock::now() - start < std::chrono::seconds(5), "runtime < 5 s");
  });
  report(3, "PageRank and clustering", pagerank_and_clustering);
  report(4, "walk statistics", walk_statistics);

  Headline h;
  bool have_headline = false;
  report(5, "headline training run", [&](Outcome& o) {
    h = run_headline(scratch / "headline");
    have_headline = true;
    headline(h, o);
  });
  report(6, "simulator consistency", [&](Outcome& o) {
    if (!have_headline) throw std::runtime_error("headline run unavailable");
    simulator(h, o);
  });
  report(7, "predict-next contract", predict_next_contract);
  report(8, "determinism", [&](Outcome& o) {
    fs::create_directories(scratch / "det");
    determinism(scratch / "det", o);
  });
  report(9, "serialization", [&](Outcome& o) {
    if (!have_headline) throw std::runtime_error("headline run unavailable");
    serialization(h.gexf, o);
  });
  report(10, "PCA", pca);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
