#pragma once

// End-to-end driver: a sectioned key-value config, one function per
// pipeline stage, and run_all chaining them. Every stage reads files and
// writes files; randomness comes from the global seed via stage_seed().

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gnnpf/errors.hpp"
#include "gnnpf/graph.hpp"
#include "gnnpf/graph_io.hpp"
#include "gnnpf/pca.hpp"
#include "gnnpf/prefetch.hpp"
#include "gnnpf/route_mapper.hpp"
#include "gnnpf/synthetic.hpp"
#include "gnnpf/train.hpp"
#include "gnnpf/walk.hpp"

namespace gnnpf {

// ---------------------------------------------------------------------------
// Configuration

enum class SourceMode { synth, scan, crawl };

inline std::string_view to_string(SourceMode m) {
  switch (m) {
    case SourceMode::scan: return "scan";
    case SourceMode::crawl: return "crawl";
    default: return "synth";
  }
}

struct SimulateConfig {
  std::size_t top_k = 5;
  CacheConfig cache;
  bool no_prefetch_baseline = true;
  bool markov_baseline = true;
};

struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  fs::path out_dir = "run";

  SourceMode source = SourceMode::synth;
  fs::path scan_root;
  CrawlConfig crawl;
  SyntheticTreeSpec synth;

  std::size_t graph_cross_links = 0;  // extra random links added by the graph stage

  WalkConfig walks;
  std::size_t window = 1;

  TrainConfig train;
  SimulateConfig simulate;

  std::uint64_t require_seed() const {
    if (!seed) throw UsageError("a seed is required (config [run] seed or --seed)");
    return *seed;
  }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw UsageError(std::string(key) + ": not a valid number: '" + std::string(text) + "'");
  return value;
}

inline std::size_t parse_count(std::string_view key, std::string_view text) {
  if (text.starts_with('-')) throw UsageError(std::string(key) + ": must be non-negative");
  return parse_number<std::size_t>(key, text);
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

using Setter = std::function<void(PipelineConfig&, std::string_view)>;

// "section.key" -> setter. This table is the complete set of accepted keys.
inline const std::map<std::string, Setter, std::less<>>& config_keys() {
  static const std::map<std::string, Setter, std::less<>> keys = [] {
    std::map<std::string, Setter, std::less<>> k;
    k["run.seed"] = [](PipelineConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("run.seed", v); };
    k["run.out_dir"] = [](PipelineConfig& c, std::string_view v) { c.out_dir = std::string(v); };

    k["source.mode"] = [](PipelineConfig& c, std::string_view v) {
      if (v == "synth") c.source = SourceMode::synth;
      else if (v == "scan") c.source = SourceMode::scan;
      else if (v == "crawl") c.source = SourceMode::crawl;
      else throw UsageError("source.mode: expected synth, scan or crawl");
    };
    k["source.root"] = [](PipelineConfig& c, std::string_view v) { c.scan_root = std::string(v); };
    k["source.base_url"] = [](PipelineConfig& c, std::string_view v) { c.crawl.base_url = std::string(v); };
    k["source.max_pages"] = [](PipelineConfig& c, std::string_view v) { c.crawl.max_pages = parse_count("source.max_pages", v); };
    k["source.max_depth"] = [](PipelineConfig& c, std::string_view v) { c.crawl.max_depth = parse_count("source.max_depth", v); };
    k["source.delay_ms"] = [](PipelineConfig& c, std::string_view v) {
      c.crawl.request_delay = std::chrono::milliseconds(parse_number<long long>("source.delay_ms", v));
    };
    k["source.branching"] = [](PipelineConfig& c, std::string_view v) { c.synth.branching = parse_count("source.branching", v); };
    k["source.depth"] = [](PipelineConfig& c, std::string_view v) { c.synth.depth = parse_count("source.depth", v); };
    k["source.files_per_dir"] = [](PipelineConfig& c, std::string_view v) { c.synth.files_per_dir = parse_count("source.files_per_dir", v); };
    k["source.cross_links"] = [](PipelineConfig& c, std::string_view v) { c.synth.cross_links = parse_count("source.cross_links", v); };

    k["graph.cross_links"] = [](PipelineConfig& c, std::string_view v) { c.graph_cross_links = parse_count("graph.cross_links", v); };

    k["walks.walkers"] = [](PipelineConfig& c, std::string_view v) { c.walks.num_walkers = parse_count("walks.walkers", v); };
    k["walks.length"] = [](PipelineConfig& c, std::string_view v) { c.walks.walk_length = parse_count("walks.length", v); };
    k["walks.p"] = [](PipelineConfig& c, std::string_view v) { c.walks.p = parse_number<double>("walks.p", v); };
    k["walks.q"] = [](PipelineConfig& c, std::string_view v) { c.walks.q = parse_number<double>("walks.q", v); };
    k["walks.window"] = [](PipelineConfig& c, std::string_view v) { c.window = parse_count("walks.window", v); };
    k["walks.start_policy"] = [](PipelineConfig& c, std::string_view v) {
      const auto p = start_policy_from_string(v);
      if (!p) throw UsageError("walks.start_policy: expected uniform, root_only or degree_weighted");
      c.walks.start_policy = *p;
    };

    k["train.epochs"] = [](PipelineConfig& c, std::string_view v) { c.train.epochs = parse_count("train.epochs", v); };
    k["train.learning_rate"] = [](PipelineConfig& c, std::string_view v) { c.train.learning_rate = parse_number<double>("train.learning_rate", v); };
    k["train.weight_decay"] = [](PipelineConfig& c, std::string_view v) { c.train.weight_decay = parse_number<double>("train.weight_decay", v); };
    k["train.topk"] = [](PipelineConfig& c, std::string_view v) { c.train.topk = parse_count("train.topk", v); };
    k["train.temperature"] = [](PipelineConfig& c, std::string_view v) { c.train.temperature = parse_number<double>("train.temperature", v); };
    k["train.layer"] = [](PipelineConfig& c, std::string_view v) {
      const auto t = layer_type_from_string(v);
      if (!t) throw UsageError("train.layer: expected sage or gcn");
      c.train.layer = *t;
    };
    k["train.hidden_dim"] = [](PipelineConfig& c, std::string_view v) { c.train.hidden_dim = parse_count("train.hidden_dim", v); };
    k["train.embed_dim"] = [](PipelineConfig& c, std::string_view v) { c.train.embed_dim = parse_count("train.embed_dim", v); };
    k["train.batch_size"] = [](PipelineConfig& c, std::string_view v) { c.train.batch_size = parse_count("train.batch_size", v); };

    k["simulate.top_k"] = [](PipelineConfig& c, std::string_view v) { c.simulate.top_k = parse_count("simulate.top_k", v); };
    k["simulate.cache_policy"] = [](PipelineConfig& c, std::string_view v) {
      const auto p = cache_policy_from_string(v);
      if (!p) throw UsageError("simulate.cache_policy: expected unbounded or lru");
      c.simulate.cache.policy = *p;
    };
    k["simulate.capacity"] = [](PipelineConfig& c, std::string_view v) { c.simulate.cache.capacity = parse_count("simulate.capacity", v); };
    k["simulate.reset_between_traces"] = [](PipelineConfig& c, std::string_view v) {
      c.simulate.cache.reset_between_traces = parse_bool("simulate.reset_between_traces", v);
    };
    k["simulate.baseline_no_prefetch"] = [](PipelineConfig& c, std::string_view v) {
      c.simulate.no_prefetch_baseline = parse_bool("simulate.baseline_no_prefetch", v);
    };
    k["simulate.baseline_markov"] = [](PipelineConfig& c, std::string_view v) {
      c.simulate.markov_baseline = parse_bool("simulate.baseline_markov", v);
    };
    return k;
  }();
  return keys;
}

}  // namespace detail

// Applies one "section.key" = value assignment; unknown keys are rejected.
inline void set_config_value(PipelineConfig& cfg, std::string_view dotted_key, std::string_view value) {
  const auto& keys = detail::config_keys();
  const auto it = keys.find(dotted_key);
  if (it == keys.end()) throw UsageError("unknown config key '" + std::string(dotted_key) + "'");
  it->second(cfg, value);
}

// "section.key=value", as given to --set.
inline void apply_override(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw UsageError("expected section.key=value, got '" + std::string(assignment) + "'");
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

// INI text: [section] headers, key = value lines, ';' or '#' comments.
inline PipelineConfig parse_config(const std::string& text, const std::string& where = "config") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::string cleaned;
  {
    // Boost only knows ';' comments.
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t");
      if (first != std::string::npos && line[first] == '#') line.clear();
      cleaned += line + "\n";
    }
  }
  std::istringstream in(cleaned);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(where + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw UsageError(where + ": key '" + section + "' must be inside a [section]");
    for (const auto& [key, value] : body) {
      try {
        set_config_value(cfg, section + "." + key, value.get_value<std::string>());
      } catch (const UsageError& e) {
        throw UsageError(where + ": " + e.what());
      }
    }
  }
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path) { return parse_config(read_text_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Input checks shared by stages

inline void check_dataset_against(const WalkDataset& ds, const DomainGraph& g, const std::string& where) {
  const WalkGraph wg(g);
  for (const auto* part : {&ds.train, &ds.val, &ds.test})
    for (const auto& p : *part) {
      for (NodeId v : p.context)
        if (v >= g.size()) throw FormatError(where + ": node id " + std::to_string(v) + " is not in the graph");
      if (p.target >= g.size()) throw FormatError(where + ": node id " + std::to_string(p.target) + " is not in the graph");
      if (!wg.has_edge(p.last(), p.target))
        throw FormatError(where + ": pair " + std::to_string(p.last()) + " -> " + std::to_string(p.target) +
                          " is not a graph edge");
    }
}

inline void check_traces_against(const std::vector<Trace>& traces, std::size_t n, const std::string& where) {
  for (const auto& t : traces)
    for (NodeId v : t.nodes)
      if (v >= n) throw FormatError(where + ": node id " + std::to_string(v) + " is out of range");
}

// ---------------------------------------------------------------------------
// Stages

// Synthetic tree under out_dir; returns the manifest path.
inline fs::path cmd_synth(SyntheticTreeSpec spec, std::uint64_t seed, const fs::path& out_dir, std::ostream& log) {
  spec.seed = stage_seed(seed, "synth");
  const auto snap = generate_synthetic_tree(spec, out_dir);
  const auto counts = synthetic_counts(spec);
  std::size_t links = 0;
  for (const auto& p : snap.pages) links += p.outlinks.size();
  log << "synth: " << snap.pages.size() << " nodes (" << counts.directories << " directories, " << counts.files
      << " files), " << links << " edges\n";
  return out_dir / "manifest.json";
}

inline void print_snapshot_summary(const MirrorSnapshot& snap, std::string_view stage, std::ostream& log) {
  std::size_t links = 0;
  for (const auto& p : snap.pages) links += p.outlinks.size();
  const auto dropped = build_graph(snap, false).dropped_links;
  log << stage << ": " << snap.pages.size() << " pages, " << links << " links, " << dropped << " dropped links, "
      << snap.skipped << " skipped\n";
}

inline fs::path cmd_scan(const fs::path& root, const fs::path& out_dir, std::ostream& log) {
  if (!fs::is_directory(root)) throw UsageError("scan: not a directory: " + root.string());
  const auto snap = scan_filesystem(root);
  const auto manifest = out_dir / "manifest.json";
  write_manifest(snap, manifest, fs::absolute(snap.root).string());
  print_snapshot_summary(snap, "scan", log);
  return manifest;
}

inline fs::path cmd_crawl(const CrawlConfig& cfg, std::ostream& log) {
  const auto snap = crawl(cfg);
  print_snapshot_summary(snap, "crawl", log);
  return cfg.output_root / host_directory(*parse_url(cfg.base_url)) / "manifest.json";
}

inline DomainGraph cmd_graph(const fs::path& manifest, const fs::path& out_json, std::size_t cross_links,
                             std::uint64_t seed, std::ostream& log) {
  auto built = build_graph(read_manifest(manifest));
  if (cross_links > 0)
    built.graph = add_cross_links(std::move(built.graph), static_cast<long long>(cross_links), stage_seed(seed, "graph"));
  write_text_file(out_json, to_json(built.graph));
  log << "graph: " << built.graph.size() << " nodes, " << built.graph.edges.size() << " edges, "
      << built.dropped_links << " dropped links\n";
  return built.graph;
}

struct WalkOutputs {
  fs::path traces, dataset;
};

inline WalkOutputs cmd_walks(const fs::path& graph_json, WalkConfig cfg, std::size_t window, std::uint64_t seed,
                             const fs::path& out_dir, std::ostream& log) {
  if (window < 1) throw UsageError("walks: window must be at least 1");
  cfg.validate();
  const auto g = read_graph_file(graph_json);
  cfg.seed = stage_seed(seed, "walks");
  const auto traces = generate_sessions(g, cfg);
  const auto pairs = sliding_windows(traces, window);
  if (pairs.empty()) throw std::runtime_error("walks: the walks produced no (context, target) pairs");
  const auto ds = split_dataset(pairs, stage_seed(seed, "split"));
  const WalkOutputs out{out_dir / "traces.jsonl", out_dir / "dataset.jsonl"};
  write_text_file(out.traces, traces_to_jsonl(traces));
  write_text_file(out.dataset, dataset_to_jsonl(ds));
  log << "walks: " << traces.size() << " traces, " << pairs.size() << " pairs (train " << ds.train.size()
      << ", val " << ds.val.size() << ", test " << ds.test.size() << ")\n";
  return out;
}

struct TrainOutputs {
  fs::path model, history, embeddings;
};

inline TrainOutputs cmd_train(const fs::path& graph_json, const fs::path& dataset_jsonl, TrainConfig cfg,
                              std::uint64_t seed, const fs::path& out_dir, std::ostream& log) {
  const auto g = read_graph_file(graph_json);
  const auto ds = dataset_from_jsonl(read_text_file(dataset_jsonl), dataset_jsonl.string());
  check_dataset_against(ds, g, dataset_jsonl.string());
  cfg.seed = stage_seed(seed, "train");
  const auto [x, scaling] = standardize_features(g);
  const auto ops = GraphOps::from(g);
  const auto result = train(ops, x, ds, cfg);
  const auto& h = result.history;
  for (std::size_t e = 0; e < h.train_loss.size(); ++e)
    if (e == 0 || (e + 1) % 10 == 0 || e + 1 == h.train_loss.size())
      log << "train: epoch " << e + 1 << " loss " << format_real(h.train_loss[e]) << " val_top" << cfg.topk << " "
          << format_real(h.val_topk[e]) << "\n";
  if (!ds.test.empty())
    log << "train: test_top" << cfg.topk << " "
        << format_real(evaluate_topk(result.embeddings, transitions(ds.test), cfg.topk)) << "\n";
  const TrainOutputs out{out_dir / "model.json", out_dir / "history.csv", out_dir / "embeddings.csv"};
  write_text_file(out.model, checkpoint_to_json(result.params, scaling, cfg.temperature));
  write_text_file(out.history, history_to_csv(h));
  write_text_file(out.embeddings, embeddings_to_csv(result.embeddings));
  return out;
}

struct SimulateInputs {
  fs::path embeddings;
  fs::path dataset;                // test split replayed and train split fits the Markov baseline
  std::optional<fs::path> traces;  // replaces the test split as the replayed traces
  std::optional<fs::path> log;     // per-access prefetch log
};

inline SimulationReport cmd_simulate(const SimulateInputs& in, const SimulateConfig& cfg, const fs::path& out_report,
                                     std::ostream& log) {
  const auto z = embeddings_from_csv(read_text_file(in.embeddings), in.embeddings.string());
  const auto ds = dataset_from_jsonl(read_text_file(in.dataset), in.dataset.string());
  check_traces_against(pairs_as_traces(ds.train), z.rows(), in.dataset.string());
  check_traces_against(pairs_as_traces(ds.test), z.rows(), in.dataset.string());
  std::vector<Trace> traces;
  if (in.traces) {
    traces = traces_from_jsonl(read_text_file(*in.traces), in.traces->string());
    check_traces_against(traces, z.rows(), in.traces->string());
  } else {
    traces = pairs_as_traces(ds.test);
  }
  if (traces.empty()) throw std::runtime_error("simulate: nothing to replay");
  if (cfg.top_k < 1 || cfg.top_k >= z.rows()) throw UsageError("simulate: top_k must satisfy 1 <= top_k < node count");
  if (cfg.cache.policy == CachePolicy::lru && cfg.cache.capacity < 1)
    throw UsageError("simulate: an lru cache needs capacity >= 1");

  SimulationReport report;
  std::ostringstream access_log;
  report.gnn = simulate(EmbeddingPredictor(z, cfg.top_k), traces, cfg.cache, in.log ? &access_log : nullptr);
  if (cfg.no_prefetch_baseline) report.no_prefetch = simulate(no_prefetch, traces, cfg.cache);
  if (cfg.markov_baseline) {
    if (ds.train.empty()) throw std::runtime_error("simulate: the Markov baseline needs a train split");
    report.markov = simulate(MarkovPredictor(pairs_as_traces(ds.train), cfg.top_k), traces, cfg.cache);
  }
  report.config = {{"top_k", cfg.top_k},
                   {"cache_policy", to_string(cfg.cache.policy)},
                   {"capacity", cfg.cache.capacity},
                   {"reset_between_traces", cfg.cache.reset_between_traces},
                   {"traces", in.traces ? "file" : "test_split"},
                   {"trace_count", traces.size()}};
  write_text_file(out_report, report_to_json(report));
  if (in.log) write_text_file(*in.log, access_log.str());
  log << "simulate: gnn hit_rate " << format_real(report.gnn.hit_rate()) << " transition_hit_rate "
      << format_real(report.gnn.transition_hit_rate());
  if (report.no_prefetch) log << ", no_prefetch " << format_real(report.no_prefetch->hit_rate());
  if (report.markov) log << ", markov " << format_real(report.markov->hit_rate());
  log << "\n";
  return report;
}

struct ExportInputs {
  fs::path graph;
  std::optional<fs::path> embeddings, history, report;
  bool pca = false;
};

inline std::string pca_to_csv(const PcaResult& r, const DomainGraph& g) {
  std::string out = "node_id,pc1,pc2,kind\n";
  for (std::size_t i = 0; i < r.coords.rows(); ++i)
    out += std::to_string(i) + "," + format_real(r.coords(i, 0)) + "," + format_real(r.coords(i, 1)) + "," +
           std::string(to_string(g.nodes[i].kind)) + "\n";
  return out;
}

inline void cmd_export(const ExportInputs& in, const fs::path& out_dir, std::ostream& log) {
  const auto g = read_graph_file(in.graph);
  write_text_file(out_dir / "graph.gexf", to_gexf(g));
  write_text_file(out_dir / "graph.json", to_json(g));
  write_text_file(out_dir / "degree_distribution.csv", degree_distribution_csv(degree_distribution(g)));
  std::size_t written = 3;
  if (in.embeddings) {
    const auto z = embeddings_from_csv(read_text_file(*in.embeddings), in.embeddings->string());
    if (z.rows() != g.size())
      throw FormatError(in.embeddings->string() + ": " + std::to_string(z.rows()) + " rows but the graph has " +
                        std::to_string(g.size()) + " nodes");
    write_text_file(out_dir / "embeddings.csv", embeddings_to_csv(z));
    ++written;
    if (in.pca) {
      if (z.rows() < 2) throw std::runtime_error("export: PCA needs at least 2 embeddings, got " + std::to_string(z.rows()));
      write_text_file(out_dir / "pca.csv", pca_to_csv(pca_2d(z), g));
      ++written;
    }
  } else if (in.pca) {
    throw UsageError("export: --pca needs --embeddings");
  }
  if (in.history) {
    const auto text = read_text_file(*in.history);
    if (!text.starts_with("epoch,train_loss,val_top5\n"))
      throw FormatError(in.history->string() + ":1: expected header epoch,train_loss,val_top5");
    write_text_file(out_dir / "history.csv", text);
    ++written;
  }
  if (in.report) {
    const auto doc = parse_json_file(*in.report);
    expect_schema(doc, kReportVersion, in.report->string());
    write_text_file(out_dir / "report.json", doc.dump(2) + "\n");
    ++written;
  }
  log << "export: " << written << " files in " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// Whole pipeline

struct RunPaths {
  fs::path snapshot_dir, graph, walks_dir, model_dir, report, access_log, export_dir;

  static RunPaths under(const fs::path& out) {
    return {out / "snapshot", out / "graph.json", out / "walks", out / "model",
            out / "report.json", out / "simulate.log", out / "export"};
  }
};

// Source, graph, walks, train, simulate and export, in that order.
inline RunPaths run_all(const PipelineConfig& cfg, std::ostream& log) {
  const auto seed = cfg.require_seed();
  const auto paths = RunPaths::under(cfg.out_dir);
  fs::path manifest;
  switch (cfg.source) {
    case SourceMode::synth: manifest = cmd_synth(cfg.synth, seed, paths.snapshot_dir, log); break;
    case SourceMode::scan:
      if (cfg.scan_root.empty()) throw UsageError("source.root is required when source.mode = scan");
      manifest = cmd_scan(cfg.scan_root, paths.snapshot_dir, log);
      break;
    case SourceMode::crawl: {
      auto c = cfg.crawl;
      c.output_root = paths.snapshot_dir;
      manifest = cmd_crawl(c, log);
      break;
    }
  }
  cmd_graph(manifest, paths.graph, cfg.graph_cross_links, seed, log);
  const auto walks = cmd_walks(paths.graph, cfg.walks, cfg.window, seed, paths.walks_dir, log);
  const auto model = cmd_train(paths.graph, walks.dataset, cfg.train, seed, paths.model_dir, log);
  cmd_simulate({model.embeddings, walks.dataset, std::nullopt, paths.access_log}, cfg.simulate, paths.report, log);
  cmd_export({paths.graph, model.embeddings, model.history, paths.report, true}, paths.export_dir, log);
  return paths;
}

}  // namespace gnnpf
