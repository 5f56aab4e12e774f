// gnnpf: command-line front end for the prefetching pipeline.
//
//   gnnpf synth --out DIR --seed 7
//   gnnpf graph --manifest DIR/manifest.json --out graph.json
//   gnnpf run-all --config experiment.ini
//
// Flags override values from --config. Exit codes: 0 ok, 1 runtime
// failure, 2 usage error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gnnpf/pipeline.hpp"

namespace {

using namespace gnnpf;

template <typename T>
void override_if(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

std::uint64_t seed_from(const std::optional<std::uint64_t>& flag, const PipelineConfig& cfg) {
  return flag ? *flag : cfg.require_seed();
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;

  // crawl / scan / synth
  std::string base_url, root, out;
  std::optional<std::size_t> max_pages, max_depth, branching, depth, files, cross_links;
  std::optional<long long> delay_ms;

  // graph / walks / train / simulate / export
  std::string manifest, graph, dataset, embeddings, history, report;
  std::optional<std::string> traces, log_file;
  std::optional<std::size_t> walkers, length, window, epochs, batch_size, hidden, embed, topk, top_k, capacity;
  std::optional<double> p, q, lr, weight_decay, temperature;
  std::optional<std::string> start_policy, layer, cache_policy;
  std::vector<std::string> baselines;
  bool pca = false;
  std::vector<std::string> overrides;
};

PipelineConfig base_config(const Flags& f) { return f.config.empty() ? PipelineConfig{} : load_config(f.config); }

void apply_walk_flags(const Flags& f, PipelineConfig& cfg) {
  override_if(f.walkers, cfg.walks.num_walkers);
  override_if(f.length, cfg.walks.walk_length);
  override_if(f.p, cfg.walks.p);
  override_if(f.q, cfg.walks.q);
  override_if(f.window, cfg.window);
  if (f.start_policy) set_config_value(cfg, "walks.start_policy", *f.start_policy);
}

void apply_train_flags(const Flags& f, PipelineConfig& cfg) {
  override_if(f.epochs, cfg.train.epochs);
  override_if(f.batch_size, cfg.train.batch_size);
  override_if(f.hidden, cfg.train.hidden_dim);
  override_if(f.embed, cfg.train.embed_dim);
  override_if(f.topk, cfg.train.topk);
  override_if(f.lr, cfg.train.learning_rate);
  override_if(f.weight_decay, cfg.train.weight_decay);
  override_if(f.temperature, cfg.train.temperature);
  if (f.layer) set_config_value(cfg, "train.layer", *f.layer);
}

void apply_simulate_flags(const Flags& f, PipelineConfig& cfg) {
  override_if(f.top_k, cfg.simulate.top_k);
  override_if(f.capacity, cfg.simulate.cache.capacity);
  if (f.cache_policy) set_config_value(cfg, "simulate.cache_policy", *f.cache_policy);
  if (f.baselines.empty()) return;
  cfg.simulate.no_prefetch_baseline = cfg.simulate.markov_baseline = false;
  for (const auto& b : f.baselines) {
    if (b == "no_prefetch") cfg.simulate.no_prefetch_baseline = true;
    else if (b == "markov") cfg.simulate.markov_baseline = true;
    else if (b == "all") cfg.simulate.no_prefetch_baseline = cfg.simulate.markov_baseline = true;
    else if (b != "none") throw UsageError("--baseline: expected none, no_prefetch, markov or all");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNN-driven cache prefetching pipeline"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "INI config file; flags override its values")->check(CLI::ExistingFile);

  auto* crawl = app.add_subcommand("crawl", "Mirror a web site and write its manifest");
  crawl->add_option("--base-url", f.base_url, "Start URL")->required();
  crawl->add_option("--max-pages", f.max_pages, "Page budget");
  crawl->add_option("--max-depth", f.max_depth, "Link depth limit");
  crawl->add_option("--delay-ms", f.delay_ms, "Delay between requests");
  crawl->add_option("--out", f.out, "Output root")->required();

  auto* scan = app.add_subcommand("scan", "Snapshot a directory tree");
  scan->add_option("--root", f.root, "Directory to scan")->required();
  scan->add_option("--out", f.out, "Output directory for manifest.json")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic project tree");
  synth->add_option("--branching", f.branching, "Subdirectories per directory");
  synth->add_option("--depth", f.depth, "Directory levels below the root");
  synth->add_option("--files", f.files, "Files per directory");
  synth->add_option("--cross-links", f.cross_links, "Random directory-to-directory links");
  synth->add_option("--seed", f.seed, "Global seed");
  synth->add_option("--out", f.out, "Output directory")->required();

  auto* graph = app.add_subcommand("graph", "Build the feature graph from a manifest");
  graph->add_option("--manifest", f.manifest, "Snapshot manifest")->required()->check(CLI::ExistingFile);
  graph->add_option("--out", f.out, "Graph JSON to write")->required();
  graph->add_option("--cross-links", f.cross_links, "Extra random links between directories");
  graph->add_option("--seed", f.seed, "Global seed");

  auto* walks = app.add_subcommand("walks", "Simulate navigation sessions and build the dataset");
  walks->add_option("--graph", f.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  walks->add_option("--out", f.out, "Output directory")->required();
  walks->add_option("--walkers", f.walkers, "Number of walks");
  walks->add_option("--length", f.length, "Nodes per walk");
  walks->add_option("--p", f.p, "Return parameter");
  walks->add_option("--q", f.q, "In-out parameter");
  walks->add_option("--window", f.window, "Context window length");
  walks->add_option("--start-policy", f.start_policy, "uniform, root_only or degree_weighted");
  walks->add_option("--seed", f.seed, "Global seed");

  auto* train_cmd = app.add_subcommand("train", "Train the GNN next-node predictor");
  train_cmd->add_option("--graph", f.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dataset", f.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", f.out, "Output directory")->required();
  train_cmd->add_option("--layer", f.layer, "sage or gcn");
  train_cmd->add_option("--epochs", f.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", f.batch_size, "Pairs per Adam step (0 = full batch)");
  train_cmd->add_option("--hidden", f.hidden, "Hidden width");
  train_cmd->add_option("--embed", f.embed, "Embedding width");
  train_cmd->add_option("--topk", f.topk, "k of the validation hit rate");
  train_cmd->add_option("--lr", f.lr, "Adam learning rate");
  train_cmd->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
  train_cmd->add_option("--temperature", f.temperature, "Softmax temperature");
  train_cmd->add_option("--seed", f.seed, "Global seed");

  auto* sim = app.add_subcommand("simulate", "Replay traces through a prefetching cache");
  sim->add_option("--embeddings", f.embeddings, "Embeddings CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--dataset", f.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  sim->add_option("--traces", f.traces, "Traces JSONL to replay instead of the test split");
  sim->add_option("--top-k", f.top_k, "Nodes prefetched per access");
  sim->add_option("--cache-policy", f.cache_policy, "unbounded or lru");
  sim->add_option("--capacity", f.capacity, "LRU capacity");
  sim->add_option("--baseline", f.baselines, "none, no_prefetch, markov or all")->delimiter(',');
  sim->add_option("--log", f.log_file, "Write per-access prefetch log here");
  sim->add_option("--out", f.out, "Report JSON to write")->required();

  auto* exp = app.add_subcommand("export", "Write GEXF, JSON and CSV artifacts");
  exp->add_option("--graph", f.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  exp->add_option("--embeddings", f.embeddings, "Embeddings CSV")->check(CLI::ExistingFile);
  exp->add_option("--history", f.history, "Training history CSV")->check(CLI::ExistingFile);
  exp->add_option("--report", f.report, "Simulation report JSON")->check(CLI::ExistingFile);
  exp->add_flag("--pca", f.pca, "Also write the 2-D PCA projection of the embeddings");
  exp->add_option("--out", f.out, "Output directory")->required();

  auto* all = app.add_subcommand("run-all", "Run every stage from one config");
  all->add_option("--out", f.out, "Output directory (overrides run.out_dir)");
  all->add_option("--seed", f.seed, "Global seed (overrides run.seed)");
  all->add_option("--set", f.overrides, "section.key=value override, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig cfg = base_config(f);
    std::ostream& log = std::cout;
    if (*crawl) {
      cfg.crawl.base_url = f.base_url;
      override_if(f.max_pages, cfg.crawl.max_pages);
      override_if(f.max_depth, cfg.crawl.max_depth);
      if (f.delay_ms) cfg.crawl.request_delay = std::chrono::milliseconds(*f.delay_ms);
      cfg.crawl.output_root = f.out;
      cfg.crawl.validate();
      std::cout << "manifest: " << cmd_crawl(cfg.crawl, log).string() << "\n";
    } else if (*scan) {
      std::cout << "manifest: " << cmd_scan(f.root, f.out, log).string() << "\n";
    } else if (*synth) {
      override_if(f.branching, cfg.synth.branching);
      override_if(f.depth, cfg.synth.depth);
      override_if(f.files, cfg.synth.files_per_dir);
      override_if(f.cross_links, cfg.synth.cross_links);
      std::cout << "manifest: " << cmd_synth(cfg.synth, seed_from(f.seed, cfg), f.out, log).string() << "\n";
    } else if (*graph) {
      override_if(f.cross_links, cfg.graph_cross_links);
      const std::uint64_t seed = cfg.graph_cross_links > 0 ? seed_from(f.seed, cfg) : f.seed.value_or(cfg.seed.value_or(0));
      cmd_graph(f.manifest, f.out, cfg.graph_cross_links, seed, log);
    } else if (*walks) {
      apply_walk_flags(f, cfg);
      cmd_walks(f.graph, cfg.walks, cfg.window, seed_from(f.seed, cfg), f.out, log);
    } else if (*train_cmd) {
      apply_train_flags(f, cfg);
      cmd_train(f.graph, f.dataset, cfg.train, seed_from(f.seed, cfg), f.out, log);
    } else if (*sim) {
      apply_simulate_flags(f, cfg);
      SimulateInputs in{f.embeddings, f.dataset, std::nullopt, std::nullopt};
      if (f.traces) in.traces = fs::path(*f.traces);
      if (f.log_file) in.log = fs::path(*f.log_file);
      cmd_simulate(in, cfg.simulate, f.out, log);
    } else if (*exp) {
      ExportInputs in{f.graph, std::nullopt, std::nullopt, std::nullopt, f.pca};
      if (!f.embeddings.empty()) in.embeddings = fs::path(f.embeddings);
      if (!f.history.empty()) in.history = fs::path(f.history);
      if (!f.report.empty()) in.report = fs::path(f.report);
      cmd_export(in, f.out, log);
    } else if (*all) {
      for (const auto& o : f.overrides) apply_override(cfg, o);
      if (f.seed) cfg.seed = f.seed;
      if (!f.out.empty()) cfg.out_dir = f.out;
      const auto paths = run_all(cfg, log);
      std::cout << "report: " << paths.report.string() << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
