#pragma once

// Training loop (Adam over shuffled minibatches), Top-k evaluation and model/embedding
// persistence.

#include <cmath>
#include <map>
#include <span>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gnnpf/errors.hpp"
#include "gnnpf/gnn.hpp"
#include "gnnpf/walk.hpp"

namespace gnnpf {

// ---------------------------------------------------------------------------
// Features

struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> stddev;  // 0 marks a constant column
};

// Per-feature z-scores over all nodes. Constant columns become zero.
inline std::pair<Matrix, FeatureScaling> standardize_features(const DomainGraph& g) {
  const std::size_t n = g.size();
  Matrix x(n, kFeatureCount);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = g.nodes[i].features.values();
    for (std::size_t j = 0; j < kFeatureCount; ++j) x(i, j) = v[j];
  }
  FeatureScaling s{std::vector<double>(kFeatureCount, 0.0), std::vector<double>(kFeatureCount, 0.0)};
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(n);
    s.mean[j] = mean;
    s.stddev[j] = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i)
      x(i, j) = s.stddev[j] > 0.0 ? (x(i, j) - mean) / s.stddev[j] : 0.0;
  }
  return {std::move(x), std::move(s)};
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 0.005;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ModelParams m, v;
  std::uint64_t step = 0;

  static AdamState for_model(const ModelParams& p) { return {zeros_like(p), zeros_like(p), 0}; }
};

// One bias-corrected Adam step. Weight decay is L2: lambda * w is added to
// the gradient before the moment updates.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto ps = params.tensors();
  const auto gs = grads.tensors();
  auto ms = state.m.tensors();
  auto vs = state.v.tensors();
  if (gs.size() != ps.size() || ms.size() != ps.size())
    throw std::invalid_argument("adam_step: parameter layout mismatch");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& w = ps[k]->data();
    const auto& g = gs[k]->data();
    auto& m = ms[k]->data();
    auto& v = vs[k]->data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double grad = g[i] + cfg.weight_decay * w[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad * grad;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation

// True iff v ranks among the k best candidates for u by score z_u . z_w,
// u itself excluded, ties going to the smaller node id.
inline bool in_topk(const Matrix& z, NodeId u, NodeId v, std::size_t k) {
  if (u == v) return false;
  const auto zu = z.row(u);
  const double sv = dot(zu, z.row(v));
  std::size_t ahead = 0;
  for (NodeId w = 0; w < z.rows() && ahead < k; ++w) {
    if (w == u || w == v) continue;
    const double sw = dot(zu, z.row(w));
    if (sw > sv || (sw == sv && w < v)) ++ahead;
  }
  return ahead < k;
}

// Fraction of pairs (u, v) with in_topk(z, u, v, k). Score rows are
// computed once per distinct source.
inline double evaluate_topk(const Matrix& z, const std::vector<Edge>& pairs, std::size_t k) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_topk: no pairs");
  std::map<NodeId, std::vector<NodeId>> by_source;
  for (auto [u, v] : pairs) {
    if (u >= z.rows() || v >= z.rows()) throw std::out_of_range("evaluate_topk: node id out of range");
    by_source[u].push_back(v);
  }
  const Matrix scores = matmul_nt(z, z);
  std::size_t hits = 0;
  for (const auto& [u, targets] : by_source) {
    const auto s = scores.row(u);
    for (NodeId v : targets) {
      if (v == u) continue;
      std::size_t ahead = 0;
      for (NodeId w = 0; w < z.rows() && ahead < k; ++w) {
        if (w == u || w == v) continue;
        if (s[w] > s[v] || (s[w] == s[v] && w < v)) ++ahead;
      }
      if (ahead < k) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// (last context node, target) for each pair.
inline std::vector<Edge> transitions(const std::vector<Pair>& pairs) {
  std::vector<Edge> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.emplace_back(p.last(), p.target);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 0.005;
  double weight_decay = 1e-4;
  std::size_t topk = 5;
  std::uint64_t seed = 0;
  double temperature = 0.1;
  LayerType layer = LayerType::sage;
  std::size_t hidden_dim = 128;
  std::size_t embed_dim = 64;
  std::size_t batch_size = 32;  // 0 = full batch

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
    if (!(temperature > 0.0)) throw std::invalid_argument("train: temperature must be positive");
    if (topk < 1) throw std::invalid_argument("train: topk must be at least 1");
  }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_topk;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  Matrix embeddings;
};

// Epochs over the train split. With batch_size 0 each epoch is one Adam
// step on the whole split; otherwise the split is reshuffled every epoch
// and cut into consecutive minibatches, one step each. The recorded epoch
// loss is the pair-weighted mean of the losses that were differentiated.
// The validation split is scored after the epoch's last step.
inline TrainResult train(const GraphOps& ops, const Matrix& features, const WalkDataset& ds,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train.empty() || ds.val.empty()) throw std::invalid_argument("train: empty train or val split");
  Rng rng(cfg.seed);
  TrainResult out;
  out.params = init_params(cfg.layer, {features.cols(), cfg.hidden_dim, cfg.hidden_dim, cfg.embed_dim}, rng);
  auto state = AdamState::for_model(out.params);
  const AdamConfig adam{cfg.learning_rate, cfg.weight_decay};
  auto train_pairs = transitions(ds.train);
  const auto val_pairs = transitions(ds.val);
  const std::size_t batch =
      cfg.batch_size == 0 ? train_pairs.size() : std::min(cfg.batch_size, train_pairs.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < train_pairs.size()) shuffle(std::span<Edge>(train_pairs), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < train_pairs.size(); start += batch) {
      const auto stop = std::min(start + batch, train_pairs.size());
      const std::vector<Edge> chunk(train_pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                    train_pairs.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto g = backward(out.params, features, ops, chunk, cfg.temperature);
      if (!std::isfinite(g.loss))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
      adam_step(out.params, g.grads, state, adam);
      weighted += g.loss * static_cast<double>(chunk.size());
    }
    out.history.train_loss.push_back(weighted / static_cast<double>(train_pairs.size()));
    out.embeddings = forward(out.params, features, ops);
    out.history.val_topk.push_back(evaluate_topk(out.embeddings, val_pairs, cfg.topk));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

inline std::string checkpoint_to_json(const ModelParams& p, const FeatureScaling& scaling, double temperature) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers) {
    nlohmann::json jl{{"weight", matrix_to_json(l.weight)}};
    if (p.type == LayerType::sage) {
      jl["neigh_weight"] = matrix_to_json(l.neigh_weight);
      jl["bias"] = matrix_to_json(l.bias);
    }
    layers.push_back(std::move(jl));
  }
  nlohmann::json doc{{"schema_version", kCheckpointVersion},
                     {"layer", to_string(p.type)},
                     {"dims", p.dims},
                     {"temperature", temperature},
                     {"feature_mean", scaling.mean},
                     {"feature_stddev", scaling.stddev},
                     {"layers", std::move(layers)}};
  return doc.dump() + "\n";
}

struct Checkpoint {
  ModelParams params;
  FeatureScaling scaling;
  double temperature = 0.1;
};

inline Checkpoint checkpoint_from_json(std::string_view text, const std::string& where = "model.json") {
  const auto doc = parse_json_text(text, where);
  expect_schema(doc, kCheckpointVersion, where);
  try {
    Checkpoint c;
    const auto type = layer_type_from_string(doc.at("layer").get<std::string>());
    if (!type) throw FormatError(where + ": unknown layer type");
    c.params.type = *type;
    c.params.dims = doc.at("dims").get<std::vector<std::size_t>>();
    c.temperature = doc.at("temperature").get<double>();
    c.scaling.mean = doc.at("feature_mean").get<std::vector<double>>();
    c.scaling.stddev = doc.at("feature_stddev").get<std::vector<double>>();
    const auto& layers = doc.at("layers");
    if (layers.size() + 1 != c.params.dims.size()) throw FormatError(where + ": layer count does not match dims");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Layer layer;
      layer.weight = matrix_from_json(layers[l].at("weight"));
      if (c.params.type == LayerType::sage) {
        layer.neigh_weight = matrix_from_json(layers[l].at("neigh_weight"));
        layer.bias = matrix_from_json(layers[l].at("bias"));
      }
      if (layer.weight.rows() != c.params.dims[l] || layer.weight.cols() != c.params.dims[l + 1])
        throw FormatError(where + ": layers[" + std::to_string(l) + "] has the wrong shape");
      c.params.layers.push_back(std::move(layer));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
}

inline std::string format_real(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

inline std::string history_to_csv(const TrainHistory& h) {
  std::string out = "epoch,train_loss,val_top5\n";
  for (std::size_t i = 0; i < h.train_loss.size(); ++i)
    out += std::to_string(i + 1) + "," + format_real(h.train_loss[i]) + "," + format_real(h.val_topk[i]) + "\n";
  return out;
}

inline std::string embeddings_to_csv(const Matrix& z) {
  std::string out = "node_id";
  for (std::size_t j = 0; j < z.cols(); ++j) out += ",e" + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < z.rows(); ++i) {
    out += std::to_string(i);
    for (double v : z.row(i)) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

inline Matrix embeddings_from_csv(std::string_view text, const std::string& where = "embeddings.csv") {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0, pos = 0, cols = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string line(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto loc = where + ":" + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (line_no == 1) {
      if (fields.empty() || fields[0] != "node_id") throw FormatError(loc + ": expected header starting with node_id");
      cols = fields.size() - 1;
      continue;
    }
    if (fields.size() != cols + 1) throw FormatError(loc + ": expected " + std::to_string(cols + 1) + " fields");
    try {
      if (std::stoull(fields[0]) != rows.size()) throw FormatError(loc + ": node ids must be 0..N-1 in order");
      std::vector<double> r;
      for (std::size_t j = 1; j < fields.size(); ++j) r.push_back(std::stod(fields[j]));
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError(loc + ": malformed number");
    }
  }
  if (cols == 0 && rows.empty() && line_no == 0) throw FormatError(where + ": empty file");
  Matrix z(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) z(i, j) = rows[i][j];
  return z;
}

}  // namespace gnnpf
