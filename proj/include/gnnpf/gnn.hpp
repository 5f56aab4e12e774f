#pragma once

// GNN engine: normalized adjacency, GCN and GraphSAGE (mean) layers, the
// three-layer embedding model, the softmax link-prediction loss and its
// exact reverse-mode gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gnnpf/graph.hpp"
#include "gnnpf/matrix.hpp"
#include "gnnpf/rng.hpp"

namespace gnnpf {

enum class LayerType { sage, gcn };
enum class Activation { identity, relu };

inline std::string_view to_string(LayerType t) { return t == LayerType::sage ? "sage" : "gcn"; }

inline std::optional<LayerType> layer_type_from_string(std::string_view s) {
  if (s == "sage") return LayerType::sage;
  if (s == "gcn") return LayerType::gcn;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Graph operators

// D^-1/2 (A + I) D^-1/2 over the undirected projection, as sorted triples.
struct NormAdjacency {
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::size_t n = 0;
  std::vector<Entry> entries;

  // normA * h
  Matrix apply(const Matrix& h) const {
    if (h.rows() != n) throw std::invalid_argument("NormAdjacency: row count mismatch");
    Matrix out(n, h.cols());
    for (const auto& e : entries) {
      auto dst = out.row(e.row);
      const auto src = h.row(e.col);
      for (std::size_t j = 0; j < h.cols(); ++j) dst[j] += e.value * src[j];
    }
    return out;
  }

  Matrix dense() const {
    Matrix m(n, n);
    for (const auto& e : entries) m(e.row, e.col) = e.value;
    return m;
  }
};

inline NormAdjacency normalize_adjacency(const DomainGraph& g) {
  if (g.nodes.empty()) throw std::invalid_argument("normalize_adjacency: empty graph");
  const auto adj = g.undirected_adjacency();
  NormAdjacency a;
  a.n = g.size();
  std::vector<double> inv_sqrt(a.n);
  for (std::size_t i = 0; i < a.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size() + 1));
  for (std::size_t i = 0; i < a.n; ++i) {
    bool self_done = false;
    for (NodeId j : adj[i]) {
      if (!self_done && j > i) {
        a.entries.push_back({i, i, inv_sqrt[i] * inv_sqrt[i]});
        self_done = true;
      }
      a.entries.push_back({i, j, inv_sqrt[i] * inv_sqrt[j]});
    }
    if (!self_done) a.entries.push_back({i, i, inv_sqrt[i] * inv_sqrt[i]});
  }
  return a;
}

// SAGE neighborhoods: undirected neighbors plus the node itself, sorted.
struct Neighborhoods {
  std::vector<std::vector<NodeId>> members;

  std::size_t size() const { return members.size(); }

  // Row v = mean of h over members[v].
  Matrix mean(const Matrix& h) const {
    Matrix out(members.size(), h.cols());
    for (std::size_t v = 0; v < members.size(); ++v) {
      auto dst = out.row(v);
      for (NodeId u : members[v]) {
        const auto src = h.row(u);
        for (std::size_t j = 0; j < h.cols(); ++j) dst[j] += src[j];
      }
      const double inv = 1.0 / static_cast<double>(members[v].size());
      for (double& x : dst) x *= inv;
    }
    return out;
  }

  // Adjoint of mean(): row u collects d[v] / |members[v]| for each v containing u.
  Matrix mean_transpose(const Matrix& d) const {
    Matrix out(members.size(), d.cols());
    for (std::size_t v = 0; v < members.size(); ++v) {
      const double inv = 1.0 / static_cast<double>(members[v].size());
      const auto src = d.row(v);
      for (NodeId u : members[v]) {
        auto dst = out.row(u);
        for (std::size_t j = 0; j < d.cols(); ++j) dst[j] += inv * src[j];
      }
    }
    return out;
  }
};

inline Neighborhoods neighborhoods(const DomainGraph& g) {
  Neighborhoods nb;
  nb.members = g.undirected_adjacency();
  for (std::size_t v = 0; v < nb.members.size(); ++v) {
    auto& m = nb.members[v];
    m.insert(std::lower_bound(m.begin(), m.end(), v), v);
  }
  return nb;
}

struct GraphOps {
  NormAdjacency norm_adj;
  Neighborhoods nbhd;

  static GraphOps from(const DomainGraph& g) { return {normalize_adjacency(g), neighborhoods(g)}; }
  std::size_t size() const { return norm_adj.n; }
};

// ---------------------------------------------------------------------------
// Layers

inline void activate(Matrix& m, Activation act) {
  if (act == Activation::relu)
    for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

// act(normA * H * W)
inline Matrix gcn_layer(const Matrix& h, const NormAdjacency& norm_adj, const Matrix& w, Activation act) {
  if (h.cols() != w.rows()) throw std::invalid_argument("gcn_layer: H and W dimensions differ");
  Matrix out = matmul(norm_adj.apply(h), w);
  activate(out, act);
  return out;
}

// act(H * W_self + mean_nbhd(H) * W_neigh + bias)
inline Matrix sage_layer(const Matrix& h, const Neighborhoods& nbhd, const Matrix& w_self,
                         const Matrix& w_neigh, const Matrix& bias, Activation act) {
  if (h.cols() != w_self.rows() || h.cols() != w_neigh.rows() || w_self.cols() != w_neigh.cols() ||
      bias.rows() != 1 || bias.cols() != w_self.cols() || h.rows() != nbhd.size())
    throw std::invalid_argument("sage_layer: dimension mismatch");
  Matrix out = matmul(h, w_self);
  out += matmul(nbhd.mean(h), w_neigh);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
  activate(out, act);
  return out;
}

// ---------------------------------------------------------------------------
// Model

// Per layer: `weight` is W_self for SAGE and W for GCN. GCN layers carry no
// neighbor weight and no bias (both left 0x0).
struct Layer {
  Matrix weight;
  Matrix neigh_weight;
  Matrix bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelParams {
  LayerType type = LayerType::sage;
  std::vector<std::size_t> dims;  // in_dim, hidden..., embed_dim
  std::vector<Layer> layers;

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for (auto& l : layers)
      for (Matrix* m : {&l.weight, &l.neigh_weight, &l.bias})
        if (!m->empty()) out.push_back(m);
    return out;
  }
  std::vector<const Matrix*> tensors() const {
    std::vector<const Matrix*> out;
    for (const auto& l : layers)
      for (const Matrix* m : {&l.weight, &l.neigh_weight, &l.bias})
        if (!m->empty()) out.push_back(m);
    return out;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (Matrix* m : z.tensors()) std::fill(m->data().begin(), m->data().end(), 0.0);
  return z;
}

// Glorot-uniform weights in +-sqrt(6 / (d_in + d_out)), zero biases.
inline ModelParams init_params(LayerType type, std::vector<std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("init_params: need at least two dimensions");
  ModelParams p;
  p.type = type;
  p.dims = std::move(dims);
  auto glorot = [&](std::size_t in, std::size_t out) {
    Matrix m(in, out);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& v : m.data()) v = uniform(rng, -limit, limit);
    return m;
  };
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    const auto in = p.dims[l], out = p.dims[l + 1];
    Layer layer;
    layer.weight = glorot(in, out);
    if (type == LayerType::sage) {
      layer.neigh_weight = glorot(in, out);
      layer.bias = Matrix(1, out);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

struct ForwardTrace {
  std::vector<Matrix> inputs;      // H fed to each layer
  std::vector<Matrix> aggregated;  // mean_nbhd(H) for SAGE, normA*H for GCN
  std::vector<Matrix> pre;         // pre-activation outputs
  Matrix raw;                      // last layer output before row normalization
  Matrix embeddings;               // row-normalized
};

inline Activation layer_activation(const ModelParams& p, std::size_t l) {
  return l + 1 < p.layers.size() ? Activation::relu : Activation::identity;
}

inline ForwardTrace forward_trace(const ModelParams& p, const Matrix& features, const GraphOps& ops) {
  if (features.cols() != p.dims.front() || features.rows() != ops.size())
    throw std::invalid_argument("forward: feature matrix has the wrong shape");
  ForwardTrace t;
  Matrix h = features;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix agg, pre;
    if (p.type == LayerType::sage) {
      agg = ops.nbhd.mean(h);
      pre = matmul(h, layer.weight);
      pre += matmul(agg, layer.neigh_weight);
      for (std::size_t i = 0; i < pre.rows(); ++i) {
        auto r = pre.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias(0, j);
      }
    } else {
      agg = ops.norm_adj.apply(h);
      pre = matmul(agg, layer.weight);
    }
    Matrix out = pre;
    activate(out, layer_activation(p, l));
    t.inputs.push_back(std::move(h));
    t.aggregated.push_back(std::move(agg));
    t.pre.push_back(std::move(pre));
    h = std::move(out);
  }
  t.raw = std::move(h);
  t.embeddings = normalize_rows(t.raw);
  return t;
}

// Row-normalized node embeddings.
inline Matrix forward(const ModelParams& p, const Matrix& features, const GraphOps& ops) {
  return forward_trace(p, features, ops).embeddings;
}

// ---------------------------------------------------------------------------
// Loss

struct LossAndGrad {
  double loss = 0.0;
  Matrix d_embeddings;  // empty unless requested
};

// Mean over (u, v) of -log softmax_w(Z_u . Z_w / temperature)[v], the
// softmax running over every node w. Sources are grouped so each distinct
// u costs one pass over Z.
inline LossAndGrad linkpred_loss_and_grad(const Matrix& z, const std::vector<Edge>& batch,
                                          double temperature, bool want_grad) {
  if (batch.empty()) throw std::invalid_argument("linkpred_loss: empty batch");
  const std::size_t n = z.rows();
  std::map<NodeId, std::vector<NodeId>> by_source;
  for (auto [u, v] : batch) {
    if (u >= n || v >= n) throw std::out_of_range("linkpred_loss: node id out of range");
    by_source[u].push_back(v);
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_t = 1.0 / temperature;
  LossAndGrad out;
  if (want_grad) out.d_embeddings = Matrix(n, z.cols());
  const Matrix zt = transpose(z);
  std::vector<double> logits(n), coeff(n);
  double total = 0.0;
  for (const auto& [u, targets] : by_source) {
    const auto zu = z.row(u);
    std::fill(logits.begin(), logits.end(), 0.0);
    for (std::size_t j = 0; j < zu.size(); ++j) {
      const double a = zu[j];
      const auto col = zt.row(j);
      for (std::size_t w = 0; w < n; ++w) logits[w] += a * col[w];
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < n; ++w) {
      logits[w] *= inv_t;
      max_logit = std::max(max_logit, logits[w]);
    }
    double sum = 0.0;
    for (std::size_t w = 0; w < n; ++w) sum += std::exp(logits[w] - max_logit);
    const double lse = max_logit + std::log(sum);
    const double count = static_cast<double>(targets.size());
    total += count * lse;
    for (NodeId v : targets) total -= logits[v];
    if (!want_grad) continue;

    // dL/dlogit[u][w] = (count * softmax[w] - #(u, w)) / B
    for (std::size_t w = 0; w < n; ++w) coeff[w] = count * std::exp(logits[w] - lse);
    for (NodeId v : targets) coeff[v] -= 1.0;
    auto du = out.d_embeddings.row(u);
    for (std::size_t w = 0; w < n; ++w) {
      const double c = coeff[w] * inv_b * inv_t;
      if (c == 0.0) continue;
      const auto zw = z.row(w);
      auto dw = out.d_embeddings.row(w);
      for (std::size_t j = 0; j < zu.size(); ++j) {
        du[j] += c * zw[j];
        dw[j] += c * zu[j];
      }
    }
  }
  out.loss = total * inv_b;
  return out;
}

inline double linkpred_loss(const Matrix& z, const std::vector<Edge>& batch, double temperature) {
  return linkpred_loss_and_grad(z, batch, temperature, false).loss;
}

// ---------------------------------------------------------------------------
// Backward

struct Gradients {
  double loss = 0.0;
  ModelParams grads;  // same shapes as the model
};

// Exact gradient of linkpred_loss(forward(params)) by reverse accumulation
// through row normalization, each layer and the softmax.
inline Gradients backward(const ModelParams& p, const Matrix& features, const GraphOps& ops,
                          const std::vector<Edge>& batch, double temperature) {
  const auto t = forward_trace(p, features, ops);
  auto lg = linkpred_loss_and_grad(t.embeddings, batch, temperature, true);

  Gradients out;
  out.loss = lg.loss;
  out.grads = zeros_like(p);

  // z = y / |y|  =>  dy = (dz - z (z . dz)) / |y|
  Matrix d = std::move(lg.d_embeddings);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    auto dz = d.row(i);
    const auto y = t.raw.row(i);
    const double norm = std::sqrt(dot(y, y));
    if (norm == 0.0) {
      std::fill(dz.begin(), dz.end(), 0.0);
      continue;
    }
    const auto z = t.embeddings.row(i);
    const double proj = dot(z, dz);
    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = (dz[j] - z[j] * proj) / norm;
  }

  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    auto& g = out.grads.layers[l];
    if (layer_activation(p, l) == Activation::relu) {
      const auto& pre = t.pre[l].data();
      auto& dd = d.data();
      for (std::size_t i = 0; i < dd.size(); ++i)
        if (!(pre[i] > 0.0)) dd[i] = 0.0;
    }
    if (p.type == LayerType::sage) {
      g.weight = matmul_tn(t.inputs[l], d);
      g.neigh_weight = matmul_tn(t.aggregated[l], d);
      for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j) g.bias(0, j) += d(i, j);
      if (l == 0) break;
      Matrix dh = matmul_nt(d, layer.weight);
      dh += ops.nbhd.mean_transpose(matmul_nt(d, layer.neigh_weight));
      d = std::move(dh);
    } else {
      g.weight = matmul_tn(t.aggregated[l], d);
      if (l == 0) break;
      // normA is symmetric, so it is its own adjoint.
      d = ops.norm_adj.apply(matmul_nt(d, layer.weight));
    }
  }
  return out;
}

}  // namespace gnnpf
