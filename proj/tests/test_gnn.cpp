#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnnpf/gnn.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gnnpf;
using namespace gnnpf::testing;

namespace {

std::vector<Edge> random_batch(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<Edge> b;
  for (std::size_t i = 0; i < count; ++i) b.emplace_back(uniform_index(rng, n), uniform_index(rng, n));
  return b;
}

// Central differences of the full model loss against backward().
void check_model_gradient(LayerType type, std::uint64_t seed) {
  Rng rng(seed);
  const auto g = random_graph(9, 0.25, rng);
  const auto ops = GraphOps::from(g);
  const Matrix x = random_matrix(g.size(), 7, rng);
  auto params = init_params(type, {7, 6, 6, 4}, rng);
  for (Matrix* m : params.tensors())
    for (double& v : m->data()) v += uniform(rng, -0.05, 0.05);  // nonzero biases too
  const auto batch = random_batch(g.size(), 12, rng);
  const double t = 0.1;
  const auto analytic = backward(params, x, ops, batch, t);
  EXPECT_NEAR(analytic.loss, linkpred_loss(forward(params, x, ops), batch, t), 1e-12);

  const double h = 1e-5;
  auto ps = params.tensors();
  const auto gs = analytic.grads.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    std::vector<double> numeric(ps[k]->data().size());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double& w = ps[k]->data()[i];
      const double saved = w;
      w = saved + h;
      const double up = linkpred_loss(forward(params, x, ops), batch, t);
      w = saved - h;
      const double down = linkpred_loss(forward(params, x, ops), batch, t);
      w = saved;
      numeric[i] = (up - down) / (2 * h);
    }
    EXPECT_LT(relative_error(gs[k]->data(), numeric), 1e-5) << to_string(type) << " tensor " << k;
  }
}

}  // namespace

TEST(NormAdjacency, MatchesDenseConstruction) {
  Rng rng(1);
  for (int trial = 0; trial < 25; ++trial) {
    const auto g = random_graph(1 + uniform_index(rng, 25), 0.15, rng, trial % 2 == 0);
    const auto a = normalize_adjacency(g);
    EXPECT_LT(max_abs_diff(a.dense(), dense_norm_adjacency(g)), 1e-15);
    const Matrix h = random_matrix(g.size(), 3, rng);
    EXPECT_LT(max_abs_diff(a.apply(h), naive_matmul(dense_norm_adjacency(g), h)), 1e-12);
  }
}

TEST(NormAdjacency, IsSymmetricWithUnitSelfWeightOnIsolatedNodes) {
  DomainGraph g;
  for (std::size_t i = 0; i < 3; ++i) g.nodes.push_back({i, "n" + std::to_string(i), PageKind::page, {}});
  g.edges = {{0, 1}, {1, 0}};
  const Matrix d = normalize_adjacency(g).dense();
  EXPECT_DOUBLE_EQ(d(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(d(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(d(0, 0), 0.5);
  EXPECT_EQ(d(0, 1), d(1, 0));
}

TEST(Layers, GcnMatchesDenseFormula) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(2 + uniform_index(rng, 20), 0.2, rng);
    const Matrix h = random_matrix(g.size(), 5, rng);
    const Matrix w = random_matrix(5, 4, rng);
    const auto na = normalize_adjacency(g);
    EXPECT_LT(max_abs_diff(gcn_layer(h, na, w, Activation::identity), dense_gcn(g, h, w, false)), 1e-12);
    EXPECT_LT(max_abs_diff(gcn_layer(h, na, w, Activation::relu), dense_gcn(g, h, w, true)), 1e-12);
  }
}

TEST(Layers, SageMatchesDenseFormula) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(2 + uniform_index(rng, 20), 0.2, rng);
    const Matrix h = random_matrix(g.size(), 5, rng);
    const Matrix ws = random_matrix(5, 4, rng), wn = random_matrix(5, 4, rng), b = random_matrix(1, 4, rng);
    const auto nb = neighborhoods(g);
    EXPECT_LT(max_abs_diff(sage_layer(h, nb, ws, wn, b, Activation::identity), dense_sage(g, h, ws, wn, b, false)),
              1e-12);
    EXPECT_LT(max_abs_diff(sage_layer(h, nb, ws, wn, b, Activation::relu), dense_sage(g, h, ws, wn, b, true)), 1e-12);
  }
}

TEST(Layers, MeanTransposeIsTheAdjoint) {
  Rng rng(4);
  const auto g = random_graph(15, 0.2, rng);
  const auto nb = neighborhoods(g);
  const Matrix h = random_matrix(15, 3, rng), d = random_matrix(15, 3, rng);
  // <mean(h), d> == <h, mean^T(d)>
  const Matrix m = nb.mean(h);
  const auto lhs = std::inner_product(m.data().begin(), m.data().end(), d.data().begin(), 0.0);
  const Matrix mt = nb.mean_transpose(d);
  const auto rhs = std::inner_product(h.data().begin(), h.data().end(), mt.data().begin(), 0.0);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Layers, DimensionMismatchThrows) {
  Rng rng(5);
  const auto g = random_graph(4, 0.5, rng);
  const Matrix h = random_matrix(4, 3, rng);
  EXPECT_THROW(gcn_layer(h, normalize_adjacency(g), Matrix(2, 2), Activation::relu), std::invalid_argument);
  EXPECT_THROW(sage_layer(h, neighborhoods(g), Matrix(3, 2), Matrix(3, 3), Matrix(1, 2), Activation::relu),
               std::invalid_argument);
}

TEST(Model, ShapesAndUnitRows) {
  Rng rng(6);
  const auto g = random_graph(30, 0.1, rng);
  const auto ops = GraphOps::from(g);
  const Matrix x = random_matrix(30, 7, rng);
  for (auto type : {LayerType::sage, LayerType::gcn}) {
    const auto p = init_params(type, {7, 128, 128, 64}, rng);
    ASSERT_EQ(p.layers.size(), 3u);
    EXPECT_EQ(p.layers[0].weight.rows(), 7u);
    EXPECT_EQ(p.layers[2].weight.cols(), 64u);
    EXPECT_EQ(p.layers[0].bias.empty(), type == LayerType::gcn);
    const Matrix z = forward(p, x, ops);
    ASSERT_EQ(z.rows(), 30u);
    ASSERT_EQ(z.cols(), 64u);
    for (std::size_t i = 0; i < z.rows(); ++i) EXPECT_NEAR(dot(z.row(i), z.row(i)), 1.0, 1e-12);
  }
}

TEST(Model, GlorotInitStaysInRange) {
  Rng rng(7);
  const auto p = init_params(LayerType::sage, {7, 128, 128, 64}, rng);
  const double limit = std::sqrt(6.0 / (7 + 128));
  for (double v : p.layers[0].weight.data()) EXPECT_LE(std::abs(v), limit);
  for (double v : p.layers[0].bias.data()) EXPECT_EQ(v, 0.0);
}

// Relabeling the nodes relabels the embeddings and nothing else.
TEST(Model, PermutationEquivariance) {
  Rng rng(8);
  const auto g = random_graph(20, 0.15, rng);
  const Matrix x = random_matrix(20, 7, rng);
  std::vector<NodeId> perm(20);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  shuffle(std::span<NodeId>(perm), rng);
  DomainGraph pg = g;
  Matrix px(20, 7);
  for (NodeId i = 0; i < 20; ++i) {
    pg.nodes[perm[i]] = g.nodes[i];
    pg.nodes[perm[i]].id = perm[i];
    for (std::size_t j = 0; j < 7; ++j) px(perm[i], j) = x(i, j);
  }
  for (auto& [s, d] : pg.edges) {
    s = perm[s];
    d = perm[d];
  }
  for (auto type : {LayerType::sage, LayerType::gcn}) {
    const auto p = init_params(type, {7, 16, 16, 8}, rng);
    const Matrix z = forward(p, x, GraphOps::from(g));
    const Matrix pz = forward(p, px, GraphOps::from(pg));
    for (NodeId i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(pz(perm[i], j), z(i, j), 1e-12);
  }
}

TEST(Model, ZeroFeaturesStayFinite) {
  Rng rng(9);
  const auto g = random_graph(10, 0.3, rng);
  const auto ops = GraphOps::from(g);
  const Matrix x(10, 7);
  for (auto type : {LayerType::sage, LayerType::gcn}) {
    const auto p = init_params(type, {7, 8, 8, 4}, rng);
    const Matrix z = forward(p, x, ops);
    EXPECT_TRUE(z.all_finite());
    const std::vector<Edge> batch = {{0, 1}, {2, 3}};
    const auto gr = backward(p, x, ops, batch, 0.1);
    EXPECT_TRUE(std::isfinite(gr.loss));
    for (const Matrix* m : gr.grads.tensors()) EXPECT_TRUE(m->all_finite());
    // All-zero embeddings leave the softmax uniform.
    if (type == LayerType::gcn) EXPECT_NEAR(gr.loss, std::log(10.0), 1e-12);
  }
}

TEST(Loss, MatchesReferenceAndIsNonNegative) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 30);
    const Matrix z = normalize_rows(random_matrix(n, 6, rng));
    const auto batch = random_batch(n, 1 + uniform_index(rng, 40), rng);
    const double l = linkpred_loss(z, batch, 0.1);
    EXPECT_NEAR(l, reference_loss(z, batch, 0.1), 1e-10);
    EXPECT_GE(l, 0.0);
  }
  EXPECT_THROW(linkpred_loss(Matrix(3, 2), {}, 0.1), std::invalid_argument);
  EXPECT_THROW(linkpred_loss(Matrix(3, 2), {{0, 3}}, 0.1), std::out_of_range);
}

TEST(Loss, EmbeddingGradientMatchesFiniteDifferences) {
  Rng rng(11);
  const std::size_t n = 12;
  Matrix z = random_matrix(n, 5, rng);
  const auto batch = random_batch(n, 20, rng);
  const auto analytic = linkpred_loss_and_grad(z, batch, 0.1, true).d_embeddings;
  std::vector<double> numeric(z.data().size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double saved = z.data()[i];
    z.data()[i] = saved + h;
    const double up = linkpred_loss(z, batch, 0.1);
    z.data()[i] = saved - h;
    const double down = linkpred_loss(z, batch, 0.1);
    z.data()[i] = saved;
    numeric[i] = (up - down) / (2 * h);
  }
  EXPECT_LT(relative_error(analytic.data(), numeric), 1e-5);
}

TEST(Backward, SageGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {21u, 22u, 23u}) check_model_gradient(LayerType::sage, seed);
}

TEST(Backward, GcnGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {31u, 32u, 33u}) check_model_gradient(LayerType::gcn, seed);
}
