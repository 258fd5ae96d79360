#include <gtest/gtest.h>

#include <cmath>

#include "gseg/graph_relation.hpp"
#include "gseg/ops.hpp"
#include "gseg/rng.hpp"
#include "oracles.hpp"

using namespace gseg;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor nodes_from(const oracle::Matrix& m) {
  return Tensor::from_data({m.size(), m[0].size()}, oracle::flatten(m));
}

oracle::Matrix as_matrix(const Tensor& t) { return oracle::to_matrix(values(t), t.dim(0), t.dim(1)); }

Tensor random_nodes(std::size_t K, std::size_t D, std::uint64_t seed) {
  Rng rng(seed);
  return uniform_tensor({K, D}, -1.0, 1.0, rng);
}

RelationMatrix fixed_relation(std::vector<double> v) {
  const auto K = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(v.size()))));
  return RelationMatrix{Tensor::from_data({K, K}, std::move(v)), RelationVariant::cosine, std::nullopt, {}};
}

}  // namespace

TEST(RelationCosine, IdenticalRowsAreFullySimilar) {
  auto r = relation_cosine(nodes_from({{0.3, -2.0, 1.0}, {0.3, -2.0, 1.0}}));
  for (double v : r.values.data()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(RelationCosine, OrthogonalRows) {
  auto r = relation_cosine(nodes_from({{1, 0}, {0, 1}}));
  EXPECT_EQ(values(r.values), (std::vector<double>{1, 0, 0, 1}));
}

TEST(RelationCosine, MatchesPairwiseLoop) {
  Tensor x = random_nodes(3, 5, 1);
  EXPECT_EQ(values(relation_cosine(x).values), oracle::flatten(oracle::cosine(as_matrix(x))));
}

TEST(RelationCosine, ZeroRowConvention) {
  auto r = relation_cosine(nodes_from({{0, 0}, {1, 2}, {-1, 0.5}}));
  EXPECT_EQ(r.values[0], 1.0);
  EXPECT_EQ(r.values[1], 0.0);
  EXPECT_EQ(r.values[2], 0.0);
  EXPECT_EQ(r.values[3], 0.0);
  EXPECT_EQ(r.values[6], 0.0);
  EXPECT_EQ(r.values[4], 1.0);
}

TEST(RelationSoftmax, SingleNode) {
  EXPECT_EQ(values(relation_softmax(nodes_from({{0.7, -0.2}})).values), (std::vector<double>{1}));
}

TEST(RelationSoftmax, IdenticalRowsSplitEvenly) {
  auto r = relation_softmax(nodes_from({{0.4, 1.0}, {0.4, 1.0}}));
  EXPECT_EQ(values(r.values), (std::vector<double>{0.5, 0.5, 0.5, 0.5}));
}

TEST(RelationSoftmax, EqualsComposedTensorOps) {
  Tensor x = random_nodes(3, 4, 2);
  EXPECT_EQ(values(relation_softmax(x).values), values(softmax_rows(matmul(x, transpose(x)))));
  // And agrees with an independent loop implementation to rounding.
  auto ref = oracle::softmax_rows(oracle::matmul(as_matrix(x), oracle::transpose(as_matrix(x))));
  auto got = values(relation_softmax(x).values);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], oracle::flatten(ref)[i], 1e-15);
}

TEST(MakeTheta, HandArithmetic) {
  Tensor r = Tensor::from_data({2, 2}, {1, 0.1, 0.1, 1});
  EXPECT_DOUBLE_EQ(make_theta(r, 1.0), 0.55);
  EXPECT_DOUBLE_EQ(make_theta(r), 0.1375);
}

TEST(MakeTheta, DefaultCoefficientIsQuarter) {
  EXPECT_EQ(GraphConfig{}.theta_coefficient, 0.25);
  Tensor r = Tensor::from_data({2, 2}, {0.2, 0.6, 1.0, 0.2});
  EXPECT_DOUBLE_EQ(make_theta(r), 0.25 * 0.5);
}

TEST(MakeTheta, UniformMatrixKeepsEveryEdge) {
  for (double c : {1.0, 0.5, 0.25, 0.125}) {
    Tensor r = Tensor::full({4, 4}, 0.25);
    auto s = sparsify(fixed_relation(values(r)), make_theta(r, c));
    // Strict comparison: at c = 1 theta equals every entry, so nothing survives.
    EXPECT_EQ(s.kept_edges(), c < 1.0 ? 16u : 0u);
    EXPECT_LE(make_theta(r, c), 0.25);
  }
}

TEST(Sparsify, QuarterMeanThresholdDropsOffDiagonal) {
  auto rel = fixed_relation({1, 0.1, 0.1, 1});
  auto s = sparsify(rel, 0.1375);
  EXPECT_EQ(values(s.values), (std::vector<double>{1, 0, 0, 1}));
  ASSERT_TRUE(s.mask.has_value());
  EXPECT_EQ(*s.mask, (std::vector<std::uint8_t>{1, 0, 0, 1}));
  EXPECT_EQ(s.theta(), 0.1375);
}

TEST(Sparsify, BelowMinimumIsNoOpAndAtMaximumClearsAll) {
  auto rel = fixed_relation({0.3, -0.2, 0.9, 0.4});
  EXPECT_EQ(values(sparsify(rel, -0.21).values), values(rel.values));
  {
    const Tensor held = sparsify(rel, 0.9).values;
    for (double v : held.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Sparsify, MaskMatchesStrictComparison) {
  Tensor x = random_nodes(6, 3, 3);
  auto rel = relation_cosine(x);
  const double theta = make_theta(rel.values);
  auto s = sparsify(rel, theta);
  for (std::size_t e = 0; e < 36; ++e) {
    EXPECT_EQ((*s.mask)[e] == 1, rel.values[e] > theta);
    EXPECT_EQ(s.values[e], rel.values[e] > theta ? rel.values[e] : 0.0);
  }
}

TEST(Sparsify, MaskIsStopGradient) {
  Rng rng(4);
  Tensor x = uniform_tensor({4, 3}, -1, 1, rng, true);
  auto rel = relation_softmax(x);
  auto s = sparsify(rel, make_theta(rel.values, 1.0));
  Tensor probe = uniform_tensor({4, 4}, -1, 1, rng);
  sum(hadamard(s.values, probe)).backward();
  // Same gradient as weighting the unmasked relation by probe * mask.
  Tensor y = Tensor::from_data({4, 3}, values(x), true);
  std::vector<double> masked(16);
  for (std::size_t e = 0; e < 16; ++e) masked[e] = (*s.mask)[e] ? probe[e] : 0.0;
  sum(hadamard(relation_softmax(y).values, Tensor::from_data({4, 4}, masked))).backward();
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(x.grad()[i], y.grad()[i]);
}

TEST(NodeUpdate, IdentityRelationLeavesNodesUnchanged) {
  Tensor x = random_nodes(3, 4, 5);
  auto eye = sparsify(fixed_relation({1, 0, 0, 0, 1, 0, 0, 0, 1}), 0.5);
  EXPECT_EQ(values(node_update_sparse(eye, x)), values(x));
  EXPECT_EQ(values(node_update_dense(eye, x)), values(x));
}

TEST(NodeUpdate, FullyMaskedGivesZero) {
  Tensor x = random_nodes(3, 4, 6);
  auto rel = sparsify(relation_softmax(x), 2.0);
  {
    const Tensor held = node_update_sparse(rel, x);
    for (double v : held.data()) EXPECT_EQ(v, 0.0);
  }
  {
    const Tensor held = node_update_dense(rel, x);
    for (double v : held.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(NodeUpdate, SparseEqualsDenseMaskedMatmulExactly) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (auto variant : {RelationVariant::softmax, RelationVariant::cosine}) {
      Tensor x = random_nodes(2 + seed % 9, 1 + seed % 7, seed + 100);
      auto rel = build_relation(x, variant);
      auto s = sparsify(rel, make_theta(rel.values, 0.125 * static_cast<double>(seed % 5 + 1)));
      EXPECT_EQ(values(node_update_sparse(s, x)), values(node_update_dense(s, x)));
      // Independent loop oracle on the masked matrix.
      auto ref = oracle::matmul(as_matrix(s.values), as_matrix(x));
      EXPECT_EQ(values(node_update_sparse(s, x)), oracle::flatten(ref));
    }
  }
}

TEST(NodeUpdate, Linearity) {
  Tensor x = random_nodes(5, 3, 7), y = random_nodes(5, 3, 8);
  auto s = sparsify(relation_softmax(x), make_theta(relation_softmax(x).values));
  const double a = 0.7, b = -1.3;
  auto lhs = values(node_update(s, add(scale(x, a), scale(y, b))));
  auto ux = values(node_update(s, x)), uy = values(node_update(s, y));
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], a * ux[i] + b * uy[i], 1e-10);
}

TEST(NodeUpdate, DimensionMismatchThrows) {
  auto rel = relation_softmax(random_nodes(3, 2, 9));
  EXPECT_THROW(node_update(rel, random_nodes(4, 2, 10)), ShapeError);
}

TEST(GraphConv, IdentityAndZeroWeights) {
  Tensor x = random_nodes(4, 3, 11);
  EXPECT_EQ(values(graph_conv(x, GraphLayer::identity(3, 0))), values(x));
  {
    const Tensor held = graph_conv(x, GraphLayer{Tensor::zeros({3, 3}), 0});
    for (double v : held.data()) EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(graph_conv(x, GraphLayer::identity(4, 0)), ShapeError);
}

TEST(GraphPipeline, K3D2MatchesHandComposedProducts) {
  Tensor x = random_nodes(3, 2, 12);
  Rng rng(13);
  GraphLayer layer = GraphLayer::random(2, 0, rng, 0.5);
  auto X = as_matrix(x);
  auto R = oracle::cosine(X);
  auto Rm = oracle::threshold(R, 0.25 * oracle::mean(R));
  auto expected = oracle::matmul(oracle::matmul(Rm, X), as_matrix(layer.weight));

  std::vector<GraphLayer> layers{layer};
  Tensor got = run_graph(x, layers, GraphConfig{RelationVariant::cosine, 0.25, true});
  EXPECT_EQ(values(got), oracle::flatten(expected));
}

TEST(RunGraph, OneLayerEqualsManualRound) {
  Tensor x = random_nodes(5, 4, 14);
  Rng rng(15);
  std::vector<GraphLayer> layers{GraphLayer::random(4, 0, rng)};
  GraphConfig config;
  auto rel = relation_softmax(x);
  auto s = sparsify(rel, make_theta(rel.values, config.theta_coefficient));
  Tensor manual = graph_conv(node_update(s, x), layers[0]);
  EXPECT_EQ(values(run_graph(x, layers, config)), values(manual));
}

TEST(RunGraph, TwoLayersEqualTwoChainedRoundsWithRecomputedRelation) {
  Tensor x = random_nodes(6, 3, 16);
  Rng rng(17);
  std::vector<GraphLayer> layers{GraphLayer::random(3, 0, rng), GraphLayer::random(3, 1, rng)};
  for (auto variant : {RelationVariant::softmax, RelationVariant::cosine}) {
    GraphConfig config{variant, 0.25, true};
    Tensor once = graph_round(x, layers[0], config);
    Tensor twice = graph_round(once, layers[1], config);
    EXPECT_EQ(values(run_graph(x, layers, config)), values(twice));
  }
}

TEST(RunGraph, IdentityWeightsAndLowThresholdGiveRelSquared) {
  // Softmax entries are positive, so c = 0 keeps every edge.
  Tensor x = scale(random_nodes(4, 2, 18), 0.3);
  std::vector<GraphLayer> layers{GraphLayer::identity(2, 0), GraphLayer::identity(2, 1)};
  GraphConfig config{RelationVariant::softmax, 0.0, true};
  Tensor r1 = relation_softmax(x).values;
  Tensor x1 = matmul(r1, x);
  Tensor r2 = relation_softmax(x1).values;
  Tensor expected = matmul(r2, x1);
  EXPECT_EQ(values(run_graph(x, layers, config)), values(expected));
}

TEST(RunGraph, IdentityWeightsWithFixedRelationIsRelTimesRelTimesX) {
  // Orthogonal unit rows have cosine relation I at every round, so output = I I X = X.
  Tensor x = nodes_from({{1, 0, 0}, {0, 2, 0}, {0, 0, -3}});
  std::vector<GraphLayer> layers{GraphLayer::identity(3, 0), GraphLayer::identity(3, 1)};
  GraphConfig config{RelationVariant::cosine, -10.0, true};
  EXPECT_EQ(values(run_graph(x, layers, config)), values(x));
}

TEST(RunGraph, ZeroDepthRejected) {
  std::vector<GraphLayer> none;
  EXPECT_THROW(run_graph(random_nodes(2, 2, 19), none, GraphConfig{}), std::invalid_argument);
}

TEST(RunGraph, BatchedGraphsEqualIndependentGraphs) {
  Rng rng(20);
  Tensor batch = uniform_tensor({3, 4, 2}, -1, 1, rng);
  std::vector<GraphLayer> layers{GraphLayer::random(2, 0, rng)};
  GraphConfig config;
  auto out = values(run_graph(batch, layers, config));
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<double> slice(batch.data().begin() + b * 8, batch.data().begin() + (b + 1) * 8);
    auto single = values(run_graph(Tensor::from_data({4, 2}, slice), layers, config));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(out[b * 8 + i], single[i]);
  }
}

TEST(RelationProperties, RandomizedInvariants) {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = 1 + rng.below(10), D = 1 + rng.below(6);
    Tensor x = uniform_tensor({K, D}, -2, 2, rng);
    auto c = relation_cosine(x);
    auto s = relation_softmax(x);
    for (std::size_t i = 0; i < K; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        EXPECT_EQ(c.values[i * K + j], c.values[j * K + i]);
        EXPECT_LE(std::abs(c.values[i * K + j]), 1.0);
        row += s.values[i * K + j];
      }
      EXPECT_EQ(c.values[i * K + i], 1.0);
      EXPECT_NEAR(row, 1.0, 1e-9);
    }
    const double t1 = rng.uniform(-1, 1), t2 = rng.uniform(-1, 1);
    auto a = sparsify(c, std::min(t1, t2));
    auto b = sparsify(c, std::max(t1, t2));
    EXPECT_GE(a.kept_edges(), b.kept_edges());
    EXPECT_EQ(values(sparsify(a, std::min(t1, t2)).values), values(a.values));
  }
}
