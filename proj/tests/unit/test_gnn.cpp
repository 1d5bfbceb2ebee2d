#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ckl/error.hpp"
#include "ckl/gnn.hpp"
#include "test_util.hpp"

using namespace ckl;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using test_util::random_graph;
using test_util::random_tensor;

namespace {

// Plain-loop GIN-0 forward used as an oracle for the taped implementation.
std::vector<std::vector<double>> oracle_mlp(const gnn::Mlp& mlp, std::vector<std::vector<double>> x) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const gnn::Linear& lin = mlp.layers[l];
    std::vector<std::vector<double>> y(x.size(), std::vector<double>(lin.out_dim()));
    for (std::size_t r = 0; r < x.size(); ++r)
      for (std::size_t o = 0; o < lin.out_dim(); ++o) {
        double s = lin.bias(0, o);
        for (std::size_t i = 0; i < lin.in_dim(); ++i) s += x[r][i] * lin.weight(i, o);
        const bool relu = l + 1 < mlp.layers.size() || mlp.relu_output;
        y[r][o] = relu ? std::max(0.0, s) : s;
      }
    x = std::move(y);
  }
  return x;
}

std::vector<std::vector<double>> oracle_encode(const Graph& g, const gnn::EncoderParams& enc) {
  std::vector<std::vector<double>> h(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    for (std::size_t c = 0; c < g.feature_dim(); ++c) h[v].push_back(g.node_features()(v, c));
  for (const gnn::GinLayer& layer : enc.layers) {
    std::vector<std::vector<double>> agg = h;
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
      for (std::size_t u : g.adjacency()[v])
        for (std::size_t c = 0; c < h[u].size(); ++c) agg[v][c] += h[u][c];
    h = oracle_mlp(layer.mlp, agg);
  }
  return h;
}

gnn::ClassifierParams zero_classifier(std::size_t h, std::size_t c) {
  gnn::ClassifierParams clf;
  clf.mlp.layers = {gnn::Linear::zeros(h, h), gnn::Linear::zeros(h, c)};
  return clf;
}

}  // namespace

TEST(GinLayer, TwoNodePathSumsSelfAndNeighbor) {
  const Graph g(2, {{0, 1}}, Tensor::column({1, 3}));
  Tape tape;
  const gnn::GinLayer layer{gnn::Mlp::identity(1), 0.0};
  const Var out = gnn::gin_layer_forward(tape, tape.constant(g.node_features()), g, layer);
  EXPECT_EQ(out.value(), Tensor::column({4, 4}));
}

TEST(GinLayer, IsolatedNodeKeepsItsRow) {
  const Graph g(1, {}, Tensor::row({0.5, -2.0, 3.0}));
  Tape tape;
  const Var out = gnn::gin_layer_forward(tape, tape.constant(g.node_features()), g, {gnn::Mlp::identity(3, 1), 0.0});
  EXPECT_EQ(out.value(), g.node_features());
}

TEST(GinLayer, AllOnesMasksAreBitwiseIdentity) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_graph(6, 0.5, 3, rng);
    const auto enc = gnn::EncoderParams::init(3, 5, 2, rng);
    Tape tape;
    const Tensor plain = gnn::encode_nodes(tape, g, enc).value();
    const gnn::Masks ones{tape.constant(Tensor(6, 1, 1.0)), tape.constant(Tensor(g.num_edges(), 1, 1.0))};
    const Tensor masked = gnn::encode_nodes(tape, g, enc, ones).value();
    EXPECT_EQ(masked, plain);
  }
}

TEST(GinLayer, DimensionMismatchIsShapeError) {
  const Graph g(2, {{0, 1}}, Tensor(2, 3));
  Tape tape;
  EXPECT_THROW(gnn::gin_layer_forward(tape, tape.constant(Tensor(2, 3)), g, {gnn::Mlp::identity(2), 0.0}),
               ShapeError);
}

TEST(GinLayer, MatchesPlainLoopOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(1 + rng.below(9), 0.35, 3, rng);
    const auto enc = gnn::EncoderParams::init(3, 6, 1 + rng.below(3), rng);
    Tape tape;
    const Tensor got = gnn::encode_nodes(tape, g, enc).value();
    const auto want = oracle_encode(g, enc);
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
      for (std::size_t c = 0; c < got.cols(); ++c) EXPECT_NEAR(got(v, c), want[v][c], 1e-12);
  }
}

TEST(GinLayer, MasksScaleNodesAndMessages) {
  // Path 0-1-2 with unit features, identity MLP: h'_1 = m_1 + m_e01 m_0 + m_e12 m_2.
  const Graph g(3, {{0, 1}, {1, 2}}, Tensor(3, 1, 1.0));
  Tape tape;
  const gnn::Masks masks{tape.constant(Tensor::column({0.5, 1.0, 0.25})), tape.constant(Tensor::column({0.2, 1.0}))};
  const Var out = gnn::gin_layer_forward(tape, tape.constant(g.node_features()), g, {gnn::Mlp::identity(1), 0.0}, masks);
  EXPECT_NEAR(out.value()(1, 0), 1.0 + 0.2 * 0.5 + 1.0 * 0.25, 1e-15);
  EXPECT_NEAR(out.value()(0, 0), 0.5 + 0.2 * 1.0, 1e-15);
}

TEST(Readout, SumsRows) {
  Tape tape;
  EXPECT_EQ(gnn::readout(tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}))).value(), Tensor::row({4, 6}));
  EXPECT_EQ(gnn::readout(tape.constant(Tensor::row({7, 8}))).value(), Tensor::row({7, 8}));
  EXPECT_EQ(gnn::readout(tape.constant(Tensor::from_rows({{1, 2}, {3, 4}})), tape.constant(Tensor::column({0, 1})))
                .value(),
            Tensor::row({3, 4}));
}

TEST(Classify, ZeroWeightsGiveUniform) {
  Tape tape;
  const Var p = gnn::classify(tape, tape.constant(Tensor::row({1, 2, 3})), zero_classifier(3, 2));
  EXPECT_EQ(p.value(), Tensor::row({0.5, 0.5}));
}

TEST(Classify, BiasTenMatchesAnalyticSoftmax) {
  auto clf = zero_classifier(2, 2);
  clf.mlp.layers[1].bias = Tensor::row({10, 0});
  Tape tape;
  const Var p = gnn::classify(tape, tape.constant(Tensor::row({1, 1})), clf);
  EXPECT_NEAR(p.value()(0, 0), 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(p.value()(0, 1), std::exp(-10.0) / (1.0 + std::exp(-10.0)), 1e-15);
}

TEST(Classify, OutputIsAValidDistribution) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const auto clf = gnn::ClassifierParams::init(4, 3, rng);
    Tape tape;
    const Tensor p = gnn::classify(tape, tape.constant(random_tensor(1, 4, rng, -50, 50)), clf).value();
    double s = 0.0;
    for (double x : p.values()) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(CrossEntropy, Examples) {
  Tape tape;
  EXPECT_NEAR(gnn::cross_entropy(tape.constant(Tensor::row({1, 0})), 0).value().item(), 0.0, 1e-15);
  EXPECT_NEAR(gnn::cross_entropy(tape.constant(Tensor::row({0.5, 0.5})), 1).value().item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(gnn::cross_entropy(tape.constant(Tensor::row({1, 0})), 1).value().item(), -std::log(1e-12), 1e-9);
  EXPECT_THROW(gnn::cross_entropy(tape.constant(Tensor::row({0.5, 0.5})), 2), DomainError);
}

TEST(Pipeline, PermutationInvariance) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(2 + rng.below(8), 0.4, 2, rng);
    const auto model = gnn::GraphClassifier::init(2, 8, 3, 3, rng);
    const Graph h = g.permuted(rng.permutation(g.num_nodes()));
    const auto a = gnn::predict_proba(g, model), b = gnn::predict_proba(h, model);
    for (std::size_t c = 0; c < a.size(); ++c) EXPECT_NEAR(a[c], b[c], 1e-9);
  }
}

TEST(Pipeline, GinPlusReadoutPassesFiniteDifferences) {
  Rng rng(41);
  const Graph g = random_graph(5, 0.5, 3, rng);
  auto model = gnn::GraphClassifier::init(3, 4, 2, 2, rng);
  const auto params = gnn::parameters(model);
  const auto report = ad::finite_difference_check(
      [&](Tape& t) { return gnn::cross_entropy(gnn::predict(t, g, model), 1); }, params, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Checkpoint, RoundTripsThroughFile) {
  Rng rng(51);
  const auto model = gnn::GraphClassifier::init(3, 7, 3, 4, rng);
  const auto path = std::filesystem::temp_directory_path() / "ckl_test_ckpt.json";
  gnn::save_checkpoint(gnn::to_checkpoint(model), path);
  const gnn::Checkpoint back = gnn::load_checkpoint(path);
  EXPECT_EQ(back, gnn::to_checkpoint(model));
  const auto restored = gnn::classifier_from_checkpoint(back);
  const Graph g = random_graph(6, 0.5, 3, rng);
  EXPECT_EQ(gnn::predict_proba(g, restored), gnn::predict_proba(g, model));
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = std::filesystem::temp_directory_path() / "ckl_test_bad_ckpt.json";
  std::ofstream(path) << R"({"format": "something-else", "version": 1})";
  EXPECT_THROW(gnn::load_checkpoint(path), ParseError);
  EXPECT_THROW(gnn::load_checkpoint(path.string() + ".missing"), LoadError);
}
