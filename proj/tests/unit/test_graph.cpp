#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ckl/error.hpp"
#include "ckl/graph.hpp"
#include "test_util.hpp"

using namespace ckl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ckl_test_graph_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path minimal_fixture(const std::string& name) {
  const fs::path dir = scratch_dir(name);
  write_file(dir / "T_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n");
  write_file(dir / "T_graph_indicator.txt", "1\n1\n2\n2\n");
  write_file(dir / "T_graph_labels.txt", "1\n2\n");
  return dir;
}

Graph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return Graph(n, e, Tensor(n, 1, 1.0));
}

Graph clique(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.push_back({i, j});
  return Graph(n, e, Tensor(n, 1, 1.0));
}

Dataset wrap(std::vector<Graph> graphs) {
  Dataset ds;
  ds.name = "fixture";
  ds.num_classes = 1;
  ds.feature_dim = 1;
  for (auto& g : graphs) ds.graphs.push_back(g.with_class_label(0));
  return ds;
}

}  // namespace

TEST(Graph, CanonicalizesAndDeduplicatesEdges) {
  const Graph g(3, {{1, 0}, {0, 1}, {2, 1}}, Tensor(3, 1));
  ASSERT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(g.edges()[1], (Edge{1, 2}));
  EXPECT_EQ(g.adjacency()[1], (std::vector<std::size_t>{0, 2}));
}

TEST(Graph, RejectsSelfLoopsAndOutOfRangeEndpoints) {
  EXPECT_THROW(Graph(2, {{1, 1}}, Tensor(2, 1)), DomainError);
  EXPECT_THROW(Graph(2, {{0, 2}}, Tensor(2, 1)), DomainError);
  EXPECT_THROW(Graph(2, {}, Tensor(3, 1)), DomainError);
}

TEST(TuLoader, MinimalFixture) {
  const Dataset ds = load_tu_dataset(minimal_fixture("minimal"), "T");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.num_classes, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ds.graphs[i].num_nodes(), 2u);
    EXPECT_EQ(ds.graphs[i].num_edges(), 1u);
    EXPECT_EQ(*ds.graphs[i].class_label(), static_cast<int>(i));
    EXPECT_EQ(ds.graphs[i].node_features(), Tensor(2, 1, 1.0));  // constant feature fallback
  }
}

TEST(TuLoader, NodeLabelsBecomeOneHotFeatures) {
  const fs::path dir = minimal_fixture("onehot");
  write_file(dir / "T_node_labels.txt", "0\n1\n0\n1\n");
  const Dataset ds = load_tu_dataset(dir, "T");
  EXPECT_EQ(ds.feature_dim, 2u);
  EXPECT_EQ(ds.graphs[0].node_features(), Tensor::from_rows({{1, 0}, {0, 1}}));
  EXPECT_EQ(ds.graphs[1].node_features(), Tensor::from_rows({{1, 0}, {0, 1}}));
}

TEST(TuLoader, MiniatureFixtureMatchesHandCountedManifest) {
  const fs::path dir = fs::path(CKL_TEST_DATA_DIR) / "mini12";
  const Dataset ds = load_tu_dataset(dir, "MINI");
  std::ifstream manifest(dir / "MANIFEST.txt");
  std::string line;
  std::size_t rows = 0, total_nodes = 0, total_edges = 0;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t id, nodes, edges;
    int cls;
    ls >> id >> nodes >> edges >> cls;
    ASSERT_LE(id, ds.size());
    const Graph& g = ds.graphs[id - 1];
    EXPECT_EQ(g.num_nodes(), nodes) << "graph " << id;
    EXPECT_EQ(g.num_edges(), edges) << "graph " << id;
    EXPECT_EQ(*g.class_label(), cls) << "graph " << id;
    total_nodes += nodes;
    total_edges += edges;
    ++rows;
  }
  EXPECT_EQ(rows, 12u);
  EXPECT_EQ(ds.size(), 12u);
  EXPECT_EQ(total_nodes, 43u);
  EXPECT_EQ(total_edges, 38u);
  EXPECT_EQ(ds.num_classes, 3);
  EXPECT_EQ(ds.feature_dim, 3u);
}

TEST(TuLoader, MissingMandatoryFileIsNamed) {
  const fs::path dir = minimal_fixture("missing");
  fs::remove(dir / "T_graph_labels.txt");
  try {
    load_tu_dataset(dir, "T");
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("T_graph_labels.txt"), std::string::npos) << e.what();
  }
}

TEST(TuLoader, OutOfRangeNodeReportsLine) {
  const fs::path dir = minimal_fixture("range");
  write_file(dir / "T_A.txt", "1, 2\n2, 1\n3, 9\n");
  try {
    load_tu_dataset(dir, "T");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(e.file().find("T_A.txt"), std::string::npos);
  }
}

TEST(TuLoader, InconsistentAttributeArityReportsLine) {
  const fs::path dir = minimal_fixture("arity");
  write_file(dir / "T_node_attributes.txt", "0.5, 1\n1, 2\n3\n4, 5\n");
  try {
    load_tu_dataset(dir, "T");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(TuLoader, LoadSaveLoadRoundTrips) {
  const Dataset a = load_tu_dataset(fs::path(CKL_TEST_DATA_DIR) / "mini12", "MINI");
  const fs::path dir = scratch_dir("roundtrip");
  save_tu_dataset(a, dir);
  const Dataset b = load_tu_dataset(dir, a.name);
  EXPECT_EQ(a.graphs, b.graphs);
  EXPECT_EQ(a.num_classes, b.num_classes);
  EXPECT_EQ(a.feature_dim, b.feature_dim);
}

TEST(TuLoader, RoundTripPropertyOnRandomGraphs) {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Dataset ds;
    ds.name = "R";
    ds.num_classes = 3;
    ds.feature_dim = 2;
    for (int i = 0; i < 6; ++i) {
      const std::size_t n = 1 + rng.below(7);
      ds.graphs.push_back(test_util::random_graph(n, 0.4, 2, rng).with_class_label(static_cast<int>(i % 3)));
    }
    const fs::path dir = scratch_dir("prop" + std::to_string(trial));
    save_tu_dataset(ds, dir);
    EXPECT_EQ(load_tu_dataset(dir, "R").graphs, ds.graphs) << "trial " << trial;
  }
}

TEST(DensityPartition, EightGraphsIntoFourPairs) {
  std::vector<Graph> gs;
  for (std::size_t n = 2; n < 10; ++n) gs.push_back(path_graph(n));
  const auto parts = edge_density_partition(wrap(gs), 4);
  ASSERT_EQ(parts.size(), 4u);
  double prev_max = -1.0;
  for (const Dataset& p : parts) {
    EXPECT_EQ(p.size(), 2u);
    double lo = 2.0, hi = -1.0;
    for (const Graph& g : p.graphs) {
      lo = std::min(lo, g.density());
      hi = std::max(hi, g.density());
    }
    EXPECT_LE(prev_max, lo);
    prev_max = hi;
  }
}

TEST(DensityPartition, IdenticalGraphsKeepOriginalOrder) {
  const auto buckets = edge_density_buckets(wrap({clique(3), clique(3), clique(3), clique(3)}), 4);
  EXPECT_EQ(buckets, (std::vector<std::vector<std::size_t>>{{0}, {1}, {2}, {3}}));
}

TEST(DensityPartition, PathCliqueFixtureMatchesHandRanking) {
  // Densities by hand: P4 3/6=0.5, K4 1, P3 2/3, K3 1, P5 4/10=0.4, K2 1, P6 5/15=1/3, K1 0.
  const Dataset ds = wrap({path_graph(4), clique(4), path_graph(3), clique(3), path_graph(5), clique(2),
                           path_graph(6), clique(1)});
  // Ascending: K1(7) P6(6) P5(4) P4(0) P3(2) K4(1) K3(3) K2(5), cut into 3,3,2.
  const auto buckets = edge_density_buckets(ds, 3);
  EXPECT_EQ(buckets, (std::vector<std::vector<std::size_t>>{{7, 6, 4}, {0, 2, 1}, {3, 5}}));
  const auto parts = edge_density_partition(ds, 3);
  EXPECT_EQ(parts[0].name, "fixture_d0");
  EXPECT_EQ(parts[2].graphs[1], ds.graphs[5]);
}

TEST(DensityPartition, UnionIsInputMultiset) {
  Rng rng(9);
  std::vector<Graph> gs;
  for (int i = 0; i < 23; ++i) gs.push_back(test_util::random_graph(2 + rng.below(6), rng.uniform(0, 1), 1, rng));
  const Dataset ds = wrap(gs);
  const auto buckets = edge_density_buckets(ds, 4);
  std::vector<std::size_t> all;
  for (const auto& b : buckets) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(buckets.front().size(), 6u);
  EXPECT_EQ(buckets.back().size(), 5u);
}

TEST(DensityPartition, MoreBucketsThanGraphsIsAnError) {
  EXPECT_THROW(edge_density_partition(wrap({clique(2), clique(3)}), 4), DomainError);
}

TEST(PlantedMotif, PositiveGraphContainsTriangleOnMotifNodes) {
  const Dataset ds = generate_planted_motif_dataset({MotifKind::triangle}, {MotifKind::star}, 1, 0);
  ASSERT_EQ(ds.size(), 2u);
  const Graph& pos = ds.graphs[0];
  EXPECT_EQ(*pos.class_label(), 1);
  const auto& m = ds.motifs[0].nodes;
  ASSERT_EQ(m.size(), 3u);
  auto has = [&](std::size_t a, std::size_t b) {
    return std::binary_search(pos.edges().begin(), pos.edges().end(), Edge{std::min(a, b), std::max(a, b)});
  };
  EXPECT_TRUE(has(m[0], m[1]) && has(m[1], m[2]) && has(m[0], m[2]));
}

TEST(PlantedMotif, EmptyBackgroundLeavesIsolatedNodes) {
  const MotifSpec tri{MotifKind::triangle, 6, 0.0, 0.0}, star{MotifKind::star, 6, 0.0, 0.0};
  const Dataset ds = generate_planted_motif_dataset(tri, star, 3, 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Graph& g = ds.graphs[i];
    EXPECT_EQ(g.num_edges(), i % 2 == 0 ? 3u : 4u);
    EXPECT_EQ(ds.motifs[i].edges, g.edges());
    std::size_t isolated = 0;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) isolated += g.degree(v) == 0 ? 1 : 0;
    EXPECT_EQ(isolated, 6u);
  }
}

TEST(PlantedMotif, DegreeHistogramMatchesIndependentRegeneration) {
  const MotifSpec tri{MotifKind::triangle}, star{MotifKind::star};
  auto histogram = [](const Dataset& ds) {
    std::map<std::size_t, std::size_t> h;
    for (const Graph& g : ds.graphs)
      for (std::size_t v = 0; v < g.num_nodes(); ++v) ++h[g.degree(v)];
    return h;
  };
  const auto reference = histogram(generate_planted_motif_dataset(tri, star, 50, 7));
  const auto again = histogram(generate_planted_motif_dataset(tri, star, 50, 7));
  EXPECT_EQ(reference, again);
  EXPECT_NE(reference, histogram(generate_planted_motif_dataset(tri, star, 50, 8)));
}

TEST(PlantedMotif, SerializationIsByteIdenticalAcrossRuns) {
  const MotifSpec house{MotifKind::house, 10, 0.2, 0.1}, star{MotifKind::star, 10, 0.2, 0.1};
  const fs::path a = scratch_dir("gen_a"), b = scratch_dir("gen_b");
  save_tu_dataset(generate_planted_motif_dataset(house, star, 5, 3), a);
  save_tu_dataset(generate_planted_motif_dataset(house, star, 5, 3), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
    ++files;
  }
  EXPECT_GE(files, 4u);
}

TEST(PlantedMotif, IdenticalKindsRejected) {
  EXPECT_THROW(generate_planted_motif_dataset({MotifKind::star}, {MotifKind::star}, 2, 0), DomainError);
}

TEST(PlantedMotif, MotifTruthSurvivesSaveAndLoad) {
  const Dataset ds = generate_planted_motif_dataset({MotifKind::house}, {MotifKind::triangle}, 4, 12);
  const fs::path dir = scratch_dir("motif_truth");
  save_tu_dataset(ds, dir);
  const Dataset back = load_tu_dataset(dir, ds.name);
  ASSERT_EQ(back.motifs.size(), ds.motifs.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.motifs[i], ds.motifs[i]);
}
