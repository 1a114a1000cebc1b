#include "helpers.hpp"

#include <fstream>

using namespace coarsemp;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("geometric graph respects its distance threshold") {
  GeometricConfig cfg;
  cfg.n = 8;
  cfg.threshold = 1.5;  // larger than the unit-square diameter
  Graph complete = random_geometric_graph(cfg);
  CHECK(complete.num_edges() == 28);
  CHECK(complete.features.rows() == 8);
  CHECK(complete.features.cols() == 2);
  CHECK(complete.features.minCoeff() >= 0.0);
  CHECK(complete.features.maxCoeff() < 1.0);

  cfg.threshold = 1e-9;
  CHECK(random_geometric_graph(cfg).num_edges() == 0);

  CHECK_THROWS_WITH(random_geometric_graph({0, 0.1, 0}),
                    Catch::Matchers::ContainsSubstring("positive"));
  CHECK_THROWS_WITH(random_geometric_graph({5, 0.0, 0}),
                    Catch::Matchers::ContainsSubstring("positive"));
}

TEST_CASE("geometric graph is deterministic and plausibly dense") {
  GeometricConfig cfg;
  cfg.n = 1000;
  cfg.threshold = 0.05;
  cfg.seed = 0;
  Graph a = random_geometric_graph(cfg);
  Graph b = random_geometric_graph(cfg);
  CHECK(max_abs_diff(Mat(a.adjacency), Mat(b.adjacency)) == 0.0);
  CHECK(max_abs_diff(a.features, b.features) == 0.0);

  // About C(n,2) * pi * t^2 edges, shrunk a little by the square's boundary.
  CHECK(a.num_edges() > 3000);
  CHECK(a.num_edges() < 4500);

  cfg.seed = 1;
  CHECK(max_abs_diff(random_geometric_graph(cfg).features, a.features) > 0.0);
}

TEST_CASE("planted partition labels, blocks, and splits") {
  PlantedPartitionConfig cfg;
  cfg.n = 30;
  cfg.classes = 3;
  cfg.p_out = 0.0;
  cfg.noise_sigma = 0.0;
  Graph g = planted_partition_graph(cfg);

  for (int i = 0; i < 30; ++i) CHECK(g.labels[static_cast<size_t>(i)] == i % 3);

  // Without cross probability every edge stays inside a class.
  for (int j = 0; j < g.adjacency.outerSize(); ++j)
    for (SpMat::InnerIterator it(g.adjacency, j); it; ++it)
      CHECK(g.labels[static_cast<size_t>(it.row())] == g.labels[static_cast<size_t>(j)]);

  // Noise-free features are exact class indicators.
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(g.features(i, j) == (j == g.labels[static_cast<size_t>(i)] ? 1.0 : 0.0));

  // Ten nodes per class split 1/2/7, disjoint and exhaustive.
  CHECK(g.splits.train.size() == 3);
  CHECK(g.splits.val.size() == 6);
  CHECK(g.splits.test.size() == 21);
  std::vector<int> seen(30, 0);
  for (int i : g.splits.train) ++seen[static_cast<size_t>(i)];
  for (int i : g.splits.val) ++seen[static_cast<size_t>(i)];
  for (int i : g.splits.test) ++seen[static_cast<size_t>(i)];
  for (int i = 0; i < 30; ++i) CHECK(seen[static_cast<size_t>(i)] == 1);
  CHECK(std::is_sorted(g.splits.train.begin(), g.splits.train.end()));

  CHECK_THROWS_WITH(planted_partition_graph({30, 3, 0.01, 0.05, 8, 1.0, 0}),
                    Catch::Matchers::ContainsSubstring("p_in"));
  CHECK_THROWS_WITH(planted_partition_graph({30, 3, 1.2, 0.0, 8, 1.0, 0}),
                    Catch::Matchers::ContainsSubstring("probabilities"));
  CHECK_THROWS_WITH(planted_partition_graph({30, 3, 0.5, 0.0, 2, 1.0, 0}),
                    Catch::Matchers::ContainsSubstring("feature_dim"));
  CHECK_THROWS_WITH(planted_partition_graph({0, 3, 0.5, 0.0, 8, 1.0, 0}),
                    Catch::Matchers::ContainsSubstring("positive"));
}

TEST_CASE("planted partition is essentially connected at default densities") {
  for (uint64_t seed : {0, 1, 2}) {
    PlantedPartitionConfig cfg;
    cfg.n = 300;
    cfg.seed = seed;
    Graph g = planted_partition_graph(cfg);
    Graph pcc = principal_connected_component(g);
    CHECK(pcc.num_nodes() >= 285);
  }
}

TEST_CASE("principal component keeps the largest piece and reindexes") {
  // Triangle 0-1-2 plus the separate edge 3-4.
  Mat X(5, 2);
  X << 10, 0, 11, 0, 12, 0, 13, 0, 14, 0;
  SplitMasks splits;
  splits.train = {0, 3};
  splits.val = {1, 4};
  splits.test = {2};
  Graph g = oracle::edge_graph(5, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}}, X,
                               {0, 1, 2, 0, 1}, splits);
  Graph pcc = principal_connected_component(g);
  REQUIRE(pcc.num_nodes() == 3);
  CHECK(pcc.num_edges() == 3);
  CHECK(pcc.features(0, 0) == 10.0);
  CHECK(pcc.features(2, 0) == 12.0);
  CHECK(pcc.labels == std::vector<int>{0, 1, 2});
  CHECK(pcc.splits.train == std::vector<int>{0});
  CHECK(pcc.splits.val == std::vector<int>{1});
  CHECK(pcc.splits.test == std::vector<int>{2});

  // A connected graph passes through untouched.
  Graph tri = oracle::triangle_graph();
  CHECK(max_abs_diff(Mat(principal_connected_component(tri).adjacency), Mat(tri.adjacency)) == 0.0);

  // Equal sizes keep the component of the smallest node id.
  Graph twin = oracle::edge_graph(4, {{0, 1, 1}, {2, 3, 1}});
  Mat Y(4, 1);
  Y << 5, 6, 7, 8;
  Graph twin_f = oracle::edge_graph(4, {{0, 1, 1}, {2, 3, 1}}, Y);
  Graph kept = principal_connected_component(twin_f);
  REQUIRE(kept.num_nodes() == 2);
  CHECK(kept.features(0, 0) == 5.0);
  CHECK(kept.features(1, 0) == 6.0);
}

TEST_CASE("dataset files round-trip exactly") {
  PlantedPartitionConfig cfg;
  cfg.n = 40;
  cfg.seed = 9;
  Graph g = planted_partition_graph(cfg);

  oracle::TmpDir dir;
  save_dataset(g, dir.path);
  Graph back = load_dataset_dir(dir.path);
  CHECK(max_abs_diff(Mat(back.adjacency), Mat(g.adjacency)) == 0.0);
  CHECK(max_abs_diff(back.features, g.features) == 0.0);
  CHECK(back.labels == g.labels);
  CHECK(back.splits.train == g.splits.train);
  CHECK(back.splits.val == g.splits.val);
  CHECK(back.splits.test == g.splits.test);

  // Optional components stay absent through a round trip.
  Graph bare = oracle::path_graph(4);
  oracle::TmpDir dir2;
  save_dataset(bare, dir2.path);
  Graph bare_back = load_dataset_dir(dir2.path);
  CHECK(bare_back.num_nodes() == 4);
  CHECK_FALSE(bare_back.has_features());
  CHECK_FALSE(bare_back.has_labels());
  CHECK(bare_back.splits.empty());

  // Survives a component extraction in between.
  Graph pcc = principal_connected_component(g);
  oracle::TmpDir dir3;
  save_dataset(pcc, dir3.path);
  Graph pcc_back = load_dataset_dir(dir3.path);
  CHECK(max_abs_diff(Mat(pcc_back.adjacency), Mat(pcc.adjacency)) == 0.0);
  CHECK(pcc_back.labels == pcc.labels);
}

TEST_CASE("edge list parsing accepts comments and default weights") {
  oracle::TmpDir dir;
  std::string path = dir.path + "/edges.tsv";
  write_file(path, "# a comment\n0\t1\n\n1\t2\t2.5\n");
  Graph g = load_dataset(path);
  CHECK(g.num_nodes() == 3);
  CHECK(g.adjacency.coeff(0, 1) == 1.0);
  CHECK(g.adjacency.coeff(2, 1) == 2.5);

  // Duplicate lines accumulate weight.
  write_file(path, "0\t1\n0\t1\n");
  CHECK(load_dataset(path).adjacency.coeff(0, 1) == 2.0);
}

TEST_CASE("loader errors carry file and line positions") {
  oracle::TmpDir dir;
  std::string edges = dir.path + "/edges.tsv";

  write_file(edges, "0\t1\n1\t2\n2\tx\n");
  CHECK_THROWS_WITH(load_dataset(edges), Catch::Matchers::ContainsSubstring("edges.tsv:3"));

  write_file(edges, "4\t4\n");
  CHECK_THROWS_WITH(load_dataset(edges), Catch::Matchers::ContainsSubstring("self-loop on node 4"));

  write_file(edges, "-1\t2\n");
  CHECK_THROWS_WITH(load_dataset(edges), Catch::Matchers::ContainsSubstring("negative node id"));

  write_file(edges, "0\t1\t2.0\t9\n");
  CHECK_THROWS_WITH(load_dataset(edges), Catch::Matchers::ContainsSubstring("too many fields"));

  write_file(edges, "0\t5\n");
  std::string feats = dir.path + "/features.csv";
  write_file(feats, "1,2\n3,4\n5,6\n");
  CHECK_THROWS_WITH(load_dataset(edges, feats),
                    Catch::Matchers::ContainsSubstring("exceeds feature rows"));

  write_file(feats, "1,2\n3\n");
  CHECK_THROWS_WITH(load_dataset(edges, feats),
                    Catch::Matchers::ContainsSubstring("inconsistent column count"));

  std::string labels = dir.path + "/labels.csv";
  write_file(labels, "0\n1\n");
  CHECK_THROWS_WITH(load_dataset(edges, "", labels),
                    Catch::Matchers::ContainsSubstring("exceeds label count"));

  write_file(labels, "0\n1\n0\n1\n0\n1\n0\n1\n");
  CHECK_THROWS_WITH(load_dataset(edges, "", labels),
                    Catch::Matchers::ContainsSubstring("does not match node count"));

  write_file(edges, "0\t1\n");
  std::string splits = dir.path + "/splits.txt";
  write_file(splits, "0\n1\n");
  CHECK_THROWS_WITH(load_dataset(edges, "", "", splits),
                    Catch::Matchers::ContainsSubstring("expected 3 lines"));

  // A named but absent split file only warns.
  Graph g = load_dataset(edges, "", "", dir.path + "/missing_splits.txt");
  CHECK(g.splits.empty());

  CHECK_THROWS_WITH(load_dataset(dir.path + "/nope.tsv"),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("smooth signals are unit seminorm inside the basis span") {
  Rng rng(901);
  Graph g = oracle::random_connected_graph(30, rng);
  SemiNormContext ctx = make_context(build_laplacian(g, LaplacianKind::shifted(0.001)));
  SpectralBasis basis = spectral_subspace(ctx, 4);

  Rng srng(902);
  for (int trial = 0; trial < 10; ++trial) {
    Vec x = random_smooth_signal(basis, srng);
    CHECK(seminorm(x, ctx) == Catch::Approx(1.0).margin(1e-10));
    Vec residual = x - basis.V * (basis.V.transpose() * x);
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
  }

  // The seed overload is deterministic.
  Vec a = random_smooth_signal(basis, uint64_t{7});
  Vec b = random_smooth_signal(basis, uint64_t{7});
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  // A one-dimensional basis pins the signal to the eigenvector's line.
  SpectralBasis one = spectral_subspace(ctx, 1);
  Vec s = random_smooth_signal(one, uint64_t{3});
  double cosine = std::abs(one.V.col(0).dot(s)) / (one.V.col(0).norm() * s.norm());
  CHECK(cosine == Catch::Approx(1.0).margin(1e-12));

  // A kernel-only basis cannot be normalized.
  Graph path = oracle::path_graph(5);
  SemiNormContext comb = make_context(build_laplacian(path, LaplacianKind::combinatorial()));
  SpectralBasis kernel_only = spectral_subspace(comb, 1);
  Rng krng(903);
  CHECK_THROWS_WITH(random_smooth_signal(kernel_only, krng),
                    Catch::Matchers::ContainsSubstring("ker"));
}
