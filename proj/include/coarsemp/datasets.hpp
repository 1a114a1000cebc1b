#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coarsemp/graph.hpp"
#include "coarsemp/rng.hpp"
#include "coarsemp/seminorm.hpp"

namespace coarsemp {

struct GeometricConfig {
  int n = 1000;
  double threshold = 0.05;  // connect pairs with distance strictly below this
  uint64_t seed = 0;
};

// Nodes uniform in the unit square, unit-weight edges under the threshold.
// Features are the sampled coordinates.
inline Graph random_geometric_graph(const GeometricConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("random_geometric_graph: n must be positive");
  if (cfg.threshold <= 0.0)
    throw std::invalid_argument("random_geometric_graph: threshold must be positive");
  Rng rng(cfg.seed);
  Mat coords(cfg.n, 2);
  for (int i = 0; i < cfg.n; ++i) {
    coords(i, 0) = rng.uniform01();
    coords(i, 1) = rng.uniform01();
  }
  std::vector<Triplet> trips;
  const double t2 = cfg.threshold * cfg.threshold;
  for (int i = 0; i < cfg.n; ++i)
    for (int j = i + 1; j < cfg.n; ++j) {
      double dx = coords(i, 0) - coords(j, 0);
      double dy = coords(i, 1) - coords(j, 1);
      if (dx * dx + dy * dy < t2) {
        trips.emplace_back(i, j, 1.0);
        trips.emplace_back(j, i, 1.0);
      }
    }
  SpMat A(cfg.n, cfg.n);
  A.setFromTriplets(trips.begin(), trips.end());
  return make_graph(std::move(A), std::move(coords));
}

struct PlantedPartitionConfig {
  int n = 600;
  int classes = 3;
  double p_in = 0.05;    // edge probability inside a class
  double p_out = 0.005;  // edge probability across classes
  int feature_dim = 8;
  double noise_sigma = 1.0;
  uint64_t seed = 0;
};

// Class-blocked random graph with labels i mod classes, noisy class-indicator
// features, and balanced 10/20/70 train/val/test splits per class.
inline Graph planted_partition_graph(const PlantedPartitionConfig& cfg) {
  if (cfg.n < 1 || cfg.classes < 1)
    throw std::invalid_argument("planted_partition_graph: n and classes must be positive");
  if (cfg.p_in < cfg.p_out)
    throw std::invalid_argument("planted_partition_graph: p_in must be at least p_out");
  if (cfg.p_in < 0.0 || cfg.p_in > 1.0 || cfg.p_out < 0.0 || cfg.p_out > 1.0)
    throw std::invalid_argument("planted_partition_graph: probabilities must be in [0, 1]");
  if (cfg.feature_dim < cfg.classes)
    throw std::invalid_argument("planted_partition_graph: feature_dim must cover the classes");

  Rng rng(cfg.seed);
  std::vector<int> labels(static_cast<size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) labels[static_cast<size_t>(i)] = i % cfg.classes;

  std::vector<Triplet> trips;
  for (int i = 0; i < cfg.n; ++i)
    for (int j = i + 1; j < cfg.n; ++j) {
      double p = labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)] ? cfg.p_in
                                                                                  : cfg.p_out;
      if (rng.uniform01() < p) {
        trips.emplace_back(i, j, 1.0);
        trips.emplace_back(j, i, 1.0);
      }
    }
  SpMat A(cfg.n, cfg.n);
  A.setFromTriplets(trips.begin(), trips.end());

  Mat X(cfg.n, cfg.feature_dim);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.feature_dim; ++j) {
      double proto = j == labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
      X(i, j) = proto + cfg.noise_sigma * rng.normal();
    }

  SplitMasks splits;
  for (int cls = 0; cls < cfg.classes; ++cls) {
    std::vector<int> ids;
    for (int i = 0; i < cfg.n; ++i)
      if (labels[static_cast<size_t>(i)] == cls) ids.push_back(i);
    rng.shuffle(ids);
    size_t n_train = std::max<size_t>(1, ids.size() / 10);
    size_t n_val = std::max<size_t>(1, ids.size() / 5);
    for (size_t p = 0; p < ids.size(); ++p) {
      if (p < n_train)
        splits.train.push_back(ids[p]);
      else if (p < n_train + n_val)
        splits.val.push_back(ids[p]);
      else
        splits.test.push_back(ids[p]);
    }
  }
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.val.begin(), splits.val.end());
  std::sort(splits.test.begin(), splits.test.end());
  return make_graph(std::move(A), std::move(X), std::move(labels), std::move(splits));
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] inline void parse_fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

inline double parse_double(const std::string& tok, const std::string& path, int line) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) parse_fail(path, line, "trailing characters in '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    parse_fail(path, line, "expected a number, got '" + tok + "'");
  }
}

inline long parse_int(const std::string& tok, const std::string& path, int line) {
  try {
    size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size()) parse_fail(path, line, "trailing characters in '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    parse_fail(path, line, "expected an integer, got '" + tok + "'");
  }
}

}  // namespace detail

// Text formats, all UTF-8:
//   edges:    one undirected edge per line, "src<TAB>dst<TAB>weight", 0-based
//   features: headerless CSV, one node per row
//   labels:   one class index per line
//   splits:   three lines of space-separated node ids (train, val, test)
// Empty feature/label/split files mean the component is absent.
inline void save_dataset(const Graph& g, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/edges.tsv");
    if (!out) throw std::runtime_error("cannot write " + dir + "/edges.tsv");
    for (int j = 0; j < g.adjacency.outerSize(); ++j)
      for (SpMat::InnerIterator it(g.adjacency, j); it; ++it)
        if (it.row() < j)
          out << it.row() << '\t' << j << '\t' << detail::fmt_double(it.value()) << '\n';
  }
  {
    std::ofstream out(dir + "/features.csv");
    if (!out) throw std::runtime_error("cannot write " + dir + "/features.csv");
    for (int i = 0; i < g.features.rows(); ++i) {
      for (int j = 0; j < g.features.cols(); ++j) {
        if (j) out << ',';
        out << detail::fmt_double(g.features(i, j));
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/labels.csv");
    if (!out) throw std::runtime_error("cannot write " + dir + "/labels.csv");
    for (int y : g.labels) out << y << '\n';
  }
  {
    std::ofstream out(dir + "/splits.txt");
    if (!out) throw std::runtime_error("cannot write " + dir + "/splits.txt");
    if (!g.splits.empty()) {
      auto write_line = [&out](const std::vector<int>& ids) {
        for (size_t p = 0; p < ids.size(); ++p) {
          if (p) out << ' ';
          out << ids[p];
        }
        out << '\n';
      };
      write_line(g.splits.train);
      write_line(g.splits.val);
      write_line(g.splits.test);
    }
  }
}

// Any of feature/label/split paths may be empty to skip that component. A
// named but missing split file degrades to no masks with a warning; the other
// files must exist.
inline Graph load_dataset(const std::string& edge_path, const std::string& feature_path = "",
                          const std::string& label_path = "", const std::string& split_path = "") {
  Mat features;
  if (!feature_path.empty()) {
    std::ifstream in(feature_path);
    if (!in) throw std::runtime_error("cannot open " + feature_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ','))
        row.push_back(detail::parse_double(cell, feature_path, lineno));
      if (!rows.empty() && row.size() != rows.front().size())
        detail::parse_fail(feature_path, lineno, "inconsistent column count");
      rows.push_back(std::move(row));
    }
    if (!rows.empty()) {
      features.resize(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
      for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows.front().size(); ++j)
          features(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }

  std::vector<int> labels;
  if (!label_path.empty()) {
    std::ifstream in(label_path);
    if (!in) throw std::runtime_error("cannot open " + label_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      labels.push_back(static_cast<int>(detail::parse_int(line, label_path, lineno)));
    }
  }

  std::ifstream ein(edge_path);
  if (!ein) throw std::runtime_error("cannot open " + edge_path);
  std::vector<Triplet> trips;
  long max_id = -1;
  {
    std::string line;
    int lineno = 0;
    while (std::getline(ein, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ss(line);
      std::string s_tok, d_tok, w_tok;
      if (!(ss >> s_tok >> d_tok))
        detail::parse_fail(edge_path, lineno, "expected 'src dst [weight]'");
      double w = 1.0;
      if (ss >> w_tok) w = detail::parse_double(w_tok, edge_path, lineno);
      std::string extra;
      if (ss >> extra) detail::parse_fail(edge_path, lineno, "too many fields");
      long s = detail::parse_int(s_tok, edge_path, lineno);
      long d = detail::parse_int(d_tok, edge_path, lineno);
      if (s < 0 || d < 0) detail::parse_fail(edge_path, lineno, "negative node id");
      if (s == d) detail::parse_fail(edge_path, lineno, "self-loop on node " + std::to_string(s));
      max_id = std::max(max_id, std::max(s, d));
      trips.emplace_back(static_cast<int>(s), static_cast<int>(d), w);
      trips.emplace_back(static_cast<int>(d), static_cast<int>(s), w);
    }
  }

  long n = max_id + 1;
  if (features.rows() > 0) {
    if (n > features.rows())
      throw std::runtime_error(edge_path + ": node id " + std::to_string(max_id) +
                               " exceeds feature rows (" + std::to_string(features.rows()) + ")");
    n = features.rows();
  }
  if (!labels.empty()) {
    if (n > static_cast<long>(labels.size()))
      throw std::runtime_error(edge_path + ": node count " + std::to_string(n) +
                               " exceeds label count (" + std::to_string(labels.size()) + ")");
    if (static_cast<long>(labels.size()) != n)
      throw std::runtime_error(label_path + ": label count " + std::to_string(labels.size()) +
                               " does not match node count " + std::to_string(n));
  }
  if (n < 1) throw std::runtime_error(edge_path + ": no nodes");

  SpMat A(static_cast<int>(n), static_cast<int>(n));
  A.setFromTriplets(trips.begin(), trips.end());

  SplitMasks splits;
  if (!split_path.empty()) {
    std::ifstream in(split_path);
    if (!in) {
      std::cerr << "warning: split file " << split_path << " not found; all nodes unmasked\n";
    } else {
      std::vector<std::vector<int>> lines;
      std::string line;
      int lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        std::vector<int> ids;
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) ids.push_back(static_cast<int>(detail::parse_int(tok, split_path, lineno)));
        lines.push_back(std::move(ids));
      }
      while (!lines.empty() && lines.back().empty()) lines.pop_back();
      if (!lines.empty()) {
        if (lines.size() != 3)
          throw std::runtime_error(split_path + ": expected 3 lines (train, val, test), got " +
                                   std::to_string(lines.size()));
        splits.train = lines[0];
        splits.val = lines[1];
        splits.test = lines[2];
      }
    }
  }
  return make_graph(std::move(A), std::move(features), std::move(labels), std::move(splits));
}

// Loads the save_dataset layout; absent or empty optional files are skipped.
inline Graph load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  auto opt = [&dir](const char* file) -> std::string {
    std::string p = dir + "/" + file;
    std::error_code ec;
    if (!fs::exists(p, ec) || fs::file_size(p, ec) == 0) return "";
    return p;
  };
  std::string edges = dir + "/edges.tsv";
  if (!fs::exists(edges)) throw std::runtime_error("cannot open " + edges);
  return load_dataset(edges, opt("features.csv"), opt("labels.csv"), opt("splits.txt"));
}

// Largest connected component, ties to the one containing the smallest node
// id. Features, labels and masks are re-indexed to the surviving nodes.
inline Graph principal_connected_component(const Graph& g) {
  auto [comp, n_comp] = connected_components(g.adjacency);
  if (n_comp <= 1) return g;
  std::vector<int> sizes(static_cast<size_t>(n_comp), 0);
  for (int c : comp) ++sizes[static_cast<size_t>(c)];
  int best = 0;
  for (int c = 1; c < n_comp; ++c)
    if (sizes[static_cast<size_t>(c)] > sizes[static_cast<size_t>(best)]) best = c;

  const int N = g.num_nodes();
  std::vector<int> to_new(static_cast<size_t>(N), -1);
  int kept = 0;
  for (int i = 0; i < N; ++i)
    if (comp[static_cast<size_t>(i)] == best) to_new[static_cast<size_t>(i)] = kept++;

  std::vector<Triplet> trips;
  for (int j = 0; j < g.adjacency.outerSize(); ++j)
    for (SpMat::InnerIterator it(g.adjacency, j); it; ++it) {
      int ni = to_new[static_cast<size_t>(it.row())];
      int nj = to_new[static_cast<size_t>(j)];
      if (ni >= 0 && nj >= 0) trips.emplace_back(ni, nj, it.value());
    }
  SpMat A(kept, kept);
  A.setFromTriplets(trips.begin(), trips.end());

  Mat features;
  if (g.has_features()) {
    features.resize(kept, g.features.cols());
    for (int i = 0; i < N; ++i)
      if (to_new[static_cast<size_t>(i)] >= 0)
        features.row(to_new[static_cast<size_t>(i)]) = g.features.row(i);
  }
  std::vector<int> labels;
  if (g.has_labels()) {
    labels.resize(static_cast<size_t>(kept));
    for (int i = 0; i < N; ++i)
      if (to_new[static_cast<size_t>(i)] >= 0)
        labels[static_cast<size_t>(to_new[static_cast<size_t>(i)])] =
            g.labels[static_cast<size_t>(i)];
  }
  SplitMasks splits;
  auto remap = [&to_new](const std::vector<int>& ids) {
    std::vector<int> out;
    for (int i : ids)
      if (to_new[static_cast<size_t>(i)] >= 0) out.push_back(to_new[static_cast<size_t>(i)]);
    return out;
  };
  splits.train = remap(g.splits.train);
  splits.val = remap(g.splits.val);
  splits.test = remap(g.splits.test);
  return make_graph(std::move(A), std::move(features), std::move(labels), std::move(splits));
}

// Random unit-seminorm signal in the span of the basis. The basis columns are
// eigenvectors, so ||V c||_L^2 = sum_i lambda_i c_i^2.
inline Vec random_smooth_signal(const SpectralBasis& basis, Rng& rng) {
  const int K = basis.K();
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vec c(K);
    for (int i = 0; i < K; ++i) c(i) = rng.normal();
    double norm2 = 0.0;
    for (int i = 0; i < K; ++i) norm2 += basis.eigenvalues(i) * c(i) * c(i);
    if (norm2 > 1e-24) return basis.V * (c / std::sqrt(norm2));
  }
  throw std::runtime_error(
      "random_smooth_signal: basis is contained in ker(L); cannot normalize");
}

inline Vec random_smooth_signal(const SpectralBasis& basis, uint64_t seed) {
  Rng rng(seed);
  return random_smooth_signal(basis, rng);
}

}  // namespace coarsemp
