#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coarsemp/coarsening.hpp"
#include "coarsemp/datasets.hpp"
#include "coarsemp/gnn.hpp"
#include "coarsemp/graph.hpp"
#include "coarsemp/loukas.hpp"
#include "coarsemp/operators.hpp"
#include "coarsemp/seminorm.hpp"
#include "coarsemp/serialize.hpp"
#include "coarsemp/version.hpp"

namespace coarsemp {

// Fully resolved description of one CLI invocation. Serialized verbatim into
// the output manifest so a run can be replayed bit for bit.
struct ExperimentSpec {
  std::string command;          // gen | coarsen | mp-error | train
  std::string gen;              // generator spec, e.g. "geometric:n=1000,t=0.05,seed=7"
  std::string graph;            // dataset directory in the save_dataset layout
  bool use_pcc = false;         // restrict to the principal connected component
  std::string laplacian = "shifted:0.001";
  std::string prop = "gcn";
  int K = 0;                    // preserved subspace dim; 0 = ceil(N/10)
  std::vector<double> ratios = {0.3, 0.5, 0.7};
  int n_e = -1;                 // per-sweep merge cap; -1 = ceil(N/20), 0 = unbounded
  bool uniform = true;
  std::vector<std::string> operators = {"mp"};
  std::string model = "sgc:6";
  int epochs = 200;
  double lr = 0.05;
  double weight_decay = 0.01;
  std::vector<uint64_t> seeds = {0};
  int k_steps = 6;              // propagation depth for mp-error bounds
  int signals = 100;            // random test signals per (ratio, seed)
  std::string assignment;       // coarsen only: file with a fixed node-to-supernode map
  std::string out = "out";
};

inline Json spec_to_json(const ExperimentSpec& s) {
  Json j;
  j["command"] = s.command;
  j["gen"] = s.gen;
  j["graph"] = s.graph;
  j["use_pcc"] = s.use_pcc;
  j["laplacian"] = s.laplacian;
  j["prop"] = s.prop;
  j["K"] = s.K;
  j["ratios"] = s.ratios;
  j["n_e"] = s.n_e;
  j["uniform"] = s.uniform;
  j["operators"] = s.operators;
  j["model"] = s.model;
  j["epochs"] = s.epochs;
  j["lr"] = s.lr;
  j["weight_decay"] = s.weight_decay;
  j["seeds"] = s.seeds;
  j["k_steps"] = s.k_steps;
  j["signals"] = s.signals;
  j["assignment"] = s.assignment;
  j["out"] = s.out;
  return j;
}

inline ExperimentSpec spec_from_json(const Json& j) {
  ExperimentSpec s;
  s.command = j.at("command").get<std::string>();
  s.gen = j.value("gen", s.gen);
  s.graph = j.value("graph", s.graph);
  s.use_pcc = j.value("use_pcc", s.use_pcc);
  s.laplacian = j.value("laplacian", s.laplacian);
  s.prop = j.value("prop", s.prop);
  s.K = j.value("K", s.K);
  s.ratios = j.value("ratios", s.ratios);
  s.n_e = j.value("n_e", s.n_e);
  s.uniform = j.value("uniform", s.uniform);
  s.operators = j.value("operators", s.operators);
  s.model = j.value("model", s.model);
  s.epochs = j.value("epochs", s.epochs);
  s.lr = j.value("lr", s.lr);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.seeds = j.value("seeds", s.seeds);
  s.k_steps = j.value("k_steps", s.k_steps);
  s.signals = j.value("signals", s.signals);
  s.assignment = j.value("assignment", s.assignment);
  s.out = j.value("out", s.out);
  return s;
}

// "comb" | "norm" | "shifted" | "shifted:<delta>"
inline LaplacianKind parse_laplacian(const std::string& s) {
  if (s == "comb") return LaplacianKind::combinatorial();
  if (s == "norm") return LaplacianKind::normalized_sym();
  if (s == "shifted") return LaplacianKind::shifted(1e-3);
  if (s.rfind("shifted:", 0) == 0) {
    double delta = std::stod(s.substr(8));
    return LaplacianKind::shifted(delta);
  }
  throw std::invalid_argument("unknown laplacian '" + s + "' (comb, norm, shifted:<delta>)");
}

inline PropagationKind parse_prop(const std::string& s) {
  if (s == "adj") return PropagationKind::Adjacency;
  if (s == "mean") return PropagationKind::MeanAgg;
  if (s == "gcn") return PropagationKind::GcnNorm;
  throw std::invalid_argument("unknown propagation '" + s + "' (adj, mean, gcn)");
}

struct ModelSpec {
  bool is_sgc = true;
  int k = 6;        // SGC propagation depth
  int hidden = 16;  // GCN hidden width
};

// "sgc" | "sgc:<k>" | "gcn" | "gcn:<hidden>"
inline ModelSpec parse_model(const std::string& s) {
  ModelSpec m;
  if (s == "sgc") return m;
  if (s.rfind("sgc:", 0) == 0) {
    m.k = std::stoi(s.substr(4));
    if (m.k < 0) throw std::invalid_argument("sgc depth must be nonnegative");
    return m;
  }
  m.is_sgc = false;
  if (s == "gcn") return m;
  if (s.rfind("gcn:", 0) == 0) {
    m.hidden = std::stoi(s.substr(4));
    if (m.hidden < 1) throw std::invalid_argument("gcn hidden width must be positive");
    return m;
  }
  throw std::invalid_argument("unknown model '" + s + "' (sgc:<k>, gcn:<hidden>)");
}

namespace detail {

inline unsigned worker_count() {
  if (const char* env = std::getenv("COARSEMP_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
    return 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return std::min(hw, 8u);
}

// Runs fn(i) for i in [0, count) on a bounded pool. Results must be written
// to per-index slots so output order is independent of scheduling.
template <typename Fn>
inline void parallel_for(size_t count, Fn&& fn) {
  unsigned workers = std::min<size_t>(worker_count(), count);
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string fmt_ratio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

inline std::vector<std::string> split_kv(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

}  // namespace detail

// Generator specs: "geometric:n=1000,t=0.05,seed=7" or
// "planted:n=600,classes=3,pin=0.05,pout=0.005,dim=8,noise=1,seed=0".
// Omitted keys keep their defaults.
inline Graph graph_from_gen_spec(const std::string& spec) {
  std::string kind = spec;
  std::string params;
  if (auto pos = spec.find(':'); pos != std::string::npos) {
    kind = spec.substr(0, pos);
    params = spec.substr(pos + 1);
  }
  auto kv_pairs = params.empty() ? std::vector<std::string>{} : detail::split_kv(params, ',');
  auto parse_kv = [&spec](const std::string& item) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("bad generator parameter '" + item + "' in '" + spec + "'");
    return std::pair<std::string, std::string>(item.substr(0, eq), item.substr(eq + 1));
  };
  if (kind == "geometric") {
    GeometricConfig cfg;
    for (const auto& item : kv_pairs) {
      auto [key, val] = parse_kv(item);
      if (key == "n")
        cfg.n = std::stoi(val);
      else if (key == "t")
        cfg.threshold = std::stod(val);
      else if (key == "seed")
        cfg.seed = std::stoull(val);
      else
        throw std::invalid_argument("unknown geometric parameter '" + key + "' (n, t, seed)");
    }
    return random_geometric_graph(cfg);
  }
  if (kind == "planted") {
    PlantedPartitionConfig cfg;
    for (const auto& item : kv_pairs) {
      auto [key, val] = parse_kv(item);
      if (key == "n")
        cfg.n = std::stoi(val);
      else if (key == "classes")
        cfg.classes = std::stoi(val);
      else if (key == "pin")
        cfg.p_in = std::stod(val);
      else if (key == "pout")
        cfg.p_out = std::stod(val);
      else if (key == "dim")
        cfg.feature_dim = std::stoi(val);
      else if (key == "noise")
        cfg.noise_sigma = std::stod(val);
      else if (key == "seed")
        cfg.seed = std::stoull(val);
      else
        throw std::invalid_argument("unknown planted parameter '" + key +
                                    "' (n, classes, pin, pout, dim, noise, seed)");
    }
    return planted_partition_graph(cfg);
  }
  throw std::invalid_argument("unknown generator '" + kind + "' (geometric, planted)");
}

inline Graph resolve_graph(const ExperimentSpec& spec) {
  if (!spec.gen.empty() && !spec.graph.empty())
    throw std::invalid_argument("give either --gen or --graph, not both");
  Graph g;
  if (!spec.gen.empty())
    g = graph_from_gen_spec(spec.gen);
  else if (!spec.graph.empty())
    g = load_dataset_dir(spec.graph);
  else
    throw std::invalid_argument("no graph source; give --gen or --graph");
  if (spec.use_pcc) g = principal_connected_component(g);
  return g;
}

namespace detail {

inline void write_manifest(const ExperimentSpec& spec, const Json& extra) {
  Json j;
  j["version"] = kVersion;
  j["spec"] = spec_to_json(spec);
  if (!extra.is_null()) j["results"] = extra;
  write_json_file(j, spec.out + "/manifest.json");
}

inline std::vector<int> read_assignment_file(const std::string& path, int N) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<int> assignment;
  long v;
  while (in >> v) assignment.push_back(static_cast<int>(v));
  if (static_cast<int>(assignment.size()) != N)
    throw std::runtime_error(path + ": " + std::to_string(assignment.size()) +
                             " entries for a graph with " + std::to_string(N) + " nodes");
  return assignment;
}

struct CoarsenArtifacts {
  Coarsening c;
  SpMat s_mp;
  RsaReport rsa;
  AssumptionFlags flags;
  BoundConstants bc;
  double bound = 0.0;
  bool exhausted = false;
};

inline CoarsenArtifacts certify(const Coarsening& c, const SpMat& s_mp, const SpMat& S,
                                const SpectralBasis& basis, const SemiNormContext& ctx,
                                int k_steps, double C_S, bool exhausted) {
  CoarsenArtifacts a;
  a.c = c;
  a.s_mp = s_mp;
  a.rsa = rsa_constant(c, basis, ctx);
  a.flags = check_assumptions(S, c, basis, ctx);
  a.bc = bound_constants(S, c, ctx, a.rsa.epsilon, C_S);
  a.bound = k_step_bound(a.bc, k_steps, 1.0);
  a.exhausted = exhausted;
  return a;
}

inline void write_coarsen_files(const CoarsenArtifacts& a, const std::string& out,
                                const std::string& tag, int k_steps) {
  write_json_file(coarsening_to_json(a.c), out + "/coarsening_" + tag + ".json");
  write_matrix_market(a.s_mp, out + "/s_mp_" + tag + ".mtx");
  write_json_file(certificate_to_json(a.bc, k_steps, a.bound, a.flags),
                  out + "/certificate_" + tag + ".json");
}

}  // namespace detail

inline int run_gen(const ExperimentSpec& spec) {
  if (spec.gen.empty()) throw std::invalid_argument("gen needs a --gen spec");
  Graph g = graph_from_gen_spec(spec.gen);
  if (spec.use_pcc) g = principal_connected_component(g);
  std::filesystem::create_directories(spec.out);
  save_dataset(g, spec.out);
  Json extra;
  extra["nodes"] = g.num_nodes();
  extra["edges"] = g.num_edges();
  detail::write_manifest(spec, extra);
  std::cerr << "gen: " << g.num_nodes() << " nodes, " << g.num_edges() << " edges -> "
            << spec.out << "\n";
  return 0;
}

inline int run_coarsen(const ExperimentSpec& spec) {
  Graph g = resolve_graph(spec);
  const int N = g.num_nodes();
  LaplacianKind lap = parse_laplacian(spec.laplacian);
  SpMat L = build_laplacian(g, lap);
  SpMat S = build_propagation(g, parse_prop(spec.prop));
  SemiNormContext ctx = make_context(L);
  const int K = spec.K > 0 ? std::min(spec.K, N) : std::min(default_subspace_dim(N), N);
  SpectralBasis basis = spectral_subspace(ctx, K);
  const double C_S = operator_seminorm(S, ctx);
  std::filesystem::create_directories(spec.out);

  Json ratio_results = Json::array();
  if (!spec.assignment.empty()) {
    auto assignment = detail::read_assignment_file(spec.assignment, N);
    Coarsening c = from_partition(assignment);
    SpMat s_mp = SpMat(c.Q * S) * c.Q_plus;
    auto a = detail::certify(c, s_mp, S, basis, ctx, spec.k_steps, C_S, false);
    detail::write_coarsen_files(a, spec.out, "fixed", spec.k_steps);
    if (static_cast<long>(c.n()) * N <= 400) {
      Mat Qd(c.Q);
      char buf[40];
      std::printf("Q (%d x %d):\n", c.n(), c.N());
      for (int k = 0; k < Qd.rows(); ++k) {
        for (int i = 0; i < Qd.cols(); ++i) {
          std::snprintf(buf, sizeof(buf), "%.12g", Qd(k, i));
          std::printf(i + 1 < Qd.cols() ? "%s " : "%s\n", buf);
        }
      }
    }
    ratio_results.push_back({{"tag", "fixed"},
                             {"n", c.n()},
                             {"epsilon", a.rsa.epsilon},
                             {"exhausted", false}});
    detail::write_manifest(spec, {{"coarsenings", ratio_results}});
    std::cerr << "coarsen: fixed assignment, n=" << c.n() << ", epsilon=" << a.rsa.epsilon
              << "\n";
    return 0;
  }

  std::vector<std::pair<double, double>> eps_by_ratio;
  for (double r : spec.ratios) {
    LoukasConfig cfg;
    cfg.ratio = r;
    cfg.n_e = spec.n_e;
    cfg.force_uniform = spec.uniform;
    cfg.K = K;
    LoukasResult res = loukas_coarsen(g, ctx, basis, cfg, lap, S);
    auto a = detail::certify(res.coarsening, res.s_coarse, S, basis, ctx, spec.k_steps, C_S,
                             res.exhausted_early);
    std::string tag = "r" + detail::fmt_ratio(r);
    detail::write_coarsen_files(a, spec.out, tag, spec.k_steps);
    if (res.exhausted_early)
      std::cerr << "warning: ratio " << r << " ran out of edges at n=" << res.coarsening.n()
                << "\n";
    std::cerr << "coarsen: r=" << r << " n=" << res.coarsening.n()
              << " epsilon=" << a.rsa.epsilon << " C_Pi=" << a.bc.C_Pi << "\n";
    ratio_results.push_back({{"tag", tag},
                             {"ratio", r},
                             {"n", res.coarsening.n()},
                             {"epsilon", a.rsa.epsilon},
                             {"exhausted", res.exhausted_early}});
    eps_by_ratio.emplace_back(r, a.rsa.epsilon);
  }
  std::sort(eps_by_ratio.begin(), eps_by_ratio.end());
  for (size_t i = 1; i < eps_by_ratio.size(); ++i)
    if (eps_by_ratio[i].second < eps_by_ratio[i - 1].second)
      std::cerr << "note: epsilon decreased from r=" << eps_by_ratio[i - 1].first << " to r="
                << eps_by_ratio[i].first << " (usually nondecreasing)\n";
  detail::write_manifest(spec, {{"coarsenings", ratio_results}});
  return 0;
}

inline int run_mp_error(const ExperimentSpec& spec) {
  Graph g = resolve_graph(spec);
  const int N = g.num_nodes();
  if (spec.operators.empty()) throw std::invalid_argument("mp-error needs --operators");
  if (spec.seeds.empty()) throw std::invalid_argument("mp-error needs --seeds");
  if (spec.signals < 1) throw std::invalid_argument("mp-error needs --signals >= 1");
  PropagationKind prop = parse_prop(spec.prop);
  LaplacianKind lap = parse_laplacian(spec.laplacian);
  SpMat S = build_propagation(g, prop);
  SemiNormContext ctx = make_context(build_laplacian(g, lap));
  const int K = spec.K > 0 ? std::min(spec.K, N) : std::min(default_subspace_dim(N), N);
  SpectralBasis basis = spectral_subspace(ctx, K);
  const double C_S = operator_seminorm(S, ctx);

  std::vector<CoarseOperatorKind> ops;
  for (const auto& o : spec.operators) ops.push_back(parse_operator(o));

  struct RatioData {
    double ratio;
    detail::CoarsenArtifacts a;
    std::vector<SpMat> op_matrices;
  };
  std::vector<RatioData> per_ratio;
  for (double r : spec.ratios) {
    LoukasConfig cfg;
    cfg.ratio = r;
    cfg.n_e = spec.n_e;
    cfg.force_uniform = spec.uniform;
    cfg.K = K;
    LoukasResult res = loukas_coarsen(g, ctx, basis, cfg, lap, S);
    RatioData rd;
    rd.ratio = r;
    rd.a = detail::certify(res.coarsening, res.s_coarse, S, basis, ctx, spec.k_steps, C_S,
                           res.exhausted_early);
    for (auto kind : ops)
      rd.op_matrices.push_back(kind == CoarseOperatorKind::MP
                                   ? res.s_coarse
                                   : coarse_operator(S, g.adjacency, prop, res.coarsening, kind));
    per_ratio.push_back(std::move(rd));
    std::cerr << "mp-error: coarsened r=" << r << " n=" << res.coarsening.n()
              << " epsilon=" << rd.a.rsa.epsilon << "\n";
  }

  // Signals depend only on the seed so rows are comparable across ratios.
  std::vector<std::vector<Vec>> signals_by_seed(spec.seeds.size());
  for (size_t si = 0; si < spec.seeds.size(); ++si) {
    Rng rng(spec.seeds[si]);
    for (int i = 0; i < spec.signals; ++i)
      signals_by_seed[si].push_back(random_smooth_signal(basis, rng));
  }

  struct Cell {
    size_t ratio_idx, seed_idx;
  };
  std::vector<Cell> cells;
  for (size_t ri = 0; ri < per_ratio.size(); ++ri)
    for (size_t si = 0; si < spec.seeds.size(); ++si) cells.push_back({ri, si});

  std::vector<std::string> rows(cells.size());
  std::atomic<int> violations{0};
  detail::parallel_for(cells.size(), [&](size_t idx) {
    const auto& cell = cells[idx];
    const auto& rd = per_ratio[cell.ratio_idx];
    const auto& xs = signals_by_seed[cell.seed_idx];
    std::ostringstream block;
    char buf[40];
    auto put = [&block, &buf](double v, char tail) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      block << buf << tail;
    };
    for (size_t oi = 0; oi < ops.size(); ++oi) {
      double sum = 0.0, worst = 0.0;
      for (const Vec& x : xs) {
        double e = mp_error(S, rd.op_matrices[oi], rd.a.c, x, spec.k_steps, ctx);
        sum += e;
        worst = std::max(worst, e);
      }
      double mean = sum / static_cast<double>(xs.size());
      if (ops[oi] == CoarseOperatorKind::MP && worst > rd.a.bound * (1.0 + 1e-8))
        violations.fetch_add(1);
      block << detail::fmt_ratio(rd.ratio) << ',' << spec.seeds[cell.seed_idx] << ','
            << name(ops[oi]) << ',' << spec.k_steps << ',';
      put(mean, ',');
      put(worst, ',');
      put(rd.a.rsa.epsilon, ',');
      put(rd.a.bound, '\n');
    }
    rows[idx] = block.str();
  });

  std::filesystem::create_directories(spec.out);
  {
    std::ofstream csv(spec.out + "/mp_error.csv");
    if (!csv) throw std::runtime_error("cannot write " + spec.out + "/mp_error.csv");
    csv << "ratio,seed,operator,k,error_mean,error_max,epsilon,bound\n";
    for (const auto& r : rows) csv << r;
  }
  Json extra;
  extra["bound_violations"] = violations.load();
  detail::write_manifest(spec, extra);
  if (violations.load() > 0) {
    std::cerr << "mp-error: " << violations.load() << " cells exceeded the k-step bound\n";
    return 1;
  }
  return 0;
}

inline int run_train(const ExperimentSpec& spec) {
  Graph g = resolve_graph(spec);
  if (!g.has_features() || !g.has_labels() || g.splits.empty())
    throw std::invalid_argument("train needs a graph with features, labels and splits");
  if (spec.seeds.empty()) throw std::invalid_argument("train needs --seeds");
  const int N = g.num_nodes();
  ModelSpec model = parse_model(spec.model);
  PropagationKind prop = parse_prop(spec.prop);
  LaplacianKind lap = parse_laplacian(spec.laplacian);
  SpMat S = build_propagation(g, prop);
  SemiNormContext ctx = make_context(build_laplacian(g, lap));
  const int K = spec.K > 0 ? std::min(spec.K, N) : std::min(default_subspace_dim(N), N);
  SpectralBasis basis = spectral_subspace(ctx, K);

  std::vector<CoarseOperatorKind> ops;
  for (const auto& o : spec.operators) ops.push_back(parse_operator(o));

  struct TrainTarget {
    std::string tag;             // "full" or "r<ratio>_<op>"
    double ratio;                // 0 for the full baseline
    std::string op_name;         // "full" or operator name
    Coarsening c;
    SpMat S_c;
  };
  std::vector<TrainTarget> targets;
  {
    TrainTarget full;
    full.tag = "full";
    full.ratio = 0.0;
    full.op_name = "full";
    full.c = identity_coarsening(N);
    full.S_c = S;
    targets.push_back(std::move(full));
  }
  for (double r : spec.ratios) {
    LoukasConfig cfg;
    cfg.ratio = r;
    cfg.n_e = spec.n_e;
    cfg.force_uniform = spec.uniform;
    cfg.K = K;
    LoukasResult res = loukas_coarsen(g, ctx, basis, cfg, lap, S);
    if (res.exhausted_early)
      std::cerr << "warning: ratio " << r << " ran out of edges at n=" << res.coarsening.n()
                << "\n";
    for (auto kind : ops) {
      TrainTarget t;
      t.tag = "r" + detail::fmt_ratio(r) + "_" + name(kind);
      t.ratio = r;
      t.op_name = name(kind);
      t.c = res.coarsening;
      t.S_c = kind == CoarseOperatorKind::MP
                  ? res.s_coarse
                  : coarse_operator(S, g.adjacency, prop, res.coarsening, kind);
      targets.push_back(std::move(t));
    }
    std::cerr << "train: coarsened r=" << r << " n=" << res.coarsening.n() << "\n";
  }

  struct Cell {
    size_t target_idx;
    uint64_t seed;
  };
  std::vector<Cell> cells;
  for (size_t ti = 0; ti < targets.size(); ++ti)
    for (uint64_t seed : spec.seeds) cells.push_back({ti, seed});

  struct CellResult {
    std::vector<EpochRow> history;
    int best_epoch = 0;
    double val_acc = 0.0;
    double test_acc = 0.0;
  };
  std::vector<CellResult> results(cells.size());
  detail::parallel_for(cells.size(), [&](size_t idx) {
    const auto& cell = cells[idx];
    const auto& t = targets[cell.target_idx];
    TrainConfig cfg;
    cfg.epochs = spec.epochs;
    cfg.lr = spec.lr;
    cfg.weight_decay = spec.weight_decay;
    cfg.hidden = model.hidden;
    cfg.seed = cell.seed;
    auto started = std::chrono::steady_clock::now();
    CellResult& out = results[idx];
    if (model.is_sgc) {
      SgcResult r = train_sgc_coarse(t.S_c, t.c, g.features, g.labels, g.splits, model.k, cfg);
      out.history = std::move(r.history);
      out.best_epoch = r.best_epoch;
      out.val_acc = r.best_val_acc;
      out.test_acc = r.test_acc_at_best;
    } else {
      GcnResult r = train_gcn_coarse(t.S_c, t.c, g.features, g.labels, g.splits, cfg);
      out.history = std::move(r.history);
      out.best_epoch = r.best_epoch;
      out.val_acc = r.best_val_acc;
      out.test_acc = r.test_acc_at_best;
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - started)
                  .count();
    std::ostringstream line;
    line << "train: " << t.tag << " seed=" << cell.seed << " test_acc=" << out.test_acc
         << " (" << ms << " ms";
    if (spec.epochs > 0) line << ", " << static_cast<double>(ms) / spec.epochs << " ms/epoch";
    line << ")\n";
    std::cerr << line.str();
  });

  std::filesystem::create_directories(spec.out);
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  {
    std::ofstream csv(spec.out + "/results.csv");
    if (!csv) throw std::runtime_error("cannot write " + spec.out + "/results.csv");
    csv << "ratio,operator,seed,best_epoch,val_acc,test_acc\n";
    for (size_t idx = 0; idx < cells.size(); ++idx) {
      const auto& t = targets[cells[idx].target_idx];
      csv << detail::fmt_ratio(t.ratio) << ',' << t.op_name << ',' << cells[idx].seed << ','
          << results[idx].best_epoch << ',' << fmt(results[idx].val_acc) << ','
          << fmt(results[idx].test_acc) << '\n';
    }
  }
  for (size_t idx = 0; idx < cells.size(); ++idx) {
    const auto& t = targets[cells[idx].target_idx];
    std::string path =
        spec.out + "/epochs_" + t.tag + "_s" + std::to_string(cells[idx].seed) + ".csv";
    std::ofstream csv(path);
    if (!csv) throw std::runtime_error("cannot write " + path);
    csv << "epoch,loss,train_acc,val_acc,test_acc\n";
    for (const auto& row : results[idx].history)
      csv << row.epoch << ',' << fmt(row.loss) << ',' << fmt(row.train_acc) << ','
          << fmt(row.val_acc) << ',' << fmt(row.test_acc) << '\n';
  }
  Json summary = Json::array();
  {
    std::ofstream csv(spec.out + "/summary.csv");
    if (!csv) throw std::runtime_error("cannot write " + spec.out + "/summary.csv");
    csv << "ratio,operator,mean_test_acc,std_test_acc\n";
    for (size_t ti = 0; ti < targets.size(); ++ti) {
      double sum = 0.0;
      int count = 0;
      for (size_t idx = 0; idx < cells.size(); ++idx)
        if (cells[idx].target_idx == ti) {
          sum += results[idx].test_acc;
          ++count;
        }
      double mean = sum / count;
      double var = 0.0;
      for (size_t idx = 0; idx < cells.size(); ++idx)
        if (cells[idx].target_idx == ti) var += (results[idx].test_acc - mean) * (results[idx].test_acc - mean);
      double stddev = count > 1 ? std::sqrt(var / (count - 1)) : 0.0;
      csv << detail::fmt_ratio(targets[ti].ratio) << ',' << targets[ti].op_name << ','
          << fmt(mean) << ',' << fmt(stddev) << '\n';
      summary.push_back({{"ratio", targets[ti].ratio},
                         {"operator", targets[ti].op_name},
                         {"mean_test_acc", mean},
                         {"std_test_acc", stddev}});
    }
  }
  detail::write_manifest(spec, {{"summary", summary}});
  return 0;
}

inline int run_command(const ExperimentSpec& spec) {
  if (spec.command == "gen") return run_gen(spec);
  if (spec.command == "coarsen") return run_coarsen(spec);
  if (spec.command == "mp-error") return run_mp_error(spec);
  if (spec.command == "train") return run_train(spec);
  throw std::invalid_argument("unknown command '" + spec.command + "'");
}

}  // namespace coarsemp
