#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coarsemp/coarsening.hpp"
#include "coarsemp/graph.hpp"
#include "coarsemp/operators.hpp"

namespace coarsemp {

using Json = nlohmann::json;

inline Json coarsening_to_json(const Coarsening& c) {
  Json j;
  j["n"] = c.n();
  j["N"] = c.N();
  j["assignment"] = c.assignment;
  j["weights"] = std::vector<double>(c.weights.data(), c.weights.data() + c.weights.size());
  j["uniform"] = c.uniform;
  return j;
}

// Rebuilds through from_partition so the uniform fast path (exact lifted
// entries) is taken whenever the stored weights allow it.
inline Coarsening coarsening_from_json(const Json& j) {
  std::vector<int> assignment = j.at("assignment").get<std::vector<int>>();
  const int n = j.at("n").get<int>();
  const int N = j.at("N").get<int>();
  if (static_cast<int>(assignment.size()) != N)
    throw std::runtime_error("coarsening_from_json: assignment length " +
                             std::to_string(assignment.size()) + " does not match N=" +
                             std::to_string(N));
  Coarsening c;
  if (j.at("uniform").get<bool>()) {
    c = from_partition(assignment);
  } else {
    // Stored weights are the Q entries, which is what from_partition takes.
    std::vector<double> w = j.at("weights").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != N)
      throw std::runtime_error("coarsening_from_json: weights length does not match N");
    c = from_partition(assignment, w);
  }
  if (c.n() != n)
    throw std::runtime_error("coarsening_from_json: assignment uses " + std::to_string(c.n()) +
                             " supernodes but n=" + std::to_string(n));
  return c;
}

inline Json certificate_to_json(const BoundConstants& bc, int k, double bound,
                                const AssumptionFlags& flags) {
  Json j;
  j["epsilon"] = bc.epsilon;
  j["C_S"] = bc.C_S;
  j["C_Pi"] = bc.C_Pi;
  j["C_Pi_bar"] = bc.C_Pi_bar;
  j["k"] = k;
  j["bound"] = bound;
  j["assumption_flags"] = {
      {"kernel_preserving_Pi", flags.kernel_leak_Pi <= 1e-8},
      {"kernel_preserving_S", flags.kernel_leak_S <= 1e-8},
      {"R_preserving_S", flags.subspace_leak_S <= 1e-8},
  };
  j["leakages"] = {
      {"kernel_leak_Pi", flags.kernel_leak_Pi},
      {"kernel_leak_S", flags.kernel_leak_S},
      {"subspace_leak_S", flags.subspace_leak_S},
  };
  return j;
}

inline void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// MatrixMarket coordinate format, general symmetry, 1-based indices.
inline void write_matrix_market(const SpMat& M, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << M.rows() << ' ' << M.cols() << ' ' << M.nonZeros() << '\n';
  char buf[40];
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%.17g", it.value());
      out << it.row() + 1 << ' ' << j + 1 << ' ' << buf << '\n';
    }
}

inline SpMat read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  int lineno = 0;
  bool symmetric = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '%') {
      if (lineno == 1 && line.find("symmetric") != std::string::npos) symmetric = true;
      continue;
    }
    break;
  }
  long rows = 0, cols = 0, nnz = 0;
  {
    std::stringstream ss(line);
    if (!(ss >> rows >> cols >> nnz))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad size line");
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(nnz));
  long seen = 0;
  while (seen < nnz && std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::stringstream ss(line);
    long r, c;
    double v;
    if (!(ss >> r >> c >> v))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad entry line");
    if (r < 1 || r > rows || c < 1 || c > cols)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": index out of range");
    trips.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
    if (symmetric && r != c) trips.emplace_back(static_cast<int>(c - 1), static_cast<int>(r - 1), v);
    ++seen;
  }
  if (seen != nnz)
    throw std::runtime_error(path + ": expected " + std::to_string(nnz) + " entries, got " +
                             std::to_string(seen));
  SpMat M(static_cast<int>(rows), static_cast<int>(cols));
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

inline void write_text_file(const std::string& content, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace coarsemp
