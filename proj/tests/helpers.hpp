#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

// Entry-wise infinity-norm distance between two dense matrices.
inline double max_abs_diff(const coarsemp::Mat& A, const coarsemp::Mat& B) {
  return (A - B).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const coarsemp::SpMat& A, const coarsemp::SpMat& B) {
  return max_abs_diff(coarsemp::Mat(A), coarsemp::Mat(B));
}
