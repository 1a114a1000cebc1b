#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coarsemp/coarsening.hpp"
#include "coarsemp/graph.hpp"
#include "coarsemp/rng.hpp"

namespace coarsemp {

struct TrainConfig {
  int epochs = 200;
  double lr = 0.05;
  double weight_decay = 0.01;  // L2 term added to the gradient
  int hidden = 16;
  uint64_t seed = 0;
};

// S^k X by repeated sparse-dense products.
inline Mat sgc_precompute(const SpMat& S, const Mat& X, int k) {
  if (k < 0) throw std::invalid_argument("sgc_precompute: k must be nonnegative");
  if (S.cols() != X.rows()) throw std::invalid_argument("sgc_precompute: dimension mismatch");
  Mat out = X;
  for (int i = 0; i < k; ++i) out = S * out;
  return out;
}

// Mean softmax cross-entropy over the masked rows; the gradient with respect
// to the logits is zero outside the mask.
inline std::pair<double, Mat> cross_entropy_masked(const Mat& logits,
                                                   const std::vector<int>& labels,
                                                   const std::vector<int>& mask) {
  if (mask.empty()) throw std::invalid_argument("cross_entropy_masked: empty mask");
  if (static_cast<int>(labels.size()) != logits.rows())
    throw std::invalid_argument("cross_entropy_masked: label count mismatch");
  const int C = static_cast<int>(logits.cols());
  Mat grad = Mat::Zero(logits.rows(), C);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(mask.size());
  for (int r : mask) {
    if (r < 0 || r >= logits.rows())
      throw std::invalid_argument("cross_entropy_masked: mask id out of range");
    int y = labels[static_cast<size_t>(r)];
    if (y < 0 || y >= C)
      throw std::invalid_argument("cross_entropy_masked: label " + std::to_string(y) +
                                  " out of range at node " + std::to_string(r));
    double m = logits.row(r).maxCoeff();
    double sum = 0.0;
    for (int j = 0; j < C; ++j) sum += std::exp(logits(r, j) - m);
    loss += (std::log(sum) - (logits(r, y) - m)) * inv;
    for (int j = 0; j < C; ++j) grad(r, j) = std::exp(logits(r, j) - m) / sum * inv;
    grad(r, y) -= inv;
  }
  return {loss, grad};
}

// Fraction of masked rows whose argmax matches the label. Ties resolve to the
// lowest class index.
inline double evaluate(const Mat& logits, const std::vector<int>& labels,
                       const std::vector<int>& mask) {
  if (mask.empty()) return 0.0;
  int hits = 0;
  for (int r : mask) {
    int arg = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits(r, j) > logits(r, arg)) arg = j;
    if (arg == labels[static_cast<size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

inline Mat uniform_init(int rows, int cols, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Mat W(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) W(i, j) = rng.uniform(-bound, bound);
  return W;
}

inline int num_classes(const std::vector<int>& labels) {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  if (c < 1) throw std::invalid_argument("labels are empty");
  return c;
}

// Adam with the L2 weight-decay term added to the gradient.
struct Adam {
  double lr;
  double weight_decay;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Mat m, v;
  long t = 0;

  Adam(double lr_, double wd, int rows, int cols)
      : lr(lr_), weight_decay(wd), m(Mat::Zero(rows, cols)), v(Mat::Zero(rows, cols)) {}

  void step(Mat& W, const Mat& grad) {
    ++t;
    Mat g = grad + weight_decay * W;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    W.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
};

struct EpochRow {
  int epoch;
  double loss;       // before the epoch's update
  double train_acc;  // after the update
  double val_acc;
  double test_acc;
};

struct SgcResult {
  Mat W;       // final weights
  Mat W_best;  // weights at the best validation epoch
  int best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc_at_best = 0.0;
  std::vector<EpochRow> history;
};

namespace detail {

inline void guard_finite(double loss, int epoch) {
  if (!std::isfinite(loss))
    throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                             " (loss = " + std::to_string(loss) + ")");
}

}  // namespace detail

// Trains the linear model logits = (S_c^k X_c) W on the coarse graph. The
// forward pass stays coarse; logits are lifted by Q_plus and the loss uses the
// labels and masks of the original graph. The gradient flows through the lift
// as Q_plus' times the masked logit gradient.
inline SgcResult train_sgc_coarse(const SpMat& S_c, const Coarsening& c, const Mat& X,
                                  const std::vector<int>& labels, const SplitMasks& splits,
                                  int k, const TrainConfig& cfg) {
  if (splits.train.empty()) throw std::invalid_argument("train_sgc_coarse: empty train mask");
  const int C = num_classes(labels);
  Mat F = sgc_precompute(S_c, c.Q * X, k);
  const int d = static_cast<int>(F.cols());

  Rng rng(cfg.seed);
  Mat W = uniform_init(d, C, rng);
  Adam opt(cfg.lr, cfg.weight_decay, d, C);
  SpMat lift_T = SpMat(c.Q_plus.transpose());

  SgcResult res;
  res.best_val_acc = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Mat lifted = c.Q_plus * (F * W);
    auto [loss, G] = cross_entropy_masked(lifted, labels, splits.train);
    detail::guard_finite(loss, epoch);
    Mat gradW = F.transpose() * (lift_T * G);
    opt.step(W, gradW);

    Mat lifted_post = c.Q_plus * (F * W);
    EpochRow row;
    row.epoch = epoch;
    row.loss = loss;
    row.train_acc = evaluate(lifted_post, labels, splits.train);
    row.val_acc = splits.val.empty() ? 0.0 : evaluate(lifted_post, labels, splits.val);
    row.test_acc = splits.test.empty() ? 0.0 : evaluate(lifted_post, labels, splits.test);
    res.history.push_back(row);
    if (row.val_acc > res.best_val_acc) {
      res.best_val_acc = row.val_acc;
      res.best_epoch = epoch;
      res.W_best = W;
      res.test_acc_at_best = row.test_acc;
    }
  }
  res.W = W;
  if (cfg.epochs == 0) {
    res.W_best = W;
    res.test_acc_at_best = 0.0;
  }
  return res;
}

inline SgcResult train_sgc_full(const SpMat& S, const Mat& X, const std::vector<int>& labels,
                                const SplitMasks& splits, int k, const TrainConfig& cfg) {
  return train_sgc_coarse(S, identity_coarsening(static_cast<int>(S.rows())), X, labels, splits, k,
                          cfg);
}

struct GcnGrads {
  double loss = 0.0;
  Mat dW1, dW2;
};

namespace detail {

// Forward S relu(S X W1) W2, lift, masked cross-entropy, manual backward.
// The ReLU subgradient at 0 is 0. lift may be null for the full-graph case.
inline GcnGrads gcn_backward_impl(const Mat& W1, const Mat& W2, const SpMat& S, const Mat& X,
                                  const SpMat* lift, const std::vector<int>& labels,
                                  const std::vector<int>& mask) {
  Mat Z1 = S * (X * W1);
  Mat H1 = Z1.cwiseMax(0.0);
  Mat Z2 = S * (H1 * W2);
  Mat logits = lift ? Mat(*lift * Z2) : Z2;
  auto [loss, G] = cross_entropy_masked(logits, labels, mask);
  Mat Gc = lift ? Mat(SpMat(lift->transpose()) * G) : G;

  SpMat St = SpMat(S.transpose());
  Mat dM2 = St * Gc;
  GcnGrads out;
  out.loss = loss;
  out.dW2 = H1.transpose() * dM2;
  Mat dH1 = dM2 * W2.transpose();
  Mat dZ1 = ((Z1.array() > 0.0).cast<double>() * dH1.array()).matrix();
  Mat dM1 = St * dZ1;
  out.dW1 = X.transpose() * dM1;
  return out;
}

}  // namespace detail

inline GcnGrads gcn_forward_backward(const Mat& W1, const Mat& W2, const SpMat& S, const Mat& X,
                                     const std::vector<int>& labels,
                                     const std::vector<int>& mask) {
  return detail::gcn_backward_impl(W1, W2, S, X, nullptr, labels, mask);
}

inline Mat gcn_logits(const Mat& W1, const Mat& W2, const SpMat& S, const Mat& X) {
  Mat H1 = (S * (X * W1)).cwiseMax(0.0);
  return S * (H1 * W2);
}

struct GcnResult {
  Mat W1, W2;            // final weights
  Mat W1_best, W2_best;  // weights at the best validation epoch
  int best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc_at_best = 0.0;
  std::vector<EpochRow> history;
};

// Two-layer GCN analogue of train_sgc_coarse. Weight draw order is W1 then W2.
inline GcnResult train_gcn_coarse(const SpMat& S_c, const Coarsening& c, const Mat& X,
                                  const std::vector<int>& labels, const SplitMasks& splits,
                                  const TrainConfig& cfg) {
  if (splits.train.empty()) throw std::invalid_argument("train_gcn_coarse: empty train mask");
  const int C = num_classes(labels);
  Mat Xc = c.Q * X;
  const int d = static_cast<int>(Xc.cols());

  Rng rng(cfg.seed);
  Mat W1 = uniform_init(d, cfg.hidden, rng);
  Mat W2 = uniform_init(cfg.hidden, C, rng);
  Adam opt1(cfg.lr, cfg.weight_decay, d, cfg.hidden);
  Adam opt2(cfg.lr, cfg.weight_decay, cfg.hidden, C);

  GcnResult res;
  res.best_val_acc = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    GcnGrads g = detail::gcn_backward_impl(W1, W2, S_c, Xc, &c.Q_plus, labels, splits.train);
    detail::guard_finite(g.loss, epoch);
    opt1.step(W1, g.dW1);
    opt2.step(W2, g.dW2);

    Mat lifted = c.Q_plus * gcn_logits(W1, W2, S_c, Xc);
    EpochRow row;
    row.epoch = epoch;
    row.loss = g.loss;
    row.train_acc = evaluate(lifted, labels, splits.train);
    row.val_acc = splits.val.empty() ? 0.0 : evaluate(lifted, labels, splits.val);
    row.test_acc = splits.test.empty() ? 0.0 : evaluate(lifted, labels, splits.test);
    res.history.push_back(row);
    if (row.val_acc > res.best_val_acc) {
      res.best_val_acc = row.val_acc;
      res.best_epoch = epoch;
      res.W1_best = W1;
      res.W2_best = W2;
      res.test_acc_at_best = row.test_acc;
    }
  }
  res.W1 = W1;
  res.W2 = W2;
  if (cfg.epochs == 0) {
    res.W1_best = W1;
    res.W2_best = W2;
  }
  return res;
}

inline GcnResult train_gcn_full(const SpMat& S, const Mat& X, const std::vector<int>& labels,
                                const SplitMasks& splits, const TrainConfig& cfg) {
  return train_gcn_coarse(S, identity_coarsening(static_cast<int>(S.rows())), X, labels, splits,
                          cfg);
}

}  // namespace coarsemp
