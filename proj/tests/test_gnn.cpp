#include "helpers.hpp"

using namespace coarsemp;

namespace {

Mat random_mat(int rows, int cols, Rng& rng) {
  Mat M(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) M(i, j) = rng.normal();
  return M;
}

std::vector<int> all_nodes(int n) {
  std::vector<int> ids(static_cast<size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

}  // namespace

TEST_CASE("sgc_precompute repeats the propagation") {
  Rng rng(801);
  Graph g = oracle::random_connected_graph(12, rng);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);
  Mat X = random_mat(12, 3, rng);

  CHECK(max_abs_diff(sgc_precompute(S, X, 0), X) == 0.0);

  SpMat I(12, 12);
  I.setIdentity();
  CHECK(max_abs_diff(sgc_precompute(I, X, 5), X) == 0.0);

  Mat Sd = Mat(S);
  CHECK(max_abs_diff(sgc_precompute(S, X, 2), Sd * (Sd * X)) < 1e-12);

  CHECK_THROWS_WITH(sgc_precompute(S, X, -1), Catch::Matchers::ContainsSubstring("nonnegative"));
  CHECK_THROWS_WITH(sgc_precompute(S, Mat::Zero(5, 2), 1),
                    Catch::Matchers::ContainsSubstring("dimension mismatch"));
}

TEST_CASE("masked cross-entropy matches hand values and finite differences") {
  std::vector<int> labels{0, 1, 2, 0};
  std::vector<int> mask{0, 1, 2, 3};

  // Strongly peaked correct logits drive the loss to zero.
  Mat peaked = Mat::Zero(4, 3);
  for (int r = 0; r < 4; ++r) peaked(r, labels[static_cast<size_t>(r)]) = 100.0;
  CHECK(cross_entropy_masked(peaked, labels, mask).first < 1e-12);

  // All-zero logits give the uniform prediction.
  auto [lz, grad_lz] = cross_entropy_masked(Mat::Zero(4, 3), labels, mask);
  CHECK(lz == Catch::Approx(std::log(3.0)).margin(1e-12));
  CHECK(grad_lz(0, 0) == Catch::Approx(1.0 / 3.0 / 4.0 - 1.0 / 4.0).margin(1e-15));

  Rng rng(802);
  for (int trial = 0; trial < 20; ++trial) {
    Mat logits = random_mat(6, 4, rng);
    std::vector<int> lab(6);
    for (int& y : lab) y = static_cast<int>(rng.below(4));
    std::vector<int> m{0, 2, 3, 5};
    auto [loss, grad] = cross_entropy_masked(logits, lab, m);
    auto f = [&](const Mat& Z) { return cross_entropy_masked(Z, lab, m).first; };
    CHECK(oracle::fd_gradient_error(f, logits, grad) < 1e-6);
    // Row gradients vanish off the mask and sum to zero on it.
    CHECK(grad.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(grad.row(0).sum()) < 1e-15);
  }

  CHECK_THROWS_WITH(cross_entropy_masked(Mat::Zero(4, 3), labels, {}),
                    Catch::Matchers::ContainsSubstring("empty mask"));
  CHECK_THROWS_WITH(cross_entropy_masked(Mat::Zero(4, 3), labels, {9}),
                    Catch::Matchers::ContainsSubstring("out of range"));
  CHECK_THROWS_WITH(cross_entropy_masked(Mat::Zero(4, 3), {0, 1, 7, 0}, mask),
                    Catch::Matchers::ContainsSubstring("label 7"));
}

TEST_CASE("evaluate counts argmax hits with ties to the lowest class") {
  std::vector<int> labels{0, 1, 0, 1};
  Mat perfect(4, 2);
  perfect << 2, 1, 0, 3, 5, 4, -1, 0;
  CHECK(evaluate(perfect, labels, all_nodes(4)) == 1.0);

  // Constant logits always predict class 0.
  CHECK(evaluate(Mat::Zero(4, 2), labels, all_nodes(4)) == 0.5);
  CHECK(evaluate(perfect, labels, {}) == 0.0);
}

TEST_CASE("uniform init is bounded, deterministic, and column-major") {
  Rng rng(803);
  Mat W = uniform_init(9, 4, rng);
  CHECK(W.cwiseAbs().maxCoeff() <= 1.0 / 3.0);

  Rng again(803);
  CHECK(max_abs_diff(W, uniform_init(9, 4, again)) == 0.0);

  Rng other(804);
  CHECK(max_abs_diff(W, uniform_init(9, 4, other)) > 0.0);

  // Entries are drawn down each column in turn.
  Rng raw(803);
  double bound = 1.0 / 3.0;
  CHECK(W(0, 0) == raw.uniform(-bound, bound));
  CHECK(W(1, 0) == raw.uniform(-bound, bound));
}

TEST_CASE("linear model separates a separable problem") {
  // One-hot features make the k = 0 model plain logistic regression.
  const int n = 18;
  std::vector<int> labels(n);
  Mat X = Mat::Zero(n, 3);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = i % 3;
    X(i, i % 3) = 1.0;
  }
  Graph g = oracle::path_graph(n);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);
  SplitMasks splits;
  splits.train = all_nodes(n);

  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.weight_decay = 0.0;
  SgcResult res = train_sgc_full(S, X, labels, splits, 0, cfg);
  REQUIRE(res.history.size() == 120);
  CHECK(res.history.back().train_acc == 1.0);
  CHECK(res.history.back().loss < 0.1);
}

TEST_CASE("zero epochs return the initial weights") {
  Graph g = oracle::path_graph(6);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);
  Mat X = Mat::Identity(6, 6);
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  SplitMasks splits;
  splits.train = all_nodes(6);

  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 11;
  SgcResult res = train_sgc_full(S, X, labels, splits, 2, cfg);
  CHECK(res.history.empty());
  CHECK(res.best_epoch == 0);
  CHECK(res.test_acc_at_best == 0.0);
  Rng rng(11);
  Mat expected = uniform_init(6, 2, rng);
  CHECK(max_abs_diff(res.W, expected) == 0.0);
  CHECK(max_abs_diff(res.W_best, expected) == 0.0);

  GcnResult gres = train_gcn_coarse(S, identity_coarsening(6), X, labels, splits, cfg);
  Rng grng(11);
  Mat w1 = uniform_init(6, cfg.hidden, grng);
  Mat w2 = uniform_init(cfg.hidden, 2, grng);
  CHECK(max_abs_diff(gres.W1, w1) == 0.0);
  CHECK(max_abs_diff(gres.W2, w2) == 0.0);
}

TEST_CASE("identity coarsening trains bit for bit like a plain loop") {
  Rng rng(805);
  Graph g = oracle::random_connected_graph(20, rng);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);
  Mat X = random_mat(20, 5, rng);
  std::vector<int> labels(20);
  for (int& y : labels) y = static_cast<int>(rng.below(3));
  labels[0] = 0;
  labels[1] = 1;
  labels[2] = 2;  // pin the class count the replication below assumes
  SplitMasks splits;
  splits.train = {0, 1, 2, 3, 4, 5, 6, 7};
  splits.val = {8, 9, 10, 11};
  splits.test = {12, 13, 14, 15, 16, 17, 18, 19};

  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 3;
  const int k = 2;
  SgcResult res = train_sgc_coarse(S, identity_coarsening(20), X, labels, splits, k, cfg);

  // Plain full-graph loop with no lifting anywhere.
  Mat F = sgc_precompute(S, X, k);
  Rng wrng(cfg.seed);
  Mat W = uniform_init(5, 3, wrng);
  Adam opt(cfg.lr, cfg.weight_decay, 5, 3);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Mat logits = F * W;
    auto [loss, G] = cross_entropy_masked(logits, labels, splits.train);
    Mat gradW = F.transpose() * G;
    opt.step(W, gradW);
    const EpochRow& row = res.history[static_cast<size_t>(epoch - 1)];
    CHECK(row.loss == loss);
    Mat post = F * W;
    CHECK(row.train_acc == evaluate(post, labels, splits.train));
    CHECK(row.val_acc == evaluate(post, labels, splits.val));
    CHECK(row.test_acc == evaluate(post, labels, splits.test));
  }
  CHECK(max_abs_diff(res.W, W) == 0.0);
}

TEST_CASE("adam descends the convex objective at a small learning rate") {
  PlantedPartitionConfig pcfg;
  pcfg.n = 90;
  pcfg.seed = 5;
  Graph g = planted_partition_graph(pcfg);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);

  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;
  SgcResult res = train_sgc_full(S, g.features, g.labels, g.splits, 2, cfg);
  for (size_t i = 1; i < res.history.size(); ++i)
    CHECK(res.history[i].loss <= res.history[i - 1].loss + 1e-12);
}

TEST_CASE("weight decay enters through the gradient") {
  // With a zero data gradient the decay term is the whole update: the plain
  // optimizer must not move at all while the decayed one steps toward zero.
  // A nonzero shared gradient would not discriminate, because the first Adam
  // step normalizes the magnitude away.
  Mat W = Mat::Constant(2, 2, 2.0);
  Mat Wd = W;
  Mat zero = Mat::Zero(2, 2);
  Adam plain(0.05, 0.0, 2, 2);
  Adam decayed(0.05, 0.5, 2, 2);
  plain.step(W, zero);
  decayed.step(Wd, zero);
  CHECK(max_abs_diff(W, Mat::Constant(2, 2, 2.0)) == 0.0);
  CHECK(max_abs_diff(W, Wd) > 1e-2);
  CHECK(Wd(0, 0) < 2.0);

  // First-step Adam moves every entry by exactly lr regardless of scale.
  Mat grad = Mat::Constant(2, 2, 0.1);
  Adam fresh(0.05, 0.0, 2, 2);
  Mat Wf = Mat::Constant(2, 2, 2.0);
  fresh.step(Wf, grad);
  CHECK(Wf(0, 0) == Catch::Approx(2.0 - 0.05 * 0.1 / (0.1 + 1e-8)).margin(1e-12));
}

TEST_CASE("gcn gradients agree with finite differences") {
  Rng rng(806);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 8 + static_cast<int>(rng.below(6));
    Graph g = oracle::random_connected_graph(n, rng);
    SpMat S = build_propagation(g, PropagationKind::GcnNorm);
    Mat X = random_mat(n, 3, rng);
    Mat W1 = random_mat(3, 4, rng);
    Mat W2 = random_mat(4, 3, rng);
    std::vector<int> labels(static_cast<size_t>(n));
    for (int& y : labels) y = static_cast<int>(rng.below(3));
    std::vector<int> mask;
    for (int i = 0; i < n; i += 2) mask.push_back(i);

    // Keep the finite-difference probes away from the ReLU kink.
    Mat Z1 = S * (X * W1);
    if (Z1.cwiseAbs().minCoeff() < 1e-3) continue;

    GcnGrads gr = gcn_forward_backward(W1, W2, S, X, labels, mask);
    auto f1 = [&](const Mat& P) { return gcn_forward_backward(P, W2, S, X, labels, mask).loss; };
    auto f2 = [&](const Mat& P) { return gcn_forward_backward(W1, P, S, X, labels, mask).loss; };
    CHECK(oracle::fd_gradient_error(f1, W1, gr.dW1) < 1e-5);
    CHECK(oracle::fd_gradient_error(f2, W2, gr.dW2) < 1e-5);
    ++checked;
  }
  CHECK(checked >= 12);
}

TEST_CASE("gcn gradient structure at special points") {
  Rng rng(807);
  Graph g = oracle::random_connected_graph(10, rng);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);
  Mat X = random_mat(10, 3, rng);
  Mat W1 = random_mat(3, 4, rng);
  std::vector<int> labels(10);
  for (int& y : labels) y = static_cast<int>(rng.below(3));
  std::vector<int> mask = all_nodes(10);

  // With W2 = 0 the logits vanish: uniform loss, no signal into W1.
  GcnGrads gr = gcn_forward_backward(W1, Mat::Zero(4, 3), S, X, labels, mask);
  CHECK(gr.loss == Catch::Approx(std::log(3.0)).margin(1e-12));
  CHECK(gr.dW1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(gr.dW2.cwiseAbs().maxCoeff() > 0.0);

  // All-positive preactivations make the network linear, so the gradients
  // reduce to the two-layer linear formulas.
  Mat Xp = X.cwiseAbs().array() + 0.1;
  Mat W1p = W1.cwiseAbs().array() + 0.1;
  Mat W2 = random_mat(4, 3, rng);
  GcnGrads lin = gcn_forward_backward(W1p, W2, S, Xp, labels, mask);
  Mat H1 = S * (Xp * W1p);
  REQUIRE(H1.minCoeff() > 0.0);
  Mat Z2 = S * (H1 * W2);
  auto [loss, G] = cross_entropy_masked(Z2, labels, mask);
  Mat St = Mat(S).transpose();
  Mat dM2 = St * G;
  CHECK(lin.loss == loss);
  CHECK(max_abs_diff(lin.dW2, H1.transpose() * dM2) < 1e-13);
  CHECK(max_abs_diff(lin.dW1, Xp.transpose() * (St * Mat(dM2 * W2.transpose()))) < 1e-13);
}

TEST_CASE("divergence guard names the failing epoch") {
  CHECK_THROWS_WITH(detail::guard_finite(std::numeric_limits<double>::quiet_NaN(), 7),
                    Catch::Matchers::ContainsSubstring("epoch 7"));
  CHECK_NOTHROW(detail::guard_finite(1.5, 3));
}

TEST_CASE("a lossless coarsening reproduces the full risk for any weights") {
  Rng rng(808);
  Graph g = oracle::random_connected_graph(24, rng);
  SpMat S0 = build_propagation(g, PropagationKind::GcnNorm);
  Coarsening c = from_partition(oracle::random_partition(24, 8, rng));

  // Projecting the propagation and the features onto the coarsening's range
  // removes the entire restriction error.
  Mat Pid = Mat(c.Pi);
  SpMat S = SpMat((Pid * Mat(S0) * Pid).sparseView());
  Mat X = Pid * random_mat(24, 4, rng);
  SpMat S_c = coarse_operator(S, g.adjacency, PropagationKind::GcnNorm, c, CoarseOperatorKind::MP);

  std::vector<int> labels(24);
  for (int& y : labels) y = static_cast<int>(rng.below(3));
  std::vector<int> mask{0, 3, 5, 8, 11, 14, 17, 20, 23};

  const int k = 3;
  Mat F_full = sgc_precompute(S, X, k);
  Mat F_coarse = sgc_precompute(S_c, c.Q * X, k);
  for (int trial = 0; trial < 20; ++trial) {
    Mat theta = random_mat(4, 3, rng);
    Mat full_logits = F_full * theta;
    Mat lifted = c.Q_plus * (F_coarse * theta);
    CHECK(max_abs_diff(full_logits, lifted) < 1e-8);
    double rf = cross_entropy_masked(full_logits, labels, mask).first;
    double rc = cross_entropy_masked(lifted, labels, mask).first;
    CHECK(rc == Catch::Approx(rf).margin(1e-8));
  }
}

TEST_CASE("coarse training tracks full training on a planted partition") {
  PlantedPartitionConfig pcfg;
  pcfg.n = 240;
  pcfg.seed = 1;
  Graph g = planted_partition_graph(pcfg);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);
  SemiNormContext ctx = make_context(build_laplacian(g, LaplacianKind::shifted(0.001)));
  SpectralBasis basis = spectral_subspace(ctx, default_subspace_dim(g.num_nodes()));

  LoukasConfig lcfg;
  lcfg.ratio = 0.5;
  LoukasResult lk = loukas_coarsen(g, ctx, basis, lcfg, LaplacianKind::shifted(0.001), S);
  SpMat S_c =
      coarse_operator(S, g.adjacency, PropagationKind::GcnNorm, lk.coarsening, CoarseOperatorKind::MP);

  TrainConfig cfg;
  cfg.epochs = 200;
  double full_sum = 0.0, coarse_sum = 0.0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    cfg.seed = seed;
    full_sum += train_sgc_full(S, g.features, g.labels, g.splits, 2, cfg).test_acc_at_best;
    coarse_sum +=
        train_sgc_coarse(S_c, lk.coarsening, g.features, g.labels, g.splits, 2, cfg).test_acc_at_best;
  }
  double full_mean = full_sum / 4.0;
  double coarse_mean = coarse_sum / 4.0;
  CHECK(full_mean > 0.85);
  CHECK(coarse_mean >= full_mean - 0.08);
}

TEST_CASE("gcn training learns the planted partition") {
  PlantedPartitionConfig pcfg;
  pcfg.n = 120;
  pcfg.seed = 2;
  Graph g = planted_partition_graph(pcfg);
  SpMat S = build_propagation(g, PropagationKind::GcnNorm);

  TrainConfig cfg;
  cfg.epochs = 60;
  GcnResult res = train_gcn_full(S, g.features, g.labels, g.splits, cfg);
  REQUIRE(res.history.size() == 60);
  CHECK(res.best_epoch >= 1);
  CHECK(res.best_epoch <= 60);
  CHECK(res.history.back().train_acc > 0.8);
  CHECK(res.best_val_acc >= 0.0);
  CHECK(res.best_val_acc <= 1.0);
  CHECK(res.W1_best.rows() == g.features.cols());
  CHECK(res.W2_best.cols() == num_classes(g.labels));

  SplitMasks empty_train;
  CHECK_THROWS_WITH(train_gcn_full(S, g.features, g.labels, empty_train, cfg),
                    Catch::Matchers::ContainsSubstring("empty train mask"));
}
