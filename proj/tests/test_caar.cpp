#include <gtest/gtest.h>

#include "gdist/caar.hpp"
#include "oracles.hpp"

using namespace gdist;

namespace {

Matrix random_probs(Index n, Index k, std::mt19937_64& gen) { return oracle::softmax_rows(oracle::random_matrix(n, k, gen, 2.0)); }

Matrix random_symmetric_nonneg(Index n, std::mt19937_64& gen) {
  Matrix a = oracle::random_matrix(n, n, gen).cwiseAbs();
  return 0.25 * (a + a.transpose());
}

// A small refinement problem with random class views.
RefineProblem small_problem(Index n, Index d, Index k, Index n_org, std::mt19937_64& gen) {
  RefineProblem prob;
  prob.z_train = oracle::random_matrix(n_org, d, gen);
  std::uniform_int_distribution<Index> lab(0, k - 1);
  for (Index i = 0; i < n_org; ++i) prob.labels_train.push_back(lab(gen));
  prob.x_prime = oracle::random_matrix(n, d, gen);
  for (Index i = 0; i < n; ++i) prob.y_prime.push_back(i % k);
  for (Index y = 0; y < k; ++y)
    prob.view_operators.push_back(propagation_operator(random_symmetric_nonneg(n, gen), {0.5, 2}));
  return prob;
}

}  // namespace

TEST(CosineDegrees, PathExample) {
  const std::vector<Edge> e{{0, 1, 1.0}, {1, 2, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(3, e);
  Matrix h(3, 2);
  h << 1, 0, 2, 0, 0, 1;
  const Vector d = cosine_degrees(g, h);
  EXPECT_DOUBLE_EQ(d(0), 1.0);
  EXPECT_DOUBLE_EQ(d(1), 1.0 + kCosineFloor);
  EXPECT_DOUBLE_EQ(d(2), kCosineFloor);
}

TEST(CosineDegrees, NegativeAndZeroRowsClampToFloor) {
  const std::vector<Edge> e{{0, 1, 1.0}, {0, 2, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(3, e);
  Matrix h(3, 2);
  h << 1, 0, -1, 0, 0, 0;
  EXPECT_DOUBLE_EQ(cosine_degrees(g, h)(0), 2.0 * kCosineFloor);
}

TEST(CosineDegrees, MatchesPairwiseReference) {
  std::mt19937_64 gen(1);
  const auto edges = oracle::random_edges(15, 0.3, gen, true);
  const Matrix h = oracle::random_matrix(15, 4, gen);
  const Vector d = cosine_degrees(SparseGraph::from_edges(15, edges), h);
  Vector want = Vector::Zero(15);
  for (const auto& e : edges) {
    double c = h.row(e.u).dot(h.row(e.v)) / (h.row(e.u).norm() * h.row(e.v).norm());
    c = std::min(1.0, std::max(kCosineFloor, c));
    want(e.u) += c;
    want(e.v) += c;
  }
  EXPECT_LE((d - want).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Resistance, Example) {
  const std::vector<Edge> e{{0, 1, 1.0}, {1, 2, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(3, e);
  Vector d(3);
  d << 1, 2, 4;
  const Vector r = effective_resistance_approx(g, d);
  EXPECT_DOUBLE_EQ(r(0), 0.75);
  EXPECT_DOUBLE_EQ(r(1), 0.375);
  EXPECT_THROW(effective_resistance_approx(g, Vector::Ones(2)), ShapeError);
}

TEST(ClassEdgeWeights, Example) {
  const std::vector<Edge> e{{0, 1, 1.0}, {1, 2, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(3, e);
  Matrix p(3, 2);
  p << 0.9, 0.1, 0.5, 0.5, 0.2, 0.8;
  Vector r(2);
  r << 1.0, 2.0;
  const Vector w0 = class_edge_weights(g, p, r, 0), w1 = class_edge_weights(g, p, r, 1);
  EXPECT_DOUBLE_EQ(w0(0), 0.45);
  EXPECT_DOUBLE_EQ(w0(1), 0.2);
  EXPECT_DOUBLE_EQ(w1(0), 0.05);
  EXPECT_DOUBLE_EQ(w1(1), 0.8);
  EXPECT_THROW(class_edge_weights(g, p, r, 2), ShapeError);
}

TEST(SampleBudget, CeilingWithGuard) {
  EXPECT_EQ(sample_budget(10, 0.4), 4);
  EXPECT_EQ(sample_budget(10, 0.35), 4);
  EXPECT_EQ(sample_budget(5, 0.4), 2);
  EXPECT_EQ(sample_budget(7, 1.0), 7);
  EXPECT_EQ(sample_budget(0, 0.5), 0);
}

TEST(SampleClassGraphs, KeepsTopEdgesPerClass) {
  // star around node 0 plus a chord
  const std::vector<Edge> e{{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}, {2, 3, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(4, e);
  Matrix p(4, 2);
  p << 0.5, 0.5, 0.9, 0.1, 0.1, 0.9, 0.2, 0.8;
  const Vector r = Vector::Ones(4);
  const auto graphs = sample_class_graphs(g, p, r, 0.5);
  ASSERT_EQ(graphs.size(), 2u);
  // class 0 weights: (0,1) .45, (0,2) .05, (0,3) .1, (2,3) .02
  EXPECT_EQ(graphs[0].num_edges(), 2);
  EXPECT_DOUBLE_EQ(graphs[0].weight(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(graphs[0].weight(0, 3), 1.0);
  EXPECT_DOUBLE_EQ(graphs[0].weight(0, 2), 0.0);
  // class 1 weights: (0,1) .05, (0,2) .45, (0,3) .4, (2,3) .72
  EXPECT_DOUBLE_EQ(graphs[1].weight(2, 3), 1.0);
  EXPECT_DOUBLE_EQ(graphs[1].weight(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(graphs[1].weight(0, 3), 0.0);
}

TEST(SampleClassGraphs, TiesBrokenByEdgeId) {
  const std::vector<Edge> e{{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(4, e);
  const Matrix p = Matrix::Constant(4, 1, 1.0);
  const auto graphs = sample_class_graphs(g, p, Vector::Ones(3), 0.5);
  EXPECT_EQ(graphs[0].num_edges(), 2);
  EXPECT_DOUBLE_EQ(graphs[0].weight(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(graphs[0].weight(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(graphs[0].weight(2, 3), 0.0);
}

TEST(SampleClassGraphs, EdgeWeightModeCarriesScores) {
  const std::vector<Edge> e{{0, 1, 1.0}};
  const SparseGraph g = SparseGraph::from_edges(2, e);
  Matrix p(2, 1);
  p << 0.5, 0.4;
  Vector r(1);
  r << 3.0;
  const auto graphs = sample_class_graphs(g, p, r, 1.0, ClassGraphWeighting::EdgeWeight);
  EXPECT_DOUBLE_EQ(graphs[0].weight(0, 1), 0.6);
}

TEST(SampleClassGraphs, RhoOneKeepsEveryEdge) {
  std::mt19937_64 gen(2);
  const auto edges = oracle::random_edges(12, 0.3, gen, true);
  const SparseGraph a = normalized_adjacency(SparseGraph::from_edges(12, edges));
  const Matrix p = random_probs(12, 3, gen);
  const auto graphs = sample_class_graphs(a, p, Vector::Ones(a.num_edges()), 1.0);
  for (const auto& s : graphs) {
    EXPECT_EQ(s.num_edges(), a.num_edges());
    for (const auto& ed : a.edge_list()) EXPECT_DOUBLE_EQ(s.weight(ed.u, ed.v), ed.weight);
  }
}

TEST(SampleClassGraphs, EquivariantUnderNodeRelabeling) {
  std::mt19937_64 gen(3);
  const Index N = 20;
  const auto edges = oracle::random_edges(N, 0.25, gen, true);
  const Matrix h = oracle::random_matrix(N, 4, gen), p = random_probs(N, 3, gen);
  std::vector<Index> perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<Edge> moved;
  for (const auto& e : edges) moved.push_back({perm[static_cast<std::size_t>(e.u)], perm[static_cast<std::size_t>(e.v)], e.weight});
  Matrix hp(N, 4), pp(N, 3);
  for (Index i = 0; i < N; ++i) {
    hp.row(perm[static_cast<std::size_t>(i)]) = h.row(i);
    pp.row(perm[static_cast<std::size_t>(i)]) = p.row(i);
  }
  auto run = [](const std::vector<Edge>& es, const Matrix& hh, const Matrix& pr) {
    const SparseGraph a = normalized_adjacency(SparseGraph::from_edges(20, es));
    return sample_class_graphs(a, pr, effective_resistance_approx(a, cosine_degrees(a, hh)), 0.4);
  };
  const auto base = run(edges, h, p), other = run(moved, hp, pp);
  for (std::size_t y = 0; y < 3; ++y)
    for (Index u = 0; u < N; ++u)
      for (Index v = 0; v < N; ++v)
        EXPECT_NEAR(base[y].weight(u, v),
                    other[y].weight(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]), 1e-15);
}

TEST(CondenseClassGraphs, MatchesDenseProduct) {
  std::mt19937_64 gen(4);
  const auto edges = oracle::random_edges(10, 0.4, gen, true);
  const SparseGraph g = SparseGraph::from_edges(10, edges);
  const Clustering c = make_clustering({0, 1, 2, 0, 1, 2, 0, 1, 2, 0}, 3);
  const auto s = sketching_matrices(c);
  const auto out = condense_class_graphs(s.sketch, {g});
  const Matrix k = Eigen::MatrixXd(s.sketch);
  EXPECT_LE((out[0] - k.transpose() * oracle::dense_adjacency(10, edges) * k).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SynLoss, Examples) {
  Matrix p(2, 2);
  p << 1.0, 0.0, 0.25, 0.75;
  const std::vector<Index> y{0, 1};
  EXPECT_NEAR(syn_loss({p}, y), -std::log(0.75) / 2.0, 1e-15);
  EXPECT_NEAR(syn_loss({p, p}, y), -std::log(0.75), 1e-15);
}

// Views are summed, not averaged: K uniform views cost K ln K.
TEST(SynLoss, UniformViewsCostKLogK) {
  for (Index k = 2; k <= 6; ++k) {
    const std::vector<Matrix> views(static_cast<std::size_t>(k), Matrix::Constant(5, k, 1.0 / static_cast<double>(k)));
    std::vector<Index> y(5);
    for (Index i = 0; i < 5; ++i) y[static_cast<std::size_t>(i)] = i % k;
    EXPECT_NEAR(syn_loss(views, y), static_cast<double>(k) * std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(ConsistencyLoss, ZeroIffViewsAgree) {
  std::mt19937_64 gen(5);
  const Matrix p = random_probs(6, 3, gen);
  EXPECT_LE(consistency_loss({p, p, p}), 1e-28);  // mean of equal rows, up to rounding
  for (int rep = 0; rep < 20; ++rep) {
    const std::vector<Matrix> v{random_probs(6, 3, gen), random_probs(6, 3, gen)};
    EXPECT_GT(consistency_loss(v), 0.0);
  }
}

TEST(ConsistencyLoss, TwoViewExample) {
  Matrix a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 1;
  // mean (.5, .5); each view contributes 0.5; divided by n K = 2
  EXPECT_DOUBLE_EQ(consistency_loss({a, b}), 0.5);
}

TEST(ClassRepresentations, ZeroDeltaIsPropagatedPrime) {
  std::mt19937_64 gen(6);
  Rng rng(1);
  const ClassifierParams head = init_classifier(3, 4, 2, 2, 0.0, rng);
  const Matrix x = oracle::random_matrix(4, 3, gen);
  const Matrix a = random_symmetric_nonneg(4, gen);
  const auto reps = class_representations({a, a}, x, Matrix::Zero(4, 3), 0.5, head, 0.6, 2);
  const Matrix want = forward(head, oracle::matpow_series(a, x, 0.6, 2));
  EXPECT_LE((reps[0] - want).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ(reps[0], reps[1]);
}

TEST(RefineGradient, DeltaAndHeadMatchFiniteDifference) {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + rep % 5, d = 2 + rep % 4, k = 2 + rep % 2;
    RefineProblem prob = small_problem(n, d, k, 8, gen);
    Rng rng(static_cast<std::uint64_t>(rep));
    ClassifierParams head = init_classifier(d, 4, k, 1 + rep % 2, 0.0, rng);
    RefineConfig cfg;
    cfg.beta = 0.7;
    cfg.gamma = 1.5;
    cfg.lambda = 3.0;
    cfg.weight_decay = 1e-3;
    Matrix delta = oracle::random_matrix(n, d, gen);
    Gradients hg, scratch_h;
    Matrix dg, scratch_d;
    refine_loss_and_grad(prob, head, delta, cfg, hg, dg);
    auto f = [&] { return refine_loss_and_grad(prob, head, delta, cfg, scratch_h, scratch_d).total; };
    EXPECT_LE(oracle::relative_error(dg, oracle::numeric_gradient(f, delta)), 1e-4) << "rep " << rep;
    auto ps = head.parameters();
    for (std::size_t q = 0; q < ps.size(); ++q)
      EXPECT_LE(oracle::relative_error(hg[q], oracle::numeric_gradient(f, *ps[q])), 1e-4) << "rep " << rep << " param " << q;
  }
}

TEST(RefineLossParts, TotalCombinesTerms) {
  std::mt19937_64 gen(8);
  RefineProblem prob = small_problem(4, 3, 2, 6, gen);
  Rng rng(2);
  const ClassifierParams head = init_classifier(3, 4, 2, 2, 0.0, rng);
  RefineConfig cfg;
  cfg.weight_decay = 0.0;
  Gradients hg;
  Matrix dg;
  const Matrix delta = oracle::random_matrix(4, 3, gen);
  const RefineLoss l = refine_loss_and_grad(prob, head, delta, cfg, hg, dg);
  EXPECT_NEAR(l.total, l.org + cfg.gamma * l.syn + cfg.lambda * l.cst, 1e-12);
  // org term against a direct cross-entropy of the head on the training rows
  const Matrix p = oracle::softmax_rows(forward(head, prob.z_train));
  double ce = 0;
  for (Index i = 0; i < p.rows(); ++i) ce -= std::log(p(i, prob.labels_train[static_cast<std::size_t>(i)]));
  EXPECT_NEAR(l.org, ce / static_cast<double>(p.rows()), 1e-12);
  // syn and cst against views computed independently
  std::vector<Matrix> views;
  for (const auto& s : prob.view_operators)
    views.push_back(oracle::softmax_rows(forward(head, s * (prob.x_prime + cfg.beta * delta))));
  EXPECT_NEAR(l.syn, syn_loss(views, prob.y_prime), 1e-12);
  EXPECT_NEAR(l.cst, consistency_loss(views), 1e-12);
}

TEST(RefineLossParts, NoSyntheticTermsMeansNoDeltaGradient) {
  std::mt19937_64 gen(9);
  RefineProblem prob = small_problem(4, 3, 2, 6, gen);
  Rng rng(3);
  const ClassifierParams head = init_classifier(3, 4, 2, 2, 0.0, rng);
  RefineConfig cfg;
  cfg.gamma = 0.0;
  cfg.lambda = 0.0;
  cfg.weight_decay = 0.0;
  Gradients hg;
  Matrix dg;
  const RefineLoss l = refine_loss_and_grad(prob, head, oracle::random_matrix(4, 3, gen), cfg, hg, dg);
  EXPECT_EQ(dg, Matrix::Zero(4, 3));
  EXPECT_DOUBLE_EQ(l.total, l.org);
}

TEST(Refine, ZeroEpochsReturnsClusteringAttributes) {
  std::mt19937_64 gen(10);
  const RefineProblem prob = small_problem(5, 3, 2, 6, gen);
  Rng rng(4);
  const ClassifierParams head = init_classifier(3, 4, 2, 2, 0.3, rng);
  RefineConfig cfg;
  cfg.epochs = 0;
  cfg.beta = 123.0;
  const RefineResult r = refine(prob, head, cfg);
  EXPECT_EQ(r.x_refined, prob.x_prime);
  EXPECT_EQ(r.delta, Matrix::Zero(5, 3));
  EXPECT_EQ(r.head.layers[0].weight, head.layers[0].weight);
  EXPECT_TRUE(r.loss_trace.empty());
}

TEST(Refine, ZeroBetaLeavesAttributes) {
  std::mt19937_64 gen(11);
  const RefineProblem prob = small_problem(5, 3, 2, 6, gen);
  Rng rng(5);
  RefineConfig cfg;
  cfg.epochs = 20;
  cfg.beta = 0.0;
  const RefineResult r = refine(prob, init_classifier(3, 4, 2, 2, 0.0, rng), cfg);
  EXPECT_EQ(r.x_refined, prob.x_prime);
}

TEST(Refine, LossDecreasesAndDeterministic) {
  std::mt19937_64 gen(12);
  const RefineProblem prob = small_problem(6, 4, 3, 30, gen);
  Rng rng(6);
  const ClassifierParams head = init_classifier(4, 8, 3, 2, 0.0, rng);
  RefineConfig cfg;
  cfg.epochs = 200;
  cfg.beta = 1.0;
  const RefineResult a = refine(prob, head, cfg), b = refine(prob, head, cfg);
  EXPECT_LT(a.loss_trace.back().total, a.loss_trace.front().total);
  EXPECT_EQ(a.x_refined, b.x_refined);
  EXPECT_NE(a.x_refined, prob.x_prime);
}

TEST(Refine, NonFiniteAttributesDiverge) {
  std::mt19937_64 gen(13);
  RefineProblem prob = small_problem(3, 2, 2, 4, gen);
  prob.x_prime(0, 0) = std::numeric_limits<double>::infinity();
  Rng rng(7);
  RefineConfig cfg;
  cfg.epochs = 5;
  EXPECT_THROW(refine(prob, init_classifier(2, 3, 2, 2, 0.0, rng), cfg), DivergedError);
}

TEST(RefineProblem, SelectsTrainingRows) {
  const Matrix z = (Matrix(3, 1) << 1, 2, 3).finished();
  const std::vector<Index> labels{0, 1, 1};
  const std::vector<std::uint8_t> mask{0, 1, 1};
  const auto prob = RefineProblem::make(z, labels, mask, Matrix::Zero(2, 1), {0, 1}, {Matrix::Identity(2, 2)}, 0.5, 1);
  EXPECT_EQ(prob.z_train.rows(), 2);
  EXPECT_DOUBLE_EQ(prob.z_train(0, 0), 2.0);
  EXPECT_EQ(prob.labels_train, (std::vector<Index>{1, 1}));
  // (1-a) I + (1-a) a I = 0.75 I
  EXPECT_LE((prob.view_operators[0] - 0.75 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  const std::vector<std::uint8_t> none{0, 0, 0};
  EXPECT_THROW(RefineProblem::make(z, labels, none, Matrix::Zero(2, 1), {0, 1}, {}, 0.5, 1), Error);
}
