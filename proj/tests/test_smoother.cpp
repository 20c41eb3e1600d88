#include "mvt/smoother.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace mvt;
using namespace mvt_test;

namespace {

Partition two_node_partition() {
  Partition p;
  p.labeled = {0};
  p.unlabeled = {1};
  p.n = 2;
  return p;
}

Partition path3_partition() {
  Partition p;
  p.labeled = {0};
  p.unlabeled = {1, 2};
  p.n = 3;
  return p;
}

Eigen::MatrixXd path3_adjacency() {
  Eigen::MatrixXd A(3, 3);
  A << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  return A;
}

}  // namespace

TEST_CASE("kernel weights: exponential kernel on pairwise distances") {
  FeatureView view;
  view.name = "x";
  const double gamma = 0.7;
  view.data = Eigen::MatrixXd(3, 1);
  view.data << 0.0, gamma, 0.0;  // rows 0 and 2 identical
  const Eigen::MatrixXd W = kernel_weights(view, {gamma, DistanceKind::Euclidean});
  CHECK(W(0, 0) == doctest::Approx(1.0).epsilon(1e-14));             // d = 0
  CHECK(W(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));  // d = gamma
  CHECK(W(0, 2) == doctest::Approx(1.0).epsilon(1e-14));             // identical rows
  CHECK((W - W.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kernel weights: cosine dissimilarity and the zero-vector error") {
  FeatureView view;
  view.name = "x";
  view.data = Eigen::MatrixXd(2, 2);
  view.data << 1.0, 0.0, 0.0, 1.0;  // orthogonal rows, d = 1
  const Eigen::MatrixXd W = kernel_weights(view, {1.0, DistanceKind::CosineDissimilarity});
  CHECK(W(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  view.data.row(1).setZero();  // cosine distance undefined
  CHECK_THROWS_WITH_AS(kernel_weights(view, {1.0, DistanceKind::CosineDissimilarity}),
                       doctest::Contains("non-finite distance"), std::runtime_error);
}

TEST_CASE("kernel weights: gamma must be positive") {
  FeatureView view;
  view.data = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(kernel_weights(view, {0.0, DistanceKind::Euclidean}), std::invalid_argument);
}

TEST_CASE("knn graph: top-k retention with union symmetrization") {
  Eigen::MatrixXd W(3, 3);
  W << 0, .9, .1, .9, 0, .5, .1, .5, 0;
  // row top-1 picks enumerated by hand: 0->1, 1->0, 2->1
  const Eigen::MatrixXd A = knn_graph(W, 1);
  Eigen::MatrixXd expected(3, 3);
  expected << 0, .9, 0, .9, 0, .5, 0, .5, 0;
  CHECK((A - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("knn graph: k = n-1 keeps everything, ties keep the lower index") {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd W = random_adjacency(rng, 6, 0.05);
  Eigen::MatrixXd A = knn_graph(W, 5);
  Eigen::MatrixXd expected = W;
  expected.diagonal().setZero();
  CHECK((A - expected).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd T(3, 3);
  T << 0, .5, .5, .5, 0, .9, .5, .9, 0;
  // row 0 ties at .5: index 1 wins; rows 1 and 2 pick each other
  const Eigen::MatrixXd K = knn_graph(T, 1);
  Eigen::MatrixXd expected_tie(3, 3);
  expected_tie << 0, .5, 0, .5, 0, .9, 0, .9, 0;
  CHECK((K - expected_tie).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(knn_graph(T, 0), std::invalid_argument);
  CHECK_THROWS_AS(knn_graph(T, 3), std::invalid_argument);
}

TEST_CASE("combinatorial laplacian: definition, zero row sums, PSD") {
  const Eigen::MatrixXd A = path3_adjacency();
  const PenaltyMatrix pen = combinatorial_laplacian(A, "path");
  Eigen::MatrixXd expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((pen.P - expected).cwiseAbs().maxCoeff() == 0.0);

  CHECK(combinatorial_laplacian(Eigen::MatrixXd::Zero(4, 4)).P.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 3, 12);
    const Eigen::MatrixXd W = random_adjacency(rng, n, 0.01);
    const Eigen::MatrixXd P = combinatorial_laplacian(W).P;
    CHECK((P * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-12 * n);
    // quadratic form against the brute-force double sum
    const Eigen::VectorXd x = random_vector(rng, n);
    double brute = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) brute += W(i, j) * (x[i] - x[j]) * (x[i] - x[j]);
    CHECK(x.dot(P * x) == doctest::Approx(brute).epsilon(1e-10));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }

  Eigen::MatrixXd bad(2, 2);
  bad << 0, 1, 2, 0;
  CHECK_THROWS_AS(combinatorial_laplacian(bad), std::invalid_argument);
}

TEST_CASE("combinatorial laplacian: self-loops cancel out") {
  Eigen::MatrixXd W = path3_adjacency();
  Eigen::MatrixXd W_loops = W;
  W_loops.diagonal() << 2.0, 0.5, 1.0;
  CHECK((combinatorial_laplacian(W_loops).P - combinatorial_laplacian(W).P)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("stochastic smoother: row normalization and the path-graph radius") {
  const TransductiveSmoother S = stochastic_smoother(path3_adjacency(), path3_partition());
  Eigen::MatrixXd expected(3, 3);
  expected << 0, 1, 0, .5, 0, .5, 0, 1, 0;
  CHECK((S.S - expected).cwiseAbs().maxCoeff() < 1e-15);
  // S_UU = [[0, .5], [1, 0]] has characteristic polynomial l^2 = 1/2
  CHECK(S.rho_uu == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("stochastic smoother: zero-degree node is named, membership enforced") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A(0, 1) = A(1, 0) = 1.0;  // node 2 isolated
  CHECK_THROWS_WITH_AS(stochastic_smoother(A, path3_partition()), doctest::Contains("node 2"),
                       std::runtime_error);

  // disconnected unlabeled component: rho_uu = 1, constructor must reject
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(4, 4);
  B(0, 1) = B(1, 0) = 1.0;
  B(2, 3) = B(3, 2) = 1.0;
  Partition part;
  part.labeled = {0, 1};
  part.unlabeled = {2, 3};
  part.n = 4;
  CHECK_THROWS_WITH_AS(stochastic_smoother(B, part), doctest::Contains("not a transductive"),
                       std::runtime_error);
}

TEST_CASE("stochastic smoother: nonnegative entries and unit row sums") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 4, 20);
    const Eigen::MatrixXd A = random_adjacency(rng, n, 0.02);
    const TransductiveSmoother S = stochastic_smoother(A, random_partition(rng, n, 1));
    CHECK(S.S.minCoeff() >= 0.0);
    CHECK((S.S.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("regularized smoother: two-node case solves to the adjacency") {
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, 1, 0;
  // P = [[1,-1],[-1,1]]; A + P = I, so S = A
  const TransductiveSmoother S = regularized_smoother(A, 1.0, two_node_partition());
  CHECK((S.S - A).cwiseAbs().maxCoeff() < 1e-14);

  // lambda -> 0 with invertible A recovers the identity; the identity is in
  // the transductive class only when everything is labeled
  Partition full;
  full.labeled = {0, 1};
  full.n = 2;
  const TransductiveSmoother S0 = regularized_smoother(A, 1e-12, full);
  CHECK((S0.S - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(regularized_smoother(A, 1e-12, two_node_partition()), std::runtime_error);
}

TEST_CASE("regularized smoother: S*1 = 1 for any lambda") {
  // algebraic identity (A + lambda*P)*1 = A*1; checked on the raw solve so it
  // covers lambdas outside the transductive class too
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = uniform_int(rng, 3, 15);
    const Eigen::MatrixXd A = random_adjacency(rng, n, 0.05);
    const double lambda = std::pow(10.0, uniform(rng, -2.0, 2.0));
    const Eigen::MatrixXd P = combinatorial_laplacian(A).P;
    const Eigen::MatrixXd S = Eigen::FullPivLU<Eigen::MatrixXd>(A + lambda * P).solve(A);
    CHECK((S.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-9);
  }
  // within the class (lambda >= 1 keeps the pencil diagonally dominant here)
  std::mt19937_64 rng2(32);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng2, 3, 15);
    const Eigen::MatrixXd A = random_adjacency(rng2, n, 0.05);
    const double lambda = std::pow(10.0, uniform(rng2, 0.0, 2.0));
    const TransductiveSmoother S = regularized_smoother(A, lambda, random_partition(rng2, n, 1));
    CHECK((S.S.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("symmetric smoother: hand-solved 2x2 and the identity limit") {
  PenaltyMatrix pen;
  pen.P = Eigen::MatrixXd(2, 2);
  pen.P << 1, -1, -1, 1;
  // invert [[2,-1],[-1,2]]: determinant 3
  const TransductiveSmoother S = symmetric_smoother(pen, 1.0, two_node_partition());
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3;
  CHECK((S.S - expected).cwiseAbs().maxCoeff() < 1e-14);

  // P = 0 gives the identity smoother; valid only when fully labeled
  PenaltyMatrix zero;
  zero.P = Eigen::MatrixXd::Zero(2, 2);
  Partition full;
  full.labeled = {0, 1};
  full.n = 2;
  const TransductiveSmoother I = symmetric_smoother(zero, 1.0, full);
  CHECK((I.S - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(I.rho_uu == 0.0);
  CHECK_THROWS_AS(symmetric_smoother(zero, 1.0, two_node_partition()), std::runtime_error);
}

TEST_CASE("symmetric smoother: eigenvalues in (0, 1]") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = uniform_int(rng, 3, 15);
    const PenaltyMatrix pen = combinatorial_laplacian(random_adjacency(rng, n));
    const double lambda = std::pow(10.0, uniform(rng, -2.0, 2.0));
    const TransductiveSmoother S = symmetric_smoother(pen, lambda, random_partition(rng, n, 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.S);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("shortest-path completion: kernel on path distances") {
  const Eigen::MatrixXd out = shortest_path_complete(path3_adjacency(), {1.0});
  CHECK(out(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(out(0, 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));  // two hops
  CHECK(out(0, 0) == 0.0);

  // weighted edges use length 1/weight
  Eigen::MatrixXd W(2, 2);
  W << 0, 2, 2, 0;
  CHECK(shortest_path_complete(W, {1.0})(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));

  // an already-complete component is recomputed from unit hop distances
  Eigen::MatrixXd K3 = Eigen::MatrixXd::Ones(3, 3);
  K3.diagonal().setZero();
  const Eigen::MatrixXd K3c = shortest_path_complete(K3, {2.0});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(K3c(i, j) == doctest::Approx(i == j ? 0.0 : std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("shortest-path completion: repairs sparse labeling within components") {
  // two 3-node paths, one label in each; raw paths leave far nodes labeled-free
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(6, 6);
  auto edge = [&](int i, int j) { A(i, j) = A(j, i) = 1.0; };
  edge(0, 1);
  edge(1, 2);
  edge(3, 4);
  edge(4, 5);
  Partition part;
  part.labeled = {0, 3};
  part.unlabeled = {1, 2, 4, 5};
  part.n = 6;
  const Eigen::MatrixXd completed = shortest_path_complete(A, {1.0});
  CHECK(completed(0, 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(completed(0, 3) == 0.0);  // across components stays zero
  const TransductiveSmoother S = stochastic_smoother(completed, part);
  CHECK(S.rho_uu < 1.0);
}

TEST_CASE("interaction graphs: geometric and arithmetic composites") {
  Eigen::MatrixXd W1(2, 2), W2(2, 2);
  W1 << 0, 4, 4, 0;
  W2 << 0, 1, 1, 0;
  const Eigen::MatrixXd inter = interaction_graph(W1, W2, InteractionOp::Intersection);
  CHECK(inter(0, 1) == doctest::Approx(2.0).epsilon(1e-15));  // sqrt(4*1)
  const Eigen::MatrixXd uni = interaction_graph(W1, W2, InteractionOp::Union);
  CHECK(uni(0, 1) == doctest::Approx(2.5).epsilon(1e-15));  // (4+1)/2
  CHECK(interaction_graph(W1, Eigen::MatrixXd::Zero(2, 2), InteractionOp::Intersection)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK_THROWS_AS(interaction_graph(W1, Eigen::MatrixXd::Zero(3, 3), InteractionOp::Union),
                  std::invalid_argument);
}

TEST_CASE("interaction graphs: intersection never exceeds union") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 2, 10);
    const Eigen::MatrixXd W1 = random_adjacency(rng, n, 0.1);
    const Eigen::MatrixXd W2 = random_adjacency(rng, n, 0.1);
    const Eigen::MatrixXd inter = interaction_graph(W1, W2, InteractionOp::Intersection);
    const Eigen::MatrixXd uni = interaction_graph(W1, W2, InteractionOp::Union);
    CHECK((uni - inter).minCoeff() >= -1e-14);
  }
}

TEST_CASE("spectral radius of the unlabeled block") {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3, 3);
  S(1, 2) = 0.5;
  S(2, 1) = 1.0;
  CHECK(spectral_radius_uu(S, path3_partition()) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(spectral_radius_uu(Eigen::MatrixXd::Zero(3, 3), path3_partition()) == 0.0);
  CHECK(spectral_radius_uu(Eigen::MatrixXd::Identity(3, 3), path3_partition()) == 1.0);

  Partition full;
  full.labeled = {0, 1, 2};
  full.n = 3;
  CHECK(spectral_radius_uu(Eigen::MatrixXd::Identity(3, 3), full) == 0.0);

  CHECK_THROWS_AS(
      make_transductive(Eigen::MatrixXd::Identity(3, 3), path3_partition(), SmootherForm::Centered),
      std::runtime_error);
}

TEST_CASE("spectral radius: power iteration agrees with the dense oracle") {
  std::mt19937_64 rng(61);
  const int n = 230;  // above the dense cutoff
  const Eigen::MatrixXd A = random_adjacency(rng, n, 0.01);
  const Eigen::VectorXd deg = A.rowwise().sum();
  const Eigen::MatrixXd S = deg.cwiseInverse().asDiagonal() * A;
  Partition part = random_partition(rng, n, 10);
  while (part.u() <= 200) part = random_partition(rng, n, 10);
  const double mine = spectral_radius_uu(S, part);
  const double oracle = dense_radius_oracle(pick(S, part.unlabeled, part.unlabeled));
  CHECK(mine == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("permutation equivariance of the constructors") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = uniform_int(rng, 4, 12);
    // all-distinct positive weights: the knn tie rule is index-based, so
    // equivariance only holds on tie-free instances
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) W(i, j) = W(j, i) = uniform(rng, 0.1, 1.0);
    const auto perm = random_permutation(rng, n);
    const Eigen::MatrixXd P = permutation_matrix(perm);
    const Eigen::MatrixXd Wp = P * W * P.transpose();
    const Partition part = random_partition(rng, n, 2);
    const Partition part_p = permuted_partition(part, perm);

    CHECK((knn_graph(Wp, 2) - P * knn_graph(W, 2) * P.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((combinatorial_laplacian(Wp).P - P * combinatorial_laplacian(W).P * P.transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    const Eigen::MatrixXd S = stochastic_smoother(W, part).S;
    const Eigen::MatrixXd Sp = stochastic_smoother(Wp, part_p).S;
    CHECK((Sp - P * S * P.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd R = regularized_smoother(W, 2.0, part).S;
    const Eigen::MatrixXd Rp = regularized_smoother(Wp, 2.0, part_p).S;
    CHECK((Rp - P * R * P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
}
