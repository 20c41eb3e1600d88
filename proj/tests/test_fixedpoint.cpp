#include "mvt/fixedpoint.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace mvt;
using namespace mvt_test;

namespace {

Partition path3_partition() {
  Partition p;
  p.labeled = {0};
  p.unlabeled = {1, 2};
  p.n = 3;
  return p;
}

TransductiveSmoother path3_stochastic() {
  Eigen::MatrixXd A(3, 3);
  A << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  return stochastic_smoother(A, path3_partition());
}

// random symmetric-form smoother: S_UU symmetric, handy for exact norm bounds
TransductiveSmoother random_symmetric_smoother(std::mt19937_64& rng, int n) {
  const PenaltyMatrix pen = combinatorial_laplacian(random_adjacency(rng, n));
  const double lambda = std::pow(10.0, uniform(rng, -1.5, 1.5));
  return symmetric_smoother(pen, lambda, random_partition(rng, n, 2));
}

}  // namespace

TEST_CASE("closed form: path graph propagates the single label") {
  const TransductiveSmoother S = path3_stochastic();
  Eigen::VectorXd y_L(1);
  y_L << 1.0;
  const FixedPointFit fit = closed_form_fit(S, y_L);
  // (I - S_UU)^{-1} S_UL = [1; 1] by the 2x2 solve
  CHECK(fit.yhat_U[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.yhat_U[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.yhat_L[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((fit.yhat_L - fit.M_LL * y_L).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fit.yhat_U - fit.M_UL * y_L).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("closed form: zero unlabeled block means one-step propagation") {
  std::mt19937_64 rng(101);
  const int n = 8;
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = uniform(rng, 0.0, 0.2);
  Partition part = random_partition(rng, n, 3);
  for (int i : part.unlabeled)
    for (int j : part.unlabeled) S(i, j) = 0.0;
  const TransductiveSmoother sm = make_transductive(S, part, SmootherForm::Centered);
  Eigen::VectorXd y_L = random_vector(rng, part.m());
  const FixedPointFit fit = closed_form_fit(sm, y_L);
  CHECK((fit.yhat_U - sm.ul() * y_L).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("closed form: linear in the labels") {
  std::mt19937_64 rng(103);
  const TransductiveSmoother S = random_symmetric_smoother(rng, 12);
  const Eigen::VectorXd y_L = random_vector(rng, S.partition.m());
  const double c = uniform(rng, -3.0, 3.0);
  const FixedPointFit a = closed_form_fit(S, y_L);
  const FixedPointFit b = closed_form_fit(S, (c * y_L).eval());
  CHECK((b.yhat_U - c * a.yhat_U).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((b.yhat_L - c * a.yhat_L).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("self-training: a fixed-point start converges in one iteration") {
  const TransductiveSmoother S = path3_stochastic();
  Eigen::VectorXd y_L(1);
  y_L << 2.5;
  const FixedPointFit exact = closed_form_fit(S, y_L);
  const FixedPointFit fit = self_train_fit(S, y_L, exact.yhat_U, 1e-10, 100);
  CHECK(fit.converged);
  CHECK(fit.iterations == 1);
}

TEST_CASE("self-training: geometric iteration reaches the closed form") {
  const TransductiveSmoother S = path3_stochastic();
  Eigen::VectorXd y_L(1);
  y_L << 1.0;
  const double delta = 1e-12;
  const FixedPointFit fit = self_train_fit(S, y_L, Eigen::VectorXd::Zero(2), delta, 100000);
  CHECK(fit.converged);
  const FixedPointFit exact = closed_form_fit(S, y_L);
  const double bound = delta / (1.0 - S.rho_uu);
  CHECK((fit.yhat_U - exact.yhat_U).cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("self-training: contraction at the rate of the unlabeled radius") {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const TransductiveSmoother S = random_symmetric_smoother(rng, uniform_int(rng, 6, 16));
    if (S.rho_uu < 1e-8) continue;
    const Eigen::VectorXd y_L = random_vector(rng, S.partition.m());
    const FixedPointFit exact = closed_form_fit(S, y_L);
    const Eigen::VectorXd y0 = random_vector(rng, S.partition.u(), -2.0, 2.0);
    const double err0 = (y0 - exact.yhat_U).norm();
    for (int k : {1, 3, 7}) {
      // exactly k iterations: tiny delta never stops early, max_iter = k
      const FixedPointFit fit = self_train_fit(S, y_L, y0, 1e-300, k);
      const double err = (fit.yhat_U - exact.yhat_U).norm();
      // S_UU symmetric: the 2-norm error contracts by rho_uu each step
      CHECK(err <= std::pow(S.rho_uu, k) * err0 * (1.0 + 1e-9) + 1e-12);
    }
  }
}

TEST_CASE("newton: one step solves the affine fixed point") {
  std::mt19937_64 rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    const TransductiveSmoother S = random_symmetric_smoother(rng, uniform_int(rng, 5, 14));
    const Eigen::VectorXd y_L = random_vector(rng, S.partition.m());
    const Eigen::VectorXd y0 = random_vector(rng, S.partition.u(), -5.0, 5.0);
    const FixedPointFit newton = newton_fit(S, y_L, y0, 1e-300, 1);
    const FixedPointFit exact = closed_form_fit(S, y_L);
    CHECK((newton.yhat_U - exact.yhat_U).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("newton: zero update at the fixed point, equals self-training when S_UU = 0") {
  const TransductiveSmoother S = path3_stochastic();
  Eigen::VectorXd y_L(1);
  y_L << -1.5;
  const FixedPointFit exact = closed_form_fit(S, y_L);
  const FixedPointFit fit = newton_fit(S, y_L, exact.yhat_U, 1e-10, 50);
  CHECK(fit.converged);
  CHECK(fit.iterations == 1);

  std::mt19937_64 rng(113);
  const int n = 7;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = uniform(rng, 0.0, 0.2);
  Partition part = random_partition(rng, n, 3);
  for (int i : part.unlabeled)
    for (int j : part.unlabeled) M(i, j) = 0.0;
  const TransductiveSmoother sm = make_transductive(M, part, SmootherForm::Centered);
  const Eigen::VectorXd yl = random_vector(rng, part.m());
  const Eigen::VectorXd y0 = random_vector(rng, part.u());
  const FixedPointFit nf = newton_fit(sm, yl, y0, 1e-300, 1);
  const FixedPointFit st = self_train_fit(sm, yl, y0, 1e-300, 1);
  CHECK((nf.yhat_U - st.yhat_U).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("methods agree and satisfy the fixed-point residual") {
  std::mt19937_64 rng(127);
  for (int trial = 0; trial < 20; ++trial) {
    const TransductiveSmoother S = random_symmetric_smoother(rng, uniform_int(rng, 5, 20));
    const Eigen::VectorXd y_L = random_vector(rng, S.partition.m());
    const FixedPointFit closed = closed_form_fit(S, y_L);
    const FixedPointFit st = self_train_fit(S, y_L, {}, 1e-10, 100000);
    const FixedPointFit nt = newton_fit(S, y_L, {}, 1e-10, 100);
    CHECK((closed.yhat_U - st.yhat_U).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((closed.yhat_U - nt.yhat_U).cwiseAbs().maxCoeff() < 1e-6);
    for (const FixedPointFit* fit : {&closed, &st, &nt}) {
      const Eigen::VectorXd resid = fit->yhat_U - S.ul() * y_L - S.uu() * fit->yhat_U;
      CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("stochastic fixed point solves the harmonic system") {
  std::mt19937_64 rng(131);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 5, 18);
    const Eigen::MatrixXd A = random_adjacency(rng, n, 0.02);
    const Partition part = random_partition(rng, n, 2);
    const TransductiveSmoother S = stochastic_smoother(A, part);
    const Eigen::VectorXd y_L = random_vector(rng, part.m());
    const FixedPointFit fit = closed_form_fit(S, y_L);
    // independent route: (D_UU - A_UU) y_U = A_UL Y_L on the raw adjacency
    const Eigen::MatrixXd A_UU = pick(A, part.unlabeled, part.unlabeled);
    const Eigen::MatrixXd A_UL = pick(A, part.unlabeled, part.labeled);
    Eigen::MatrixXd D_UU = Eigen::MatrixXd::Zero(part.u(), part.u());
    for (int i = 0; i < part.u(); ++i) D_UU(i, i) = A.row(part.unlabeled[i]).sum();
    const Eigen::VectorXd harmonic =
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(D_UU - A_UU).solve(A_UL * y_L);
    CHECK((fit.yhat_U - harmonic).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("single label on a connected graph fits a constant") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i + 1 < 5; ++i) A(i, i + 1) = A(i + 1, i) = 1.0;
  Partition part;
  part.labeled = {2};
  part.unlabeled = {0, 1, 3, 4};
  part.n = 5;
  Eigen::VectorXd y_L(1);
  y_L << 3.25;
  const FixedPointFit fit = closed_form_fit(stochastic_smoother(A, part), y_L);
  CHECK((fit.yhat_U.array() - 3.25).abs().maxCoeff() < 1e-10);
  CHECK((fit.yhat_L.array() - 3.25).abs().maxCoeff() < 1e-10);
}

TEST_CASE("semiparametric: zero smoother reduces to ordinary least squares") {
  std::mt19937_64 rng(137);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 8, 20);
    const int p = uniform_int(rng, 1, 3);
    FeatureView X;
    X.name = "x";
    X.data = Eigen::MatrixXd(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X.data(i, j) = uniform(rng, -2.0, 2.0);
    Partition part = random_partition(rng, n, p + 2);
    const TransductiveSmoother zero =
        make_transductive(Eigen::MatrixXd::Zero(n, n), part, SmootherForm::Centered);
    const Eigen::VectorXd y_L = random_vector(rng, part.m());
    const SemiparametricFit fit = semiparametric_fit(X, zero, y_L);
    // supervised least squares through an independent QR route
    const Eigen::MatrixXd X_L = X.data(part.labeled, Eigen::all);
    const Eigen::VectorXd ols = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(X_L).solve(y_L);
    CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.f2_L.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("semiparametric: exact linear data") {
  FeatureView X;
  X.name = "x";
  X.data = Eigen::MatrixXd(2, 1);
  X.data << 1.0, 2.0;
  Partition part;
  part.labeled = {0, 1};
  part.n = 2;
  Eigen::VectorXd y_L(2);
  y_L << 2.0, 4.0;
  const TransductiveSmoother zero =
      make_transductive(Eigen::MatrixXd::Zero(2, 2), part, SmootherForm::Centered);
  const SemiparametricFit fit = semiparametric_fit(X, zero, y_L);
  CHECK(fit.beta[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.f2_L.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("semiparametric: labeled fit matches the profiled display") {
  std::mt19937_64 rng(139);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 8, 18);
    FeatureView X;
    X.name = "x";
    X.data = Eigen::MatrixXd(n, 2);
    for (int i = 0; i < n; ++i) {
      X.data(i, 0) = uniform(rng, -2.0, 2.0);
      X.data(i, 1) = uniform(rng, -2.0, 2.0);
    }
    const TransductiveSmoother S = random_symmetric_smoother(rng, n);
    if (S.partition.m() < 4) continue;
    const Eigen::VectorXd y_L = random_vector(rng, S.partition.m());
    const SemiparametricFit fit = semiparametric_fit(X, S, y_L);
    // recompute eta_L = (I - M_LL) X_L beta + M_LL Y_L from the closed form
    const FixedPointFit cf = closed_form_fit(S, y_L);
    const Eigen::MatrixXd X_L = X.data(S.partition.labeled, Eigen::all);
    const Eigen::VectorXd eta_L = X_L * fit.beta - cf.M_LL * (X_L * fit.beta) + cf.M_LL * y_L;
    const Eigen::VectorXd got = pick(fit.yhat, S.partition.labeled);
    CHECK((got - eta_L).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("semiparametric: collinear labeled features raise") {
  FeatureView X;
  X.name = "x";
  X.data = Eigen::MatrixXd(3, 2);
  X.data << 1, 2, 2, 4, 3, 6;  // second column is twice the first
  Partition part;
  part.labeled = {0, 1, 2};
  part.n = 3;
  const TransductiveSmoother zero =
      make_transductive(Eigen::MatrixXd::Zero(3, 3), part, SmootherForm::Centered);
  Eigen::VectorXd y_L(3);
  y_L << 1, 2, 3;
  CHECK_THROWS_WITH_AS(semiparametric_fit(X, zero, y_L), doctest::Contains("collinear"),
                       std::runtime_error);
}
