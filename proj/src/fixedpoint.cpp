#include "mvt/fixedpoint.hpp"

namespace mvt {

namespace {

void check_inputs(const TransductiveSmoother& S, const Eigen::VectorXd& y_L) {
  if (y_L.size() != S.partition.m())
    throw std::invalid_argument("fixed point: Y_L length does not match partition");
}

Eigen::FullPivLU<Eigen::MatrixXd> factor_i_minus_uu(const Eigen::MatrixXd& S_UU) {
  const Eigen::Index u = S_UU.rows();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(u, u) - S_UU);
  if (!lu.isInvertible())
    throw std::runtime_error("fixed point: I - S_UU numerically singular");
  return lu;
}

}  // namespace

LabeledOperator labeled_operator(const Eigen::MatrixXd& S, const Partition& part) {
  if (S.rows() != part.n || S.cols() != part.n)
    throw std::invalid_argument("labeled_operator: smoother size does not match partition");
  LabeledOperator op;
  if (part.u() == 0) {
    op.M_LL = pick(S, part.labeled, part.labeled);
    op.M_UL = Eigen::MatrixXd(0, part.m());
    return op;
  }
  const Eigen::MatrixXd S_UU = pick(S, part.unlabeled, part.unlabeled);
  const Eigen::Index u = S_UU.rows();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(u, u) - S_UU;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  const Eigen::MatrixXd S_UL = pick(S, part.unlabeled, part.labeled);
  op.M_UL = lu.solve(S_UL);
  // partial pivoting does not signal rank deficiency; probe the solve
  Eigen::VectorXd probe(u);
  for (Eigen::Index i = 0; i < u; ++i) probe[i] = (i % 2 == 0) ? 1.0 : -0.5;
  Eigen::VectorXd x = lu.solve(probe);
  if (!((lhs * x - probe).norm() <= 1e-8 * (1.0 + probe.norm() + x.norm())))
    throw std::runtime_error("fixed point: I - S_UU numerically singular");
  op.M_LL = pick(S, part.labeled, part.labeled) + pick(S, part.labeled, part.unlabeled) * op.M_UL;
  return op;
}

LabeledOperator labeled_operator(const TransductiveSmoother& S) {
  return labeled_operator(S.S, S.partition);
}

FixedPointFit closed_form_fit(const TransductiveSmoother& S, const Eigen::VectorXd& y_L) {
  check_inputs(S, y_L);
  LabeledOperator op = labeled_operator(S);
  FixedPointFit fit;
  fit.method = FixedPointFit::Method::Closed;
  fit.M_LL = std::move(op.M_LL);
  fit.M_UL = std::move(op.M_UL);
  fit.yhat_L = fit.M_LL * y_L;
  fit.yhat_U = fit.M_UL * y_L;
  return fit;
}

FixedPointFit self_train_fit(const TransductiveSmoother& S, const Eigen::VectorXd& y_L,
                             Eigen::VectorXd y_u0, double delta, int max_iter) {
  check_inputs(S, y_L);
  if (delta <= 0.0) throw std::invalid_argument("self_train_fit: delta must be positive");
  const int u = S.partition.u();
  if (y_u0.size() == 0) y_u0 = Eigen::VectorXd::Constant(u, y_L.mean());
  if (y_u0.size() != u) throw std::invalid_argument("self_train_fit: y_u0 length mismatch");

  FixedPointFit fit;
  fit.method = FixedPointFit::Method::SelfTrain;
  if (u == 0) {
    fit.yhat_L = S.ll() * y_L;
    fit.yhat_U = Eigen::VectorXd(0);
    return fit;
  }
  const Eigen::MatrixXd S_UU = S.uu();
  const Eigen::VectorXd drive = S.ul() * y_L;
  Eigen::VectorXd y_u = std::move(y_u0);
  fit.converged = false;
  for (int k = 1; k <= max_iter; ++k) {
    Eigen::VectorXd next = drive + S_UU * y_u;
    const double step = (next - y_u).cwiseAbs().maxCoeff();
    y_u = std::move(next);
    fit.iterations = k;
    if (step < delta) {
      fit.converged = true;
      break;
    }
  }
  fit.yhat_U = y_u;
  fit.yhat_L = S.ll() * y_L + S.lu() * y_u;
  return fit;
}

FixedPointFit newton_fit(const TransductiveSmoother& S, const Eigen::VectorXd& y_L,
                         Eigen::VectorXd y_u0, double delta, int max_iter) {
  check_inputs(S, y_L);
  if (delta <= 0.0) throw std::invalid_argument("newton_fit: delta must be positive");
  const int u = S.partition.u();
  if (y_u0.size() == 0) y_u0 = Eigen::VectorXd::Constant(u, y_L.mean());
  if (y_u0.size() != u) throw std::invalid_argument("newton_fit: y_u0 length mismatch");

  FixedPointFit fit;
  fit.method = FixedPointFit::Method::Newton;
  if (u == 0) {
    fit.yhat_L = S.ll() * y_L;
    fit.yhat_U = Eigen::VectorXd(0);
    return fit;
  }
  const Eigen::MatrixXd S_UU = S.uu();
  const Eigen::VectorXd drive = S.ul() * y_L;
  auto lu = factor_i_minus_uu(S_UU);
  Eigen::VectorXd y_u = std::move(y_u0);
  fit.converged = false;
  for (int k = 1; k <= max_iter; ++k) {
    Eigen::VectorXd residual = y_u - drive - S_UU * y_u;
    Eigen::VectorXd update = lu.solve(residual);
    y_u -= update;
    fit.iterations = k;
    if (update.cwiseAbs().maxCoeff() < delta) {
      fit.converged = true;
      break;
    }
  }
  fit.yhat_U = y_u;
  fit.yhat_L = S.ll() * y_L + S.lu() * y_u;
  return fit;
}

SemiparametricFit semiparametric_fit(const FeatureView& X, const TransductiveSmoother& S,
                                     const Eigen::VectorXd& y_L) {
  check_inputs(S, y_L);
  if (X.data.rows() != S.partition.n)
    throw std::invalid_argument("semiparametric_fit: feature rows do not match partition");
  const Eigen::MatrixXd X_L = X.data(S.partition.labeled, Eigen::all);
  LabeledOperator op = labeled_operator(S);
  const Eigen::Index m = X_L.rows();
  const Eigen::MatrixXd resid_op = Eigen::MatrixXd::Identity(m, m) - op.M_LL;
  const Eigen::MatrixXd normal = X_L.transpose() * resid_op * X_L;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible())
    throw std::runtime_error("semiparametric_fit: collinear labeled features");

  SemiparametricFit fit;
  fit.beta = lu.solve(X_L.transpose() * (resid_op * y_L));
  const Eigen::VectorXd partial = y_L - X_L * fit.beta;
  fit.f2_L = op.M_LL * partial;
  fit.f2_U = op.M_UL * partial;
  const Eigen::VectorXd eta_all = X.data * fit.beta;
  Eigen::VectorXd eta_L = pick(eta_all, S.partition.labeled) + fit.f2_L;
  Eigen::VectorXd eta_U = pick(eta_all, S.partition.unlabeled) + fit.f2_U;
  fit.yhat = scatter(S.partition, eta_L, eta_U);
  return fit;
}

}  // namespace mvt
