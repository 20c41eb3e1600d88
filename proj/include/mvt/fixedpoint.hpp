#ifndef MVT_FIXEDPOINT_HPP
#define MVT_FIXEDPOINT_HPP

#include "mvt/smoother.hpp"

namespace mvt {

// Labeled-block and prediction operators of the transductive fixed point:
//   M_UL = (I - S_UU)^{-1} S_UL,   M_LL = S_LL + S_LU M_UL,
// so that yhat = [M_LL; M_UL] Y_L.
struct LabeledOperator {
  Eigen::MatrixXd M_LL;
  Eigen::MatrixXd M_UL;
};

LabeledOperator labeled_operator(const TransductiveSmoother& S);

// Same operators from a raw smoother matrix; the caller guarantees
// rho(S_UU) < 1 (a singular I - S_UU still raises).
LabeledOperator labeled_operator(const Eigen::MatrixXd& S, const Partition& part);

struct FixedPointFit {
  enum class Method { Closed, SelfTrain, Newton };

  Eigen::VectorXd yhat_L;
  Eigen::VectorXd yhat_U;
  Eigen::MatrixXd M_LL;  // filled by the closed form only
  Eigen::MatrixXd M_UL;
  Method method = Method::Closed;
  int iterations = 0;
  bool converged = true;
};

// Direct solve of the fixed point through a dense factorization of (I - S_UU).
FixedPointFit closed_form_fit(const TransductiveSmoother& S, const Eigen::VectorXd& y_L);

// Iterate yhat_U <- S_UL Y_L + S_UU yhat_U until the sup-norm step < delta.
// An empty y_u0 starts from mean(Y_L). Exceeding max_iter flags the result
// as non-converged rather than throwing.
FixedPointFit self_train_fit(const TransductiveSmoother& S, const Eigen::VectorXd& y_L,
                             Eigen::VectorXd y_u0 = Eigen::VectorXd(), double delta = 1e-8,
                             int max_iter = 10000);

// Newton iteration on the fixed-point residual. For the identity link the map
// is affine with gradient S_UU, so the first step already solves
// (I - S_UU) y_U = S_UL Y_L; kept as the scaffold the iterative form shares.
FixedPointFit newton_fit(const TransductiveSmoother& S, const Eigen::VectorXd& y_L,
                         Eigen::VectorXd y_u0 = Eigen::VectorXd(), double delta = 1e-8,
                         int max_iter = 10000);

// Linearterm-plus-smoother model Y = X beta + f(G) + eps fitted through the
// labeled-block operator:
//   beta = (X_L'(I - M_LL)X_L)^{-1} X_L'(I - M_LL) Y_L,
//   f_L = M_LL (Y_L - X_L beta),  f_U = M_UL (Y_L - X_L beta).
struct SemiparametricFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd f2_L;
  Eigen::VectorXd f2_U;
  Eigen::VectorXd yhat;  // length n
};

SemiparametricFit semiparametric_fit(const FeatureView& X, const TransductiveSmoother& S,
                                     const Eigen::VectorXd& y_L);

}  // namespace mvt

#endif
