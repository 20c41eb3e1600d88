#ifndef MVT_ADDITIVE_HPP
#define MVT_ADDITIVE_HPP

#include "mvt/fixedpoint.hpp"

#include <functional>

namespace mvt {

// One additive term. `smoother` is the raw (uncentered) n x n smoother used
// for identity-link fits; `penalty` and `lambda` drive the reweighted
// smoothers C(V + lambda P)^{-1} V of the logit-link local scoring. Terms may
// omit the penalty when only identity-link fitting is needed.
struct AdditiveTerm {
  std::string name;
  Eigen::MatrixXd smoother;
  Eigen::MatrixXd penalty;
  double lambda = 1.0;
};

enum class FitStatus { Converged, MaxIterations, Separation };

struct TermFit {
  Eigen::VectorXd f;  // length n, mean zero
  double trace_M = std::numeric_limits<double>::quiet_NaN();  // tr of the term's labeled operator
};

struct AdditiveFit {
  double alpha = 0.0;
  std::vector<TermFit> term_fits;
  Eigen::VectorXd eta;   // alpha + sum of term fits
  Eigen::VectorXd yhat;  // g^{-1}(eta)
  int outer_iterations = 0;
  int inner_iterations = 0;  // Gauss-Seidel sweeps (identity) or scoring steps (logit)
  bool converged = false;
  FitStatus status = FitStatus::MaxIterations;
  Link link = Link::Identity;
};

struct FitOptions {
  double outer_delta = 1e-6;
  int max_outer = 200;
  double inner_delta = 1e-8;
  int max_inner = 1000;
  bool warm_start = true;
  bool term_traces = true;  // fill TermFit::trace_M at the end of the fit
  // Explicit initial unlabeled values (length |U|); overrides warm/cold start.
  const Eigen::VectorXd* y_u0 = nullptr;
};

// Cyclic Gauss-Seidel on centered smoothers: each sweep sets
//   f_l <- center( smooth_l(y - alpha - sum_{j != l} f_j) ),  alpha = mean(y),
// and convergence requires every term's stationarity residual below delta.
struct GaussSeidelResult {
  double alpha = 0.0;
  std::vector<Eigen::VectorXd> f;
  int sweeps = 0;
  bool converged = false;
};

GaussSeidelResult gauss_seidel_backfit(
    const std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>& smooth,
    const Eigen::VectorXd& y, double delta, int max_iter,
    std::vector<Eigen::VectorXd> f_init = {});

// Supervised backfit of a fully observed response on the terms' raw smoothers.
AdditiveFit backfit_regression(const std::vector<AdditiveTerm>& terms, const Eigen::VectorXd& y,
                               double delta = 1e-8, int max_iter = 1000);

// Initialization for the self-training loop: per-term labeled operators
// M_LL_l / M_UL_l, a backfit on the labeled data with the M_LL_l smoothers,
// then prediction of the unlabeled responses with M_UL_l on the final
// labeled partial residuals.
Eigen::VectorXd warm_start_unlabeled(const std::vector<AdditiveTerm>& terms, const Partition& part,
                                     const Eigen::VectorXd& y_L, double delta = 1e-8,
                                     int max_iter = 1000);

// Same warm start from precomputed per-term labeled operators.
Eigen::VectorXd warm_start_from_operators(const std::vector<LabeledOperator>& ops,
                                          const Partition& part, const Eigen::VectorXd& y_L,
                                          double delta = 1e-8, int max_iter = 1000);

// Identity-link transductive fit: alternate a supervised backfit on the
// completed response with the update Y_U <- eta_U until the unlabeled linear
// predictor stabilizes in sup norm.
AdditiveFit transductive_backfit(const std::vector<AdditiveTerm>& terms, const Partition& part,
                                 const Eigen::VectorXd& y_L, const FitOptions& opt = {});

// Logit-link transductive local scoring. The outer loop self-trains
// Y_U <- g^{-1}(eta_U); each outer step runs iterative rescoring with
// variance weights V = p(1-p) (floored), working response
// z = eta + V^{-1}(Y - p), and a Gauss-Seidel backfit of z on the smoothers
// C(V + lambda_l P_l)^{-1} V. |eta| exceeding 30 flags separation.
AdditiveFit local_scoring(const std::vector<AdditiveTerm>& terms, const Partition& part,
                          const Eigen::VectorXd& y_L, const FitOptions& opt = {});

// Class labels on the unlabeled set: 1 iff yhat >= threshold.
std::vector<int> predict_assignments(const AdditiveFit& fit, const Partition& part,
                                     double threshold = 0.5);

// Single-term fit operator R = 11'/n + C S: intercept plus centered smoother,
// so that eta = R y reproduces the one-term backfit in closed form.
Eigen::MatrixXd intercept_plus_centered(const Eigen::MatrixXd& S);

inline double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

constexpr double kEtaCap = 30.0;
constexpr double kVarianceFloor = 1e-5;

}  // namespace mvt

#endif
