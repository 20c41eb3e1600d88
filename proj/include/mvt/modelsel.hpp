#ifndef MVT_MODELSEL_HPP
#define MVT_MODELSEL_HPP

#include "mvt/additive.hpp"

#include <array>
#include <map>

namespace mvt {

// Losses summed over the labeled observations.
double squared_error_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);
// Logistic loss; a fitted probability of exactly 0/1 against the opposing
// label yields +inf.
double logistic_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

// GCV adjusted to transductive smoothers:
//   ||Y_L - M_LL Y_L||^2 / (1 - tr(M_LL)/m)^2.
double tgcv(const Eigen::MatrixXd& M_LL, const Eigen::VectorXd& y_L);

// Degrees-of-freedom aggregate 1 + sum_l (tr_l - 1) used when the fit comes
// from backfitting rather than one closed-form smoother.
double trace_aggregate(const std::vector<double>& traces);

// Backfitting approximation of the tGCV denominator:
//   (1 - [1 + sum_l (tr_l - 1)]/m)^2.
double df_denominator(const std::vector<double>& traces, int m);

// tAIC = (2/m) Loss + 2 tr / m.
double taic(double loss, double trace, int m);
// Identity-link evaluation straight from the labeled operator.
double taic(const Eigen::MatrixXd& M_LL, const Eigen::VectorXd& y_L, Link link);
// Evaluation on fitted labeled values (probabilities for the logit link).
double taic_fitted(const Eigen::VectorXd& y_L, const Eigen::VectorXd& fitted_L, double trace,
                   int m, Link link);

// A term recipe instantiable at any lambda. `weights` is the term's kernel
// weight matrix or adjacency, `penalty` its combinatorial Laplacian.
struct TermBlueprint {
  std::string name;
  SmootherForm form = SmootherForm::Regularized;
  Eigen::MatrixXd weights;
  Eigen::MatrixXd penalty;
  double gamma = std::numeric_limits<double>::quiet_NaN();  // reporting metadata
  std::optional<int> k;

  static TermBlueprint from_weights(std::string name, SmootherForm form, Eigen::MatrixXd weights,
                                    double gamma = std::numeric_limits<double>::quiet_NaN(),
                                    std::optional<int> k = std::nullopt);

  // Raw identity-link smoother at this lambda (stochastic ignores lambda).
  // No membership validation here; grid search screens candidates by the
  // behaviour of the fit and final terms are validated by the caller.
  Eigen::MatrixXd raw_smoother(double lambda) const;
  AdditiveTerm term(double lambda) const;
};

// Cache of raw smoothers and labeled operators keyed by (term name, lambda);
// repeated searches over the same blueprints reuse the factorizations.
struct SmootherCache {
  std::map<std::pair<std::string, double>, Eigen::MatrixXd> smoother;
  std::map<std::pair<std::string, double>, LabeledOperator> op;
};

// tGCV of the model at the given lambdas: exact labeled operator of the
// intercept-plus-centered smoother for a single term, transductive backfit
// residual with the aggregate-denominator approximation otherwise.
double model_tgcv(const std::vector<TermBlueprint>& blueprints, const std::vector<double>& lambdas,
                  const Partition& part, const Eigen::VectorXd& y_L, const FitOptions& opt = {});

// Coordinate descent of tGCV over per-term lambda grids. Cycles terms in
// declaration order, each step picking the grid minimizer with other lambdas
// held fixed; ties go to the smaller lambda. Grid points whose fit fails or
// saturates are skipped; all points failing raises.
std::vector<double> estimate_lambdas(const std::vector<TermBlueprint>& blueprints,
                                     const Partition& part, const Eigen::VectorXd& y_L,
                                     std::vector<std::vector<double>> grids,
                                     const FitOptions& opt = {}, SmootherCache* cache = nullptr);

std::vector<double> default_lambda_grid();
std::vector<double> default_gamma_grid(const Eigen::MatrixXd& distances);
std::vector<int> default_k_grid(int n);

struct GammaK {
  double gamma = 1.0;
  std::optional<int> k;
};

struct LearnerMatchResult {
  double gamma = 0.0;
  std::optional<int> k;
  double criterion = 0.0;
};

// Pick the (gamma, k) whose stochastic-smoother fixed point is closest in
// squared distance to the external learner's unlabeled predictions. A
// candidate failing the membership test is retried after shortest-path
// completion, then dropped. Ties prefer smaller gamma, then smaller k
// (thinned candidates before unthinned).
LearnerMatchResult learner_match(const FeatureView& view, const Partition& part,
                                 const Eigen::VectorXd& y_L, const LearnerPredictions& preds,
                                 const std::vector<GammaK>& grid,
                                 DistanceKind distance = DistanceKind::Euclidean);

// Spectral radius of the two-term convergence condition
//   sum_j sum_{i != j} [(I - S_j S_i)^{-1} S_j (I - S_i)]_UU
// with centered reweighted smoothers S_i = C (lambda_i P_i + V)^{-1} V.
// Diagnostic: < 1 guarantees the self-training loop converges from any start.
double prop1_radius(const PenaltyMatrix& P1, const PenaltyMatrix& P2, double lambda1,
                    double lambda2, const Eigen::VectorXd& variance, const Partition& part);

struct SelectionReport {
  std::vector<std::string> model_terms;
  std::vector<double> lambda;
  std::vector<std::pair<double, std::optional<int>>> tau;  // (gamma, k) per term
  double tgcv = std::numeric_limits<double>::quiet_NaN();
  double taic = std::numeric_limits<double>::infinity();
  double df = std::numeric_limits<double>::quiet_NaN();
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> prop1;  // two-term models only
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct SelectionResult {
  std::vector<SelectionReport> reports;  // ascending tAIC, failures last
  int best = -1;                         // index into reports
};

struct SelectionConfig {
  Link link = Link::Logit;
  bool hierarchy = true;
  FitOptions fit;
  std::vector<std::vector<double>> lambda_grids;  // per candidate; empty uses the default
};

struct CandidateTerm {
  TermBlueprint blueprint;
  bool is_interaction = false;
  std::array<int, 2> parents = {-1, -1};  // candidate indices of the two main effects
};

// Enumerate every nonempty candidate subset honoring the hierarchical
// constraint (interactions require both parents), estimate lambdas, fit,
// and score tAIC. Ties break toward fewer terms, then enumeration order
// (size ascending, then lexicographic).
SelectionResult hierarchical_search(const std::vector<CandidateTerm>& candidates,
                                    const Partition& part, const Eigen::VectorXd& y_L,
                                    const SelectionConfig& config);

}  // namespace mvt

#endif
