#ifndef MVT_TYPES_HPP
#define MVT_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvt {

enum class Task { Regression, Classification };
enum class Link { Identity, Logit };

enum class SmootherForm { Stochastic, Regularized, Symmetric, Centered };
enum class TermKind { Main, Interaction };
enum class InteractionOp { Intersection, Union };
enum class DistanceKind { Euclidean, CosineDissimilarity, ShortestPath };

// Exponential kernel K_gamma(d) = exp(-d/gamma) on a chosen distance.
struct KernelSpec {
  double gamma = 1.0;
  DistanceKind distance = DistanceKind::Euclidean;
};

// Index sets for the labeled (L) / unlabeled (U) split of the n observations.
// The two lists are disjoint, sorted ascending, and cover {0..n-1}.
struct Partition {
  std::vector<int> labeled;
  std::vector<int> unlabeled;
  int n = 0;

  int m() const { return static_cast<int>(labeled.size()); }
  int u() const { return static_cast<int>(unlabeled.size()); }

  void validate() const;

  // missing[i] == true marks observation i as unlabeled.
  static Partition from_missing(const std::vector<bool>& missing);
};

// A view given as an n x p numeric matrix.
struct FeatureView {
  std::string name;
  Eigen::MatrixXd data;
  std::vector<std::string> column_names;
  std::vector<std::string> ids;  // row ids, in row order
};

// A view given as an observed graph: symmetric nonnegative weighted adjacency.
struct GraphView {
  std::string name;
  Eigen::MatrixXd adjacency;

  void validate() const;
};

// Response with missing unlabeled entries (stored as NaN).
struct LabelVector {
  Eigen::VectorXd values;
  Task task = Task::Regression;
};

// External-learner predictions for one view, split by the partition.
struct LearnerPredictions {
  std::string view_name;
  Eigen::VectorXd phi_L;
  Eigen::VectorXd phi_U;
};

// One additive term of the model configuration.
struct TermSpec {
  std::vector<std::string> views;  // 1 name (main) or 2 (interaction)
  TermKind kind = TermKind::Main;
  InteractionOp op = InteractionOp::Intersection;
  SmootherForm form = SmootherForm::Regularized;
  DistanceKind distance = DistanceKind::Euclidean;
  std::optional<double> gamma;  // kernel width; absent on raw graph terms
  bool gamma_estimate = false;
  std::optional<int> k;  // K-NN thinning; absent keeps the full weight matrix
  std::optional<double> lambda;
  bool lambda_estimate = false;

  std::string name() const;
};

struct AdditiveModelSpec {
  std::vector<TermSpec> terms;
  Link link = Link::Identity;
  bool hierarchy = true;

  void validate() const;  // shape + hierarchy checks, independent of data
};

// ---- small dense helpers used throughout ----

inline Eigen::MatrixXd pick(const Eigen::MatrixXd& M, const std::vector<int>& rows,
                            const std::vector<int>& cols) {
  return M(rows, cols);
}

inline Eigen::VectorXd pick(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  return v(idx);
}

// Reassemble a full-length vector from labeled and unlabeled parts.
Eigen::VectorXd scatter(const Partition& part, const Eigen::VectorXd& labeled_vals,
                        const Eigen::VectorXd& unlabeled_vals);

inline bool is_missing(double v) { return std::isnan(v); }

}  // namespace mvt

#endif
