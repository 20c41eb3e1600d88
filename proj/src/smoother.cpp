#include "mvt/smoother.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

namespace mvt {

namespace {

void require_square_symmetric(const Eigen::MatrixXd& W, const char* who) {
  if (W.rows() != W.cols()) throw std::invalid_argument(std::string(who) + ": matrix not square");
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

void require_nonnegative(const Eigen::MatrixXd& W, const char* who) {
  if (W.size() > 0 && W.minCoeff() < 0.0)
    throw std::invalid_argument(std::string(who) + ": negative weight");
}

// Power iteration for |lambda_max|. The matrices handled here (stochastic
// blocks, symmetric pencils) have a real dominant eigenvalue; sign flips are
// absorbed by checking both v_{k+1} - v_k and v_{k+1} + v_k.
double power_iteration_radius(const Eigen::MatrixXd& M) {
  const Eigen::Index n = M.rows();
  std::mt19937_64 rng(0x6d76742d72686fULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double best = 0.0;
  for (int restart = 0; restart < 3; ++restart) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = unit(rng);
    v.normalize();
    double est = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
      Eigen::VectorXd w = M * v;
      est = w.norm();
      if (est < 1e-300) return 0.0;  // collapsed onto the kernel
      w /= est;
      const double drift = std::min((w - v).norm(), (w + v).norm());
      v = w;
      if (drift < 1e-10) return est;
    }
    best = std::max(best, est);
  }
  return best;
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
  if (M.size() == 0) return 0.0;
  if (M.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  if (M.rows() <= 200) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return power_iteration_radius(M);
}

double spectral_radius_uu(const Eigen::MatrixXd& S, const Partition& part) {
  if (S.rows() != part.n || S.cols() != part.n)
    throw std::invalid_argument("spectral_radius_uu: smoother size does not match partition");
  if (part.u() == 0) return 0.0;  // fully labeled: fixed point is trivial
  return spectral_radius(pick(S, part.unlabeled, part.unlabeled));
}

TransductiveSmoother make_transductive(Eigen::MatrixXd S, const Partition& part,
                                       SmootherForm form) {
  part.validate();
  TransductiveSmoother out;
  out.rho_uu = spectral_radius_uu(S, part);
  // guard band absorbs eigensolver round-off on an exact unit radius
  if (out.rho_uu >= 1.0 - 1e-12)
    throw std::runtime_error(
        "not a transductive smoother: rho(S_UU) = " + std::to_string(out.rho_uu) +
        " >= 1; consider shortest-path completion of the graph");
  out.S = std::move(S);
  out.partition = part;
  out.form = form;
  return out;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& data, DistanceKind kind) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd D(n, n);
  switch (kind) {
    case DistanceKind::Euclidean: {
      for (Eigen::Index i = 0; i < n; ++i) {
        D(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double d = (data.row(i) - data.row(j)).norm();
          D(i, j) = D(j, i) = d;
        }
      }
      break;
    }
    case DistanceKind::CosineDissimilarity: {
      Eigen::VectorXd norms = data.rowwise().norm();
      for (Eigen::Index i = 0; i < n; ++i) {
        D(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double denom = norms[i] * norms[j];
          const double d = 1.0 - (denom > 0.0 ? data.row(i).dot(data.row(j)) / denom
                                              : std::numeric_limits<double>::quiet_NaN());
          D(i, j) = D(j, i) = d;
        }
      }
      break;
    }
    case DistanceKind::ShortestPath:
      throw std::invalid_argument("pairwise_distances: shortest-path distance applies to graphs");
  }
  return D;
}

Eigen::MatrixXd kernel_weights(const FeatureView& view, const KernelSpec& spec) {
  if (spec.gamma <= 0.0) throw std::invalid_argument("kernel_weights: gamma must be positive");
  Eigen::MatrixXd D = pairwise_distances(view.data, spec.distance);
  const Eigen::Index n = D.rows();
  Eigen::MatrixXd W(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(D(i, j)))
        throw std::runtime_error("kernel_weights: non-finite distance in view '" + view.name +
                                 "'");
      W(i, j) = std::exp(-D(i, j) / spec.gamma);
    }
  return W;
}

Eigen::MatrixXd knn_graph(const Eigen::MatrixXd& W, int k) {
  require_square_symmetric(W, "knn_graph");
  const int n = static_cast<int>(W.rows());
  if (k < 1 || k > n - 1) throw std::invalid_argument("knn_graph: k out of range [1, n-1]");
  Eigen::MatrixXd kept = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (W(i, a) != W(i, b)) return W(i, a) > W(i, b);
      return a < b;  // tie at the k-th weight: lower index wins
    });
    for (int r = 0; r < k; ++r) kept(i, order[r]) = W(i, order[r]);
  }
  Eigen::MatrixXd A = kept.cwiseMax(kept.transpose());  // union symmetrization
  A.diagonal().setZero();
  return A;
}

PenaltyMatrix combinatorial_laplacian(const Eigen::MatrixXd& W, std::string source_view) {
  require_square_symmetric(W, "combinatorial_laplacian");
  require_nonnegative(W, "combinatorial_laplacian");
  PenaltyMatrix out;
  out.P = Eigen::MatrixXd(-W);
  out.P.diagonal() += W.rowwise().sum();
  out.source_view = std::move(source_view);
  return out;
}

TransductiveSmoother stochastic_smoother(const Eigen::MatrixXd& A, const Partition& part) {
  require_square_symmetric(A, "stochastic_smoother");
  require_nonnegative(A, "stochastic_smoother");
  const Eigen::Index n = A.rows();
  Eigen::VectorXd deg = A.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i)
    if (deg[i] <= 0.0)
      throw std::runtime_error("stochastic_smoother: node " + std::to_string(i) +
                               " has zero degree");
  Eigen::MatrixXd S = deg.cwiseInverse().asDiagonal() * A;
  return make_transductive(std::move(S), part, SmootherForm::Stochastic);
}

TransductiveSmoother regularized_smoother(const Eigen::MatrixXd& A, double lambda,
                                          const Partition& part) {
  if (lambda <= 0.0) throw std::invalid_argument("regularized_smoother: lambda must be positive");
  PenaltyMatrix pen = combinatorial_laplacian(A, "");
  Eigen::MatrixXd lhs = A + lambda * pen.P;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible())
    throw std::runtime_error("regularized_smoother: A + lambda*P is singular");
  return make_transductive(lu.solve(A), part, SmootherForm::Regularized);
}

TransductiveSmoother symmetric_smoother(const PenaltyMatrix& penalty, double lambda,
                                        const Partition& part) {
  if (lambda <= 0.0) throw std::invalid_argument("symmetric_smoother: lambda must be positive");
  const Eigen::Index n = penalty.P.rows();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) + lambda * penalty.P;
  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("symmetric_smoother: I + lambda*P not positive definite");
  return make_transductive(llt.solve(Eigen::MatrixXd::Identity(n, n)), part,
                           SmootherForm::Symmetric);
}

Eigen::MatrixXd shortest_path_lengths(const Eigen::MatrixXd& A, bool unit_lengths) {
  require_square_symmetric(A, "shortest_path_lengths");
  require_nonnegative(A, "shortest_path_lengths");
  const int n = static_cast<int>(A.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i && A(i, j) > 0.0) adj[i].push_back({j, unit_lengths ? 1.0 : 1.0 / A(i, j)});
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(n, n, inf);
  // Dijkstra from every source; lattice-sized graphs are cheap enough dense.
  using Item = std::pair<double, int>;
  for (int s = 0; s < n; ++s) {
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    D(s, s) = 0.0;
    heap.push({0.0, s});
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (d > D(s, v)) continue;
      for (auto [w, len] : adj[v]) {
        const double nd = d + len;
        if (nd < D(s, w)) {
          D(s, w) = nd;
          heap.push({nd, w});
        }
      }
    }
  }
  return D;
}

Eigen::MatrixXd shortest_path_complete(const Eigen::MatrixXd& A, const KernelSpec& kernel) {
  if (kernel.gamma <= 0.0)
    throw std::invalid_argument("shortest_path_complete: gamma must be positive");
  // A graph is treated as unit-weight when all positive entries equal one.
  bool binary = true;
  for (Eigen::Index i = 0; i < A.rows() && binary; ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (A(i, j) > 0.0 && A(i, j) != 1.0) {
        binary = false;
        break;
      }
  Eigen::MatrixXd D = shortest_path_lengths(A, binary);
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && std::isfinite(D(i, j))) out(i, j) = std::exp(-D(i, j) / kernel.gamma);
  return out;
}

Eigen::MatrixXd interaction_graph(const Eigen::MatrixXd& W1, const Eigen::MatrixXd& W2,
                                  InteractionOp op) {
  if (W1.rows() != W2.rows() || W1.cols() != W2.cols())
    throw std::invalid_argument("interaction_graph: dimension mismatch");
  if (op == InteractionOp::Intersection) return (W1.array() * W2.array()).sqrt().matrix();
  return 0.5 * (W1 + W2);
}

}  // namespace mvt
