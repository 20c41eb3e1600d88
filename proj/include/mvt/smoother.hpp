#ifndef MVT_SMOOTHER_HPP
#define MVT_SMOOTHER_HPP

#include "mvt/types.hpp"

namespace mvt {

// Combinatorial Laplacian P = D - W of a nonnegative symmetric weight matrix,
// D the row-sum diagonal. Satisfies P*1 = 0 and x'Px >= 0.
struct PenaltyMatrix {
  Eigen::MatrixXd P;
  std::string source_view;
};

// An n x n linear smoother whose unlabeled-by-unlabeled block is a strict
// contraction, rho(S_UU) < 1, so the transductive fixed point exists uniquely.
// Construction always validates membership; rho_uu = 0 by convention when the
// partition has no unlabeled observations.
struct TransductiveSmoother {
  Eigen::MatrixXd S;
  Partition partition;
  double rho_uu = 0.0;
  SmootherForm form = SmootherForm::Symmetric;

  Eigen::MatrixXd ll() const { return pick(S, partition.labeled, partition.labeled); }
  Eigen::MatrixXd lu() const { return pick(S, partition.labeled, partition.unlabeled); }
  Eigen::MatrixXd ul() const { return pick(S, partition.unlabeled, partition.labeled); }
  Eigen::MatrixXd uu() const { return pick(S, partition.unlabeled, partition.unlabeled); }
};

// Pairwise distances between rows of the view. Cosine dissimilarity is
// 1 - x.y/(|x||y|); a zero-norm row makes it undefined and raises.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& data, DistanceKind kind);

// W_ij = exp(-d(x_i, x_j)/gamma). Symmetric, unit diagonal.
Eigen::MatrixXd kernel_weights(const FeatureView& view, const KernelSpec& spec);

// Keep each node's k largest off-diagonal weights, then symmetrize by union
// (elementwise max of the two directed retained weights). Ties at the k-th
// weight keep the lower node index. Diagonal is zero.
Eigen::MatrixXd knn_graph(const Eigen::MatrixXd& W, int k);

PenaltyMatrix combinatorial_laplacian(const Eigen::MatrixXd& W, std::string source_view = "");

// S = D^{-1} A, rows sum to one. Every row of A must have positive sum.
TransductiveSmoother stochastic_smoother(const Eigen::MatrixXd& A, const Partition& part);

// S = (A + lambda P)^{-1} A with P the combinatorial Laplacian of A.
// Satisfies S*1 = 1 since P*1 = 0.
TransductiveSmoother regularized_smoother(const Eigen::MatrixXd& A, double lambda,
                                          const Partition& part);

// S = (I + lambda P)^{-1}; symmetric with eigenvalues in (0, 1].
TransductiveSmoother symmetric_smoother(const PenaltyMatrix& penalty, double lambda,
                                        const Partition& part);

// Wrap an arbitrary smoother matrix, validating rho(S_UU) < 1.
TransductiveSmoother make_transductive(Eigen::MatrixXd S, const Partition& part,
                                       SmootherForm form);

// Replace each connected component by a complete graph with weights
// K_gamma(d_sp(i,j)); edge lengths are 1/weight (1 on unit-weight graphs).
// Pairs in different components keep weight zero; diagonal stays zero.
Eigen::MatrixXd shortest_path_complete(const Eigen::MatrixXd& A, const KernelSpec& kernel);

// Composite graph for a two-view interaction: elementwise sqrt(W1 W2)
// (intersection) or (W1 + W2)/2 (union).
Eigen::MatrixXd interaction_graph(const Eigen::MatrixXd& W1, const Eigen::MatrixXd& W2,
                                  InteractionOp op);

// Spectral radius of a square matrix: dense eigenvalues up to order 200,
// power iteration with renormalization and random restarts beyond that.
double spectral_radius(const Eigen::MatrixXd& M);

// rho(S_UU); returns 0 when the partition is fully labeled.
double spectral_radius_uu(const Eigen::MatrixXd& S, const Partition& part);

// All-pairs shortest-path lengths; edge length is 1/weight when unit_lengths
// is false. Unreachable pairs get +inf.
Eigen::MatrixXd shortest_path_lengths(const Eigen::MatrixXd& A, bool unit_lengths);

}  // namespace mvt

#endif
