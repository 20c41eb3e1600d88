#ifndef MVT_TEST_UTIL_HPP
#define MVT_TEST_UTIL_HPP

#include "mvt/smoother.hpp"

#include <Eigen/Eigenvalues>

#include <random>

namespace mvt_test {

// deterministic draws; std::mt19937_64 output is bit-exact across platforms
inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline mvt::Partition random_partition(std::mt19937_64& rng, int n, int min_labeled,
                                       int min_unlabeled = 1) {
  const int m = uniform_int(rng, min_labeled, n - min_unlabeled);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < m; ++i) std::swap(idx[i], idx[uniform_int(rng, i, n - 1)]);
  std::vector<bool> missing(n, true);
  for (int i = 0; i < m; ++i) missing[idx[i]] = false;
  return mvt::Partition::from_missing(missing);
}

// connected nonnegative symmetric adjacency: random spanning tree plus noise
inline Eigen::MatrixXd random_adjacency(std::mt19937_64& rng, int n, double base = 0.0) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const int j = uniform_int(rng, 0, i - 1);
    A(i, j) = A(j, i) = uniform(rng, 0.5, 1.5);
  }
  const int extra = n;
  for (int e = 0; e < extra; ++e) {
    const int i = uniform_int(rng, 0, n - 1);
    const int j = uniform_int(rng, 0, n - 1);
    if (i == j) continue;
    const double w = uniform(rng, 0.1, 1.0);
    A(i, j) += w;
    A(j, i) += w;
  }
  if (base > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) A(i, j) += base;
  }
  return A;
}

// symmetric matrix with eigenvalues drawn from [0, max_eig]
inline Eigen::MatrixXd random_psd_smoother(std::mt19937_64& rng, int n, double max_eig) {
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = uniform(rng, -1.0, 1.0);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd eigs(n);
  for (int i = 0; i < n; ++i) eigs[i] = uniform(rng, 0.0, max_eig);
  return Q * eigs.asDiagonal() * Q.transpose();
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo = -1.0,
                                     double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

// independent spectral-radius oracle on a different eigensolver code path
inline double dense_radius_oracle(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M.cast<std::complex<double>>(), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline std::vector<int> random_permutation(std::mt19937_64& rng, int n) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = 0; i < n - 1; ++i) std::swap(perm[i], perm[uniform_int(rng, i, n - 1)]);
  return perm;
}

// permutation matrix with (perm[i], i) = 1, so (P M P')(perm[i], perm[j]) = M(i, j)
inline Eigen::MatrixXd permutation_matrix(const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) P(perm[i], i) = 1.0;
  return P;
}

inline mvt::Partition permuted_partition(const mvt::Partition& part,
                                         const std::vector<int>& perm) {
  std::vector<bool> missing(part.n, false);
  for (int i : part.unlabeled) missing[perm[i]] = true;
  return mvt::Partition::from_missing(missing);
}

}  // namespace mvt_test

#endif
