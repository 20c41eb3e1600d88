#include "mvt/modelsel.hpp"

#include "mvt/smoother.hpp"

#include <algorithm>
#include <cmath>

namespace mvt {

namespace {

constexpr double kSaturationTol = 1e-12;

void check_labeled(const Eigen::VectorXd& y_L, Eigen::Index m, const char* who) {
  if (y_L.size() != m) throw std::invalid_argument(std::string(who) + ": Y_L length mismatch");
}

}  // namespace

double squared_error_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("squared_error_loss: length mismatch");
  return (y - yhat).squaredNorm();
}

double logistic_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  if (y.size() != p.size()) throw std::invalid_argument("logistic_loss: length mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double q = y[i] == 1.0 ? p[i] : 1.0 - p[i];
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    loss -= std::log(q);
  }
  return loss;
}

double tgcv(const Eigen::MatrixXd& M_LL, const Eigen::VectorXd& y_L) {
  const Eigen::Index m = M_LL.rows();
  if (M_LL.cols() != m) throw std::invalid_argument("tgcv: M_LL not square");
  check_labeled(y_L, m, "tgcv");
  const double base = 1.0 - M_LL.trace() / static_cast<double>(m);
  if (std::abs(base) < kSaturationTol)
    throw std::runtime_error("tgcv: saturated smoother (tr(M_LL) = m)");
  return (y_L - M_LL * y_L).squaredNorm() / (base * base);
}

double trace_aggregate(const std::vector<double>& traces) {
  double agg = 1.0;
  for (double t : traces) agg += t - 1.0;
  return agg;
}

double df_denominator(const std::vector<double>& traces, int m) {
  if (m < 1) throw std::invalid_argument("df_denominator: m must be at least 1");
  const double base = 1.0 - trace_aggregate(traces) / static_cast<double>(m);
  if (std::abs(base) < kSaturationTol)
    throw std::runtime_error("df_denominator: saturated smoother");
  return base * base;
}

double taic(double loss, double trace, int m) {
  if (m < 1) throw std::invalid_argument("taic: m must be at least 1");
  return (2.0 / m) * loss + 2.0 * trace / m;
}

double taic(const Eigen::MatrixXd& M_LL, const Eigen::VectorXd& y_L, Link link) {
  if (link != Link::Identity)
    throw std::invalid_argument("taic: logit link needs fitted probabilities, use taic_fitted");
  const Eigen::Index m = M_LL.rows();
  check_labeled(y_L, m, "taic");
  return taic(squared_error_loss(y_L, M_LL * y_L), M_LL.trace(), static_cast<int>(m));
}

double taic_fitted(const Eigen::VectorXd& y_L, const Eigen::VectorXd& fitted_L, double trace,
                   int m, Link link) {
  const double loss = link == Link::Logit ? logistic_loss(y_L, fitted_L)
                                          : squared_error_loss(y_L, fitted_L);
  if (std::isinf(loss)) return loss;  // saturated-probability sentinel
  return taic(loss, trace, m);
}

TermBlueprint TermBlueprint::from_weights(std::string name, SmootherForm form,
                                          Eigen::MatrixXd weights, double gamma,
                                          std::optional<int> k) {
  TermBlueprint bp;
  bp.name = std::move(name);
  bp.form = form;
  bp.penalty = combinatorial_laplacian(weights, bp.name).P;
  bp.weights = std::move(weights);
  bp.gamma = gamma;
  bp.k = k;
  return bp;
}

Eigen::MatrixXd TermBlueprint::raw_smoother(double lambda) const {
  const Eigen::Index n = weights.rows();
  switch (form) {
    case SmootherForm::Stochastic: {
      Eigen::VectorXd deg = weights.rowwise().sum();
      for (Eigen::Index i = 0; i < n; ++i)
        if (deg[i] <= 0.0)
          throw std::runtime_error("term '" + name + "': node " + std::to_string(i) +
                                   " has zero degree");
      return deg.cwiseInverse().asDiagonal() * weights;
    }
    case SmootherForm::Regularized: {
      if (lambda <= 0.0) throw std::invalid_argument("term '" + name + "': lambda must be positive");
      if (lambda == 1.0) {
        // W + P = D when P is the Laplacian of W, so the smoother is D^{-1}W
        Eigen::VectorXd deg = weights.rowwise().sum();
        for (Eigen::Index i = 0; i < n; ++i)
          if (deg[i] <= 0.0)
            throw std::runtime_error("term '" + name + "': node " + std::to_string(i) +
                                     " has zero degree");
        return deg.cwiseInverse().asDiagonal() * weights;
      }
      Eigen::MatrixXd lhs = weights + lambda * penalty;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
      Eigen::MatrixXd S = lu.solve(weights);
      // partial pivoting does not signal singularity; probe the solve
      Eigen::VectorXd probe(n);
      for (Eigen::Index i = 0; i < n; ++i) probe[i] = (i % 2 == 0) ? 1.0 : -0.5;
      const double err = (lhs * (S * probe) - weights * probe).norm();
      if (!(err <= 1e-6 * (1.0 + (weights * probe).norm())))
        throw std::runtime_error("term '" + name + "': W + lambda*P numerically singular");
      return S;
    }
    case SmootherForm::Symmetric: {
      if (lambda <= 0.0) throw std::invalid_argument("term '" + name + "': lambda must be positive");
      Eigen::MatrixXd lhs = lambda * penalty;
      lhs.diagonal().array() += 1.0;
      Eigen::LLT<Eigen::MatrixXd> llt(lhs);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("term '" + name + "': I + lambda*P not positive definite");
      return llt.solve(Eigen::MatrixXd::Identity(n, n));
    }
    case SmootherForm::Centered:
      throw std::invalid_argument("term '" + name + "': centered is not a constructible form");
  }
  throw std::logic_error("unreachable");
}

AdditiveTerm TermBlueprint::term(double lambda) const {
  AdditiveTerm t;
  t.name = name;
  t.smoother = raw_smoother(lambda);
  t.penalty = penalty;
  t.lambda = lambda;
  return t;
}

double model_tgcv(const std::vector<TermBlueprint>& blueprints, const std::vector<double>& lambdas,
                  const Partition& part, const Eigen::VectorXd& y_L, const FitOptions& opt) {
  if (blueprints.empty()) throw std::invalid_argument("model_tgcv: no terms");
  if (lambdas.size() != blueprints.size())
    throw std::invalid_argument("model_tgcv: lambda count mismatch");
  check_labeled(y_L, part.m(), "model_tgcv");

  if (blueprints.size() == 1) {
    const Eigen::MatrixXd R = intercept_plus_centered(blueprints[0].raw_smoother(lambdas[0]));
    if (spectral_radius_uu(R, part) >= 1.0 - 1e-12)
      throw std::runtime_error("model_tgcv: fit operator is not transductive");
    return tgcv(labeled_operator(R, part).M_LL, y_L);
  }
  std::vector<AdditiveTerm> terms;
  std::vector<double> traces;
  for (size_t l = 0; l < blueprints.size(); ++l) {
    terms.push_back(blueprints[l].term(lambdas[l]));
    if (spectral_radius_uu(terms.back().smoother, part) >= 1.0 - 1e-12)
      throw std::runtime_error("model_tgcv: term '" + blueprints[l].name +
                               "' is not transductive at lambda " +
                               std::to_string(lambdas[l]));
    traces.push_back(labeled_operator(terms.back().smoother, part).M_LL.trace());
  }
  FitOptions fopt = opt;
  fopt.term_traces = false;
  AdditiveFit fit = transductive_backfit(terms, part, y_L, fopt);
  if (!fit.converged) throw std::runtime_error("model_tgcv: transductive backfit did not converge");
  const double num = (y_L - pick(fit.eta, part.labeled)).squaredNorm();
  return num / df_denominator(traces, part.m());
}

std::vector<double> estimate_lambdas(const std::vector<TermBlueprint>& blueprints,
                                     const Partition& part, const Eigen::VectorXd& y_L,
                                     std::vector<std::vector<double>> grids, const FitOptions& opt,
                                     SmootherCache* cache) {
  const size_t q = blueprints.size();
  if (q == 0) throw std::invalid_argument("estimate_lambdas: no terms");
  if (grids.size() != q) throw std::invalid_argument("estimate_lambdas: need one grid per term");
  for (auto& g : grids) {
    if (g.empty()) throw std::invalid_argument("estimate_lambdas: empty grid");
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
  }

  const double inf = std::numeric_limits<double>::infinity();
  SmootherCache local;
  SmootherCache& c = cache ? *cache : local;
  // an empty cached matrix marks a (term, lambda) rejected by the membership test
  auto smoother_at = [&](size_t l, double lam) -> const Eigen::MatrixXd& {
    auto key = std::make_pair(blueprints[l].name, lam);
    auto it = c.smoother.find(key);
    if (it == c.smoother.end()) {
      Eigen::MatrixXd S = blueprints[l].raw_smoother(lam);
      if (spectral_radius_uu(S, part) >= 1.0 - 1e-12) S.resize(0, 0);
      it = c.smoother.emplace(key, std::move(S)).first;
    }
    if (it->second.size() == 0)
      throw std::runtime_error("estimate_lambdas: term not transductive at this lambda");
    return it->second;
  };
  auto op_at = [&](size_t l, double lam) -> const LabeledOperator& {
    auto key = std::make_pair(blueprints[l].name, lam);
    auto it = c.op.find(key);
    if (it == c.op.end())
      it = c.op.emplace(key, labeled_operator(smoother_at(l, lam), part)).first;
    return it->second;
  };

  std::map<std::vector<int>, double> memo;
  auto evaluate = [&](const std::vector<int>& idx) {
    auto it = memo.find(idx);
    if (it != memo.end()) return it->second;
    double value = inf;
    try {
      if (q == 1) {
        const Eigen::MatrixXd R = intercept_plus_centered(smoother_at(0, grids[0][idx[0]]));
        if (spectral_radius_uu(R, part) >= 1.0 - 1e-12)
          throw std::runtime_error("estimate_lambdas: fit operator is not transductive");
        value = tgcv(labeled_operator(R, part).M_LL, y_L);
      } else {
        std::vector<AdditiveTerm> terms(q);
        std::vector<double> tr(q);
        std::vector<LabeledOperator> ops(q);
        for (size_t l = 0; l < q; ++l) {
          const double lam = grids[l][idx[l]];
          terms[l].name = blueprints[l].name;
          terms[l].smoother = smoother_at(l, lam);
          terms[l].penalty = blueprints[l].penalty;
          terms[l].lambda = lam;
          ops[l] = op_at(l, lam);
          tr[l] = ops[l].M_LL.trace();
        }
        FitOptions fopt = opt;
        fopt.term_traces = false;
        Eigen::VectorXd y_u0;
        if (fopt.warm_start && fopt.y_u0 == nullptr && part.u() > 0) {
          y_u0 = warm_start_from_operators(ops, part, y_L, fopt.inner_delta, fopt.max_inner);
          fopt.y_u0 = &y_u0;
        }
        AdditiveFit fit = transductive_backfit(terms, part, y_L, fopt);
        if (fit.converged)
          value = (y_L - pick(fit.eta, part.labeled)).squaredNorm() / df_denominator(tr, part.m());
      }
    } catch (const std::exception&) {
      value = inf;  // failed or saturated grid point
    }
    memo.emplace(idx, value);
    return value;
  };

  std::vector<int> current(q, 0);
  double best_val = evaluate(current);
  for (int cycle = 0; cycle < 25; ++cycle) {
    bool changed = false;
    for (size_t l = 0; l < q; ++l) {
      int best_j = -1;
      double best = inf;
      for (int j = 0; j < static_cast<int>(grids[l].size()); ++j) {
        std::vector<int> idx = current;
        idx[l] = j;
        const double v = evaluate(idx);
        if (v < best) {  // ascending scan: ties keep the smaller lambda
          best = v;
          best_j = j;
        }
      }
      if (best_j >= 0 && best_j != current[l] && best <= best_val) {
        current[l] = best_j;
        best_val = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  if (std::isinf(best_val))
    throw std::runtime_error(
        "estimate_lambdas: every grid point failed (saturated smoother or failed fit)");
  std::vector<double> out(q);
  for (size_t l = 0; l < q; ++l) out[l] = grids[l][current[l]];
  return out;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(13);
  for (int i = 0; i < 13; ++i) grid[i] = std::pow(10.0, -3.0 + 0.5 * i);
  return grid;
}

std::vector<double> default_gamma_grid(const Eigen::MatrixXd& distances) {
  std::vector<double> off;
  for (Eigen::Index i = 0; i < distances.rows(); ++i)
    for (Eigen::Index j = i + 1; j < distances.cols(); ++j)
      if (std::isfinite(distances(i, j))) off.push_back(distances(i, j));
  if (off.empty()) throw std::invalid_argument("default_gamma_grid: no finite pairwise distances");
  std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
  double med = off[off.size() / 2];
  if (med <= 0.0) med = 1.0;
  std::vector<double> grid(8);
  for (int i = 0; i < 8; ++i) grid[i] = med * std::pow(10.0, -1.0 + 2.0 * i / 7.0);
  return grid;
}

std::vector<int> default_k_grid(int n) {
  std::vector<int> ks = {3, 5, 10, static_cast<int>(std::ceil(std::sqrt(double(n))))};
  for (int& k : ks) k = std::min(std::max(k, 1), n - 1);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

LearnerMatchResult learner_match(const FeatureView& view, const Partition& part,
                                 const Eigen::VectorXd& y_L, const LearnerPredictions& preds,
                                 const std::vector<GammaK>& grid, DistanceKind distance) {
  if (grid.empty()) throw std::invalid_argument("learner_match: empty grid");
  check_labeled(y_L, part.m(), "learner_match");
  if (preds.phi_U.size() != part.u())
    throw std::invalid_argument("learner_match: phi_U length does not match partition");

  auto k_rank = [](const std::optional<int>& k) {
    return k ? *k : std::numeric_limits<int>::max();  // unthinned sorts after any k
  };
  bool found = false;
  LearnerMatchResult best;
  for (const auto& cand : grid) {
    double crit;
    try {
      Eigen::MatrixXd W = kernel_weights(view, {cand.gamma, distance});
      Eigen::MatrixXd A = cand.k ? knn_graph(W, *cand.k) : W;
      TransductiveSmoother S = [&] {
        try {
          return stochastic_smoother(A, part);
        } catch (const std::exception&) {
          return stochastic_smoother(shortest_path_complete(A, {cand.gamma, distance}), part);
        }
      }();
      const Eigen::MatrixXd S_UU = S.uu();
      const Eigen::Index u = S_UU.rows();
      Eigen::VectorXd yhat_U = Eigen::FullPivLU<Eigen::MatrixXd>(
                                   Eigen::MatrixXd::Identity(u, u) - S_UU)
                                   .solve(S.ul() * y_L);
      crit = (preds.phi_U - yhat_U).squaredNorm();
    } catch (const std::exception&) {
      continue;  // invalid candidate even after completion
    }
    const bool better =
        !found || crit < best.criterion ||
        (crit == best.criterion &&
         (cand.gamma < best.gamma ||
          (cand.gamma == best.gamma && k_rank(cand.k) < k_rank(best.k))));
    if (better) {
      best = {cand.gamma, cand.k, crit};
      found = true;
    }
  }
  if (!found) throw std::runtime_error("learner_match: no grid candidate yields a valid smoother");
  return best;
}

double prop1_radius(const PenaltyMatrix& P1, const PenaltyMatrix& P2, double lambda1,
                    double lambda2, const Eigen::VectorXd& variance, const Partition& part) {
  const Eigen::Index n = part.n;
  if (P1.P.rows() != n || P2.P.rows() != n)
    throw std::invalid_argument("prop1_radius: penalty size does not match partition");
  if (variance.size() != n) throw std::invalid_argument("prop1_radius: variance length mismatch");
  if (lambda1 <= 0.0 || lambda2 <= 0.0)
    throw std::invalid_argument("prop1_radius: lambdas must be positive");
  if (variance.minCoeff() <= 0.0)
    throw std::invalid_argument("prop1_radius: variance entries must be positive");

  auto centered_smoother = [&](const PenaltyMatrix& P, double lambda) {
    Eigen::MatrixXd lhs = lambda * P.P;
    lhs.diagonal() += variance;
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("prop1_radius: V + lambda*P not positive definite");
    Eigen::MatrixXd S = llt.solve(Eigen::MatrixXd(variance.asDiagonal()));
    S.rowwise() -= S.colwise().mean();  // apply the centering C
    return S;
  };
  const Eigen::MatrixXd S1 = centered_smoother(P1, lambda1);
  const Eigen::MatrixXd S2 = centered_smoother(P2, lambda2);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  auto block = [&](const Eigen::MatrixXd& Sj, const Eigen::MatrixXd& Si) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(I - Sj * Si);
    if (!lu.isInvertible()) throw std::runtime_error("prop1_radius: I - S_j S_i is singular");
    Eigen::MatrixXd T = lu.solve(Sj * (I - Si));
    return pick(T, part.unlabeled, part.unlabeled);
  };
  return spectral_radius(block(S1, S2) + block(S2, S1));
}

SelectionResult hierarchical_search(const std::vector<CandidateTerm>& candidates,
                                    const Partition& part, const Eigen::VectorXd& y_L,
                                    const SelectionConfig& config) {
  const int q = static_cast<int>(candidates.size());
  if (q == 0) throw std::invalid_argument("hierarchical_search: no candidate terms");
  if (q > 16) throw std::invalid_argument("hierarchical_search: too many candidate terms");
  check_labeled(y_L, part.m(), "hierarchical_search");
  if (!config.lambda_grids.empty() && config.lambda_grids.size() != candidates.size())
    throw std::invalid_argument("hierarchical_search: need one lambda grid per candidate");

  // admissible subsets, size ascending then lexicographic
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask < (1u << q); ++mask) {
    bool ok = true;
    if (config.hierarchy) {
      for (int i = 0; i < q && ok; ++i) {
        if (!(mask & (1u << i)) || !candidates[i].is_interaction) continue;
        for (int p : candidates[i].parents)
          if (p < 0 || !(mask & (1u << p))) ok = false;
      }
    }
    if (ok) masks.push_back(mask);
  }
  std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
    const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
    return pa != pb ? pa < pb : a < b;
  });

  SelectionResult result;
  for (size_t rank = 0; rank < masks.size(); ++rank) {
    const unsigned mask = masks[rank];
    std::vector<TermBlueprint> bps;
    std::vector<std::vector<double>> grids;
    SelectionReport rep;
    for (int i = 0; i < q; ++i) {
      if (!(mask & (1u << i))) continue;
      bps.push_back(candidates[i].blueprint);
      grids.push_back(config.lambda_grids.empty() ? default_lambda_grid()
                                                  : config.lambda_grids[i]);
      rep.model_terms.push_back(candidates[i].blueprint.name);
      rep.tau.push_back({candidates[i].blueprint.gamma, candidates[i].blueprint.k});
    }
    try {
      rep.lambda = estimate_lambdas(bps, part, y_L, grids, config.fit);
      std::vector<AdditiveTerm> terms;
      for (size_t l = 0; l < bps.size(); ++l) terms.push_back(bps[l].term(rep.lambda[l]));
      AdditiveFit fit = config.link == Link::Logit
                            ? local_scoring(terms, part, y_L, config.fit)
                            : transductive_backfit(terms, part, y_L, config.fit);
      rep.converged = fit.converged;
      std::vector<double> traces;
      for (const auto& tf : fit.term_fits) traces.push_back(tf.trace_M);
      rep.df = trace_aggregate(traces);
      const Eigen::VectorXd fitted_L = pick(fit.yhat, part.labeled);
      rep.loss = config.link == Link::Logit ? logistic_loss(y_L, fitted_L)
                                            : squared_error_loss(y_L, fitted_L);
      rep.taic = std::isinf(rep.loss) ? rep.loss : taic(rep.loss, rep.df, part.m());
      try {
        rep.tgcv = model_tgcv(bps, rep.lambda, part, y_L, config.fit);
      } catch (const std::exception&) {
        rep.tgcv = std::numeric_limits<double>::quiet_NaN();
      }
      if (bps.size() == 2) {
        try {
          Eigen::VectorXd v = Eigen::VectorXd::Ones(part.n);
          if (config.link == Link::Logit)
            for (int i = 0; i < part.n; ++i)
              v[i] = std::max(fit.yhat[i] * (1.0 - fit.yhat[i]), kVarianceFloor);
          rep.prop1 = prop1_radius({bps[0].penalty, bps[0].name}, {bps[1].penalty, bps[1].name},
                                   rep.lambda[0], rep.lambda[1], v, part);
        } catch (const std::exception&) {
          rep.prop1 = std::nullopt;
        }
      }
    } catch (const std::exception& e) {
      rep.failed = true;
      rep.error = e.what();
      rep.taic = std::numeric_limits<double>::infinity();
    }
    result.reports.push_back(std::move(rep));
  }

  std::vector<int> order(result.reports.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ra = result.reports[a];
    const auto& rb = result.reports[b];
    if (ra.failed != rb.failed) return !ra.failed;
    if (ra.taic != rb.taic) return ra.taic < rb.taic;
    return ra.model_terms.size() < rb.model_terms.size();
  });
  std::vector<SelectionReport> sorted;
  sorted.reserve(order.size());
  for (int i : order) sorted.push_back(std::move(result.reports[i]));
  result.reports = std::move(sorted);
  result.best = (!result.reports.empty() && !result.reports.front().failed) ? 0 : -1;
  if (result.best < 0) throw std::runtime_error("hierarchical_search: all candidate models failed");
  return result;
}

}  // namespace mvt
