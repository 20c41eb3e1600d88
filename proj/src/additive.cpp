#include "mvt/additive.hpp"

#include <Eigen/Cholesky>

namespace mvt {

namespace {

Eigen::VectorXd centered(Eigen::VectorXd v) {
  v.array() -= v.mean();
  return v;
}

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

void check_options(const FitOptions& opt) {
  if (opt.max_outer < 1 || opt.max_inner < 1)
    throw std::invalid_argument("additive fit: iteration limits must be positive");
  if (opt.outer_delta <= 0.0 || opt.inner_delta <= 0.0)
    throw std::invalid_argument("additive fit: tolerances must be positive");
}

void check_terms(const std::vector<AdditiveTerm>& terms, int n, bool need_penalty) {
  if (terms.empty()) throw std::invalid_argument("additive fit: no terms");
  for (const auto& t : terms) {
    if (!need_penalty && (t.smoother.rows() != n || t.smoother.cols() != n))
      throw std::invalid_argument("additive fit: term '" + t.name + "' smoother is not n x n");
    if (need_penalty) {
      if (t.penalty.rows() != n || t.penalty.cols() != n)
        throw std::invalid_argument("additive fit: term '" + t.name +
                                    "' has no n x n penalty matrix");
      if (t.lambda <= 0.0)
        throw std::invalid_argument("additive fit: term '" + t.name + "' lambda must be positive");
    }
  }
}

std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> matrix_smoothers(
    const std::vector<AdditiveTerm>& terms) {
  std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> fns;
  fns.reserve(terms.size());
  for (const auto& t : terms)
    fns.push_back([&S = t.smoother](const Eigen::VectorXd& r) { return Eigen::VectorXd(S * r); });
  return fns;
}

void fill_term_traces(AdditiveFit& fit, const std::vector<AdditiveTerm>& terms,
                      const Partition& part) {
  for (size_t l = 0; l < terms.size(); ++l)
    fit.term_fits[l].trace_M = labeled_operator(terms[l].smoother, part).M_LL.trace();
}

}  // namespace

Eigen::MatrixXd intercept_plus_centered(const Eigen::MatrixXd& S) {
  const double n = static_cast<double>(S.rows());
  Eigen::MatrixXd R = S;
  R.rowwise() -= S.colwise().mean();
  R.array() += 1.0 / n;
  return R;
}

GaussSeidelResult gauss_seidel_backfit(
    const std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>& smooth,
    const Eigen::VectorXd& y, double delta, int max_iter, std::vector<Eigen::VectorXd> f_init) {
  const size_t q = smooth.size();
  if (q == 0) throw std::invalid_argument("gauss_seidel_backfit: no smoothers");
  const Eigen::Index n = y.size();

  GaussSeidelResult res;
  res.alpha = y.mean();
  if (f_init.size() == q) {
    res.f = std::move(f_init);
    for (const auto& f : res.f)
      if (f.size() != n) throw std::invalid_argument("gauss_seidel_backfit: bad f_init length");
  } else {
    res.f.assign(q, Eigen::VectorXd::Zero(n));
  }

  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (const auto& f : res.f) total += f;

  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    for (size_t l = 0; l < q; ++l) {
      Eigen::VectorXd r = y - total + res.f[l];
      r.array() -= res.alpha;
      Eigen::VectorXd g = centered(smooth[l](r));
      total += g - res.f[l];
      res.f[l] = std::move(g);
    }
    res.sweeps = sweep;
    // stationarity of every normal equation at the frozen state
    double worst = 0.0;
    for (size_t l = 0; l < q; ++l) {
      Eigen::VectorXd r = y - total + res.f[l];
      r.array() -= res.alpha;
      worst = std::max(worst, (centered(smooth[l](r)) - res.f[l]).cwiseAbs().maxCoeff());
      if (worst >= delta) break;
    }
    if (worst < delta) {
      res.converged = true;
      break;
    }
  }
  return res;
}

AdditiveFit backfit_regression(const std::vector<AdditiveTerm>& terms, const Eigen::VectorXd& y,
                               double delta, int max_iter) {
  check_terms(terms, static_cast<int>(y.size()), /*need_penalty=*/false);
  GaussSeidelResult gs = gauss_seidel_backfit(matrix_smoothers(terms), y, delta, max_iter);

  AdditiveFit fit;
  fit.link = Link::Identity;
  fit.alpha = gs.alpha;
  fit.eta = Eigen::VectorXd::Constant(y.size(), gs.alpha);
  fit.term_fits.resize(terms.size());
  for (size_t l = 0; l < terms.size(); ++l) {
    fit.eta += gs.f[l];
    fit.term_fits[l].f = std::move(gs.f[l]);
  }
  fit.yhat = fit.eta;
  fit.inner_iterations = gs.sweeps;
  fit.outer_iterations = 0;
  fit.converged = gs.converged;
  fit.status = gs.converged ? FitStatus::Converged : FitStatus::MaxIterations;
  return fit;
}

Eigen::VectorXd warm_start_unlabeled(const std::vector<AdditiveTerm>& terms, const Partition& part,
                                     const Eigen::VectorXd& y_L, double delta, int max_iter) {
  check_terms(terms, part.n, /*need_penalty=*/false);
  std::vector<LabeledOperator> ops;
  ops.reserve(terms.size());
  for (const auto& t : terms) ops.push_back(labeled_operator(t.smoother, part));
  return warm_start_from_operators(ops, part, y_L, delta, max_iter);
}

Eigen::VectorXd warm_start_from_operators(const std::vector<LabeledOperator>& ops,
                                          const Partition& part, const Eigen::VectorXd& y_L,
                                          double delta, int max_iter) {
  if (ops.empty()) throw std::invalid_argument("warm start: no terms");
  if (part.u() == 0) return Eigen::VectorXd(0);

  std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> fns;
  for (const auto& op : ops)
    fns.push_back(
        [&M = op.M_LL](const Eigen::VectorXd& r) { return Eigen::VectorXd(M * r); });
  GaussSeidelResult gs = gauss_seidel_backfit(fns, y_L, delta, max_iter);

  Eigen::VectorXd total = Eigen::VectorXd::Zero(part.m());
  for (const auto& f : gs.f) total += f;
  Eigen::VectorXd y_u0 = Eigen::VectorXd::Constant(part.u(), gs.alpha);
  for (size_t l = 0; l < ops.size(); ++l) {
    Eigen::VectorXd eps_L = y_L - total + gs.f[l];
    eps_L.array() -= gs.alpha;
    y_u0 += ops[l].M_UL * eps_L;
  }
  return y_u0;
}

AdditiveFit transductive_backfit(const std::vector<AdditiveTerm>& terms, const Partition& part,
                                 const Eigen::VectorXd& y_L, const FitOptions& opt) {
  part.validate();
  check_options(opt);
  check_terms(terms, part.n, /*need_penalty=*/false);
  if (y_L.size() != part.m())
    throw std::invalid_argument("transductive_backfit: Y_L length does not match partition");

  if (part.u() == 0) {
    AdditiveFit fit = backfit_regression(terms, y_L, opt.inner_delta, opt.max_inner);
    fit.outer_iterations = 1;
    if (opt.term_traces) fill_term_traces(fit, terms, part);
    return fit;
  }

  Eigen::VectorXd y_u;
  if (opt.y_u0 != nullptr) {
    if (opt.y_u0->size() != part.u())
      throw std::invalid_argument("transductive_backfit: y_u0 length mismatch");
    y_u = *opt.y_u0;
  } else if (opt.warm_start) {
    y_u = warm_start_unlabeled(terms, part, y_L, opt.inner_delta, opt.max_inner);
  } else {
    y_u = Eigen::VectorXd::Constant(part.u(), y_L.mean());
  }

  auto fns = matrix_smoothers(terms);
  AdditiveFit fit;
  fit.link = Link::Identity;
  std::vector<Eigen::VectorXd> f_prev;
  bool inner_ok = true;
  for (int k = 1; k <= opt.max_outer; ++k) {
    const Eigen::VectorXd y_full = scatter(part, y_L, y_u);
    GaussSeidelResult gs =
        gauss_seidel_backfit(fns, y_full, opt.inner_delta, opt.max_inner, std::move(f_prev));
    f_prev = gs.f;
    inner_ok = gs.converged;
    fit.alpha = gs.alpha;
    fit.eta = Eigen::VectorXd::Constant(part.n, gs.alpha);
    for (const auto& f : gs.f) fit.eta += f;
    fit.inner_iterations += gs.sweeps;
    fit.outer_iterations = k;

    Eigen::VectorXd eta_U = pick(fit.eta, part.unlabeled);
    const double step = (eta_U - y_u).cwiseAbs().maxCoeff();
    y_u = std::move(eta_U);
    if (step < opt.outer_delta) {
      fit.converged = true;
      break;
    }
  }
  fit.converged = fit.converged && inner_ok;
  fit.status = fit.converged ? FitStatus::Converged : FitStatus::MaxIterations;
  fit.yhat = fit.eta;
  fit.term_fits.resize(terms.size());
  for (size_t l = 0; l < terms.size(); ++l) fit.term_fits[l].f = std::move(f_prev[l]);
  if (opt.term_traces) fill_term_traces(fit, terms, part);
  return fit;
}

AdditiveFit local_scoring(const std::vector<AdditiveTerm>& terms, const Partition& part,
                          const Eigen::VectorXd& y_L, const FitOptions& opt) {
  part.validate();
  check_options(opt);
  check_terms(terms, part.n, /*need_penalty=*/true);
  if (y_L.size() != part.m())
    throw std::invalid_argument("local_scoring: Y_L length does not match partition");
  for (Eigen::Index i = 0; i < y_L.size(); ++i)
    if (y_L[i] != 0.0 && y_L[i] != 1.0)
      throw std::invalid_argument("local_scoring: labels must be 0/1");

  const int n = part.n;
  const size_t q = terms.size();

  // Initial unlabeled probabilities: the identity-link warm start on the
  // binary labels, clipped into (0,1); cold start is the labeled class
  // proportion everywhere.
  bool have_smoothers = true;
  for (const auto& t : terms)
    if (t.smoother.rows() != n || t.smoother.cols() != n) have_smoothers = false;
  Eigen::VectorXd y_u;
  if (part.u() > 0) {
    if (opt.y_u0 != nullptr) {
      if (opt.y_u0->size() != part.u())
        throw std::invalid_argument("local_scoring: y_u0 length mismatch");
      y_u = *opt.y_u0;
    } else if (opt.warm_start && have_smoothers) {
      y_u = warm_start_unlabeled(terms, part, y_L, opt.inner_delta, opt.max_inner);
    } else {
      y_u = Eigen::VectorXd::Constant(part.u(), y_L.mean());
    }
    for (Eigen::Index i = 0; i < y_u.size(); ++i) y_u[i] = clip(y_u[i], 0.01, 0.99);
  }

  AdditiveFit fit;
  fit.link = Link::Logit;
  Eigen::VectorXd eta(n);
  {
    const Eigen::VectorXd y0 = part.u() > 0 ? scatter(part, y_L, y_u) : y_L;
    for (int i = 0; i < n; ++i) {
      const double p = clip(y0[i], 0.01, 0.99);
      eta[i] = std::log(p / (1.0 - p));
    }
  }
  Eigen::VectorXd eta_U_prev = pick(eta, part.unlabeled);
  Eigen::VectorXd v_final = Eigen::VectorXd::Constant(n, 0.25);

  std::vector<Eigen::VectorXd> f_prev;
  double alpha = 0.0;
  bool separated = false;
  bool inner_ok = true;
  const int max_outer = part.u() == 0 ? 1 : opt.max_outer;

  for (int k = 1; k <= max_outer && !separated; ++k) {
    const Eigen::VectorXd y_train = part.u() > 0 ? scatter(part, y_L, y_u) : y_L;
    fit.outer_iterations = k;

    // iterative rescoring at this training response
    inner_ok = false;
    for (int t = 1; t <= opt.max_inner; ++t) {
      const Eigen::VectorXd eta_work = eta.cwiseMax(-kEtaCap).cwiseMin(kEtaCap);
      Eigen::VectorXd p(n), v(n);
      for (int i = 0; i < n; ++i) {
        p[i] = logistic(eta_work[i]);
        v[i] = std::max(p[i] * (1.0 - p[i]), kVarianceFloor);
      }
      const Eigen::VectorXd z = eta_work + ((y_train - p).array() / v.array()).matrix();

      std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
      llts.reserve(q);
      for (const auto& term : terms) {
        Eigen::MatrixXd lhs = term.lambda * term.penalty;
        lhs.diagonal() += v;
        llts.emplace_back(lhs);
        if (llts.back().info() != Eigen::Success)
          throw std::runtime_error("local_scoring: V + lambda*P not positive definite for term '" +
                                   term.name + "'");
      }
      std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> fns;
      for (size_t l = 0; l < q; ++l)
        fns.push_back([&llt = llts[l], &v](const Eigen::VectorXd& r) {
          return Eigen::VectorXd(llt.solve(v.asDiagonal() * r));
        });

      GaussSeidelResult gs =
          gauss_seidel_backfit(fns, z, opt.inner_delta, opt.max_inner, std::move(f_prev));
      f_prev = gs.f;
      alpha = gs.alpha;
      Eigen::VectorXd eta_new = Eigen::VectorXd::Constant(n, gs.alpha);
      for (const auto& f : gs.f) eta_new += f;
      const double step = (eta_new - eta).cwiseAbs().maxCoeff();
      eta = std::move(eta_new);
      v_final = v;
      fit.inner_iterations += 1;
      if (eta.cwiseAbs().maxCoeff() > kEtaCap) {
        separated = true;
        break;
      }
      if (step < opt.inner_delta) {
        inner_ok = true;
        break;
      }
    }
    if (separated) break;

    Eigen::VectorXd eta_U = pick(eta, part.unlabeled);
    if (part.u() > 0) {
      const double outer_step = (eta_U - eta_U_prev).cwiseAbs().maxCoeff();
      eta_U_prev = eta_U;
      const Eigen::VectorXd eta_U_work = eta_U.cwiseMax(-kEtaCap).cwiseMin(kEtaCap);
      y_u = eta_U_work.unaryExpr([](double e) { return logistic(e); });
      if (outer_step < opt.outer_delta) {
        fit.converged = true;
        break;
      }
    } else {
      fit.converged = inner_ok;
      break;
    }
  }

  fit.converged = fit.converged && inner_ok && !separated;
  fit.status = separated ? FitStatus::Separation
                         : (fit.converged ? FitStatus::Converged : FitStatus::MaxIterations);
  fit.alpha = alpha;
  fit.eta = eta;
  fit.yhat = eta.cwiseMax(-kEtaCap).cwiseMin(kEtaCap).unaryExpr([](double e) {
    return logistic(e);
  });
  fit.term_fits.resize(q);
  for (size_t l = 0; l < q; ++l)
    fit.term_fits[l].f = f_prev.size() == q ? f_prev[l] : Eigen::VectorXd::Zero(n);

  if (opt.term_traces) {
    // degrees of freedom of the converged fit: per-term labeled operators of
    // the final reweighted smoothers (V + lambda P)^{-1} V
    for (size_t l = 0; l < q; ++l) {
      Eigen::MatrixXd lhs = terms[l].lambda * terms[l].penalty;
      lhs.diagonal() += v_final;
      Eigen::LLT<Eigen::MatrixXd> llt(lhs);
      Eigen::MatrixXd S_l = llt.solve(Eigen::MatrixXd(v_final.asDiagonal()));
      fit.term_fits[l].trace_M = labeled_operator(S_l, part).M_LL.trace();
    }
  }
  return fit;
}

std::vector<int> predict_assignments(const AdditiveFit& fit, const Partition& part,
                                     double threshold) {
  if (fit.link != Link::Logit)
    throw std::invalid_argument("predict_assignments: fit does not use the logit link");
  std::vector<int> labels;
  labels.reserve(part.unlabeled.size());
  for (int i : part.unlabeled) labels.push_back(fit.yhat[i] >= threshold ? 1 : 0);
  return labels;
}

}  // namespace mvt
