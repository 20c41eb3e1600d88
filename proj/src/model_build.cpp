#include "mvt/model_build.hpp"

#include "mvt/smoother.hpp"

#include <map>

namespace mvt {

namespace {

// Graphs are unit-weight when every positive entry is one; hop counts then.
bool is_binary(const Eigen::MatrixXd& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (A(i, j) > 0.0 && A(i, j) != 1.0) return false;
  return true;
}

Eigen::MatrixXd kernel_from_distances(const Eigen::MatrixXd& D, double gamma) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(D.rows(), D.cols());
  for (Eigen::Index i = 0; i < D.rows(); ++i)
    for (Eigen::Index j = 0; j < D.cols(); ++j)
      if (std::isfinite(D(i, j))) W(i, j) = std::exp(-D(i, j) / gamma);
  return W;
}

// Weight matrix of one constituent view at a given kernel width; NaN gamma
// means the raw adjacency (graphs only).
Eigen::MatrixXd constituent_weights(const Dataset& data, const TermSpec& term,
                                    const std::string& view, double gamma) {
  if (const FeatureView* fv = data.find_feature(view)) {
    if (std::isnan(gamma))
      throw std::runtime_error("term '" + term.name() + "': feature view '" + view +
                               "' needs gamma (a number or \"estimate\")");
    Eigen::MatrixXd W = kernel_weights(*fv, {gamma, term.distance});
    return term.k ? knn_graph(W, *term.k) : W;
  }
  const GraphView* gv = data.find_graph(view);
  if (gv == nullptr) throw std::runtime_error("unknown view '" + view + "'");
  if (std::isnan(gamma)) {
    return term.k ? knn_graph(gv->adjacency, *term.k) : gv->adjacency;
  }
  Eigen::MatrixXd W =
      kernel_from_distances(shortest_path_lengths(gv->adjacency, is_binary(gv->adjacency)), gamma);
  return term.k ? knn_graph(W, *term.k) : W;
}

}  // namespace

Eigen::MatrixXd view_distances(const Dataset& data, const TermSpec& term,
                               const std::string& view) {
  if (const FeatureView* fv = data.find_feature(view))
    return pairwise_distances(fv->data, term.distance);
  const GraphView* gv = data.find_graph(view);
  if (gv == nullptr) throw std::runtime_error("unknown view '" + view + "'");
  return shortest_path_lengths(gv->adjacency, is_binary(gv->adjacency));
}

BuiltModel build_model(const Dataset& data, const AdditiveModelSpec& spec, const FitOptions& opt) {
  validate_model_spec(spec, data);
  const Partition& part = data.labels.partition;
  const Eigen::VectorXd& y_L = data.labels.y_L;  // binary treated as continuous here

  BuiltModel built;
  built.blueprints.resize(spec.terms.size());
  built.lambda_grids.resize(spec.terms.size());
  built.resolved = spec.terms;

  // gamma resolution and weight construction, scored by the single-view tGCV
  // of the candidate at the term's lambda (1 when lambda is estimated)
  auto resolve_weights = [&](size_t ti, std::function<Eigen::MatrixXd(double)> weights_at,
                             const Eigen::MatrixXd* dist_for_grid) {
    TermSpec& term = built.resolved[ti];
    if (!term.gamma_estimate) {
      const double g = term.gamma ? *term.gamma : std::numeric_limits<double>::quiet_NaN();
      return std::make_pair(weights_at(g), g);
    }
    const double lam_eval =
        (term.lambda && !term.lambda_estimate && term.form != SmootherForm::Stochastic)
            ? *term.lambda
            : 1.0;
    double best_val = std::numeric_limits<double>::infinity();
    double best_gamma = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd best_W;
    for (double g : default_gamma_grid(*dist_for_grid)) {
      try {
        Eigen::MatrixXd W = weights_at(g);
        TermBlueprint bp = TermBlueprint::from_weights(term.name(), term.form, W, g, term.k);
        const double val = model_tgcv({bp}, {lam_eval}, part, y_L, opt);
        if (val < best_val) {  // ascending grid: ties keep the smaller gamma
          best_val = val;
          best_gamma = g;
          best_W = std::move(W);
        }
      } catch (const std::exception&) {
        // unusable width; try the next grid point
      }
    }
    if (std::isnan(best_gamma))
      throw std::runtime_error("term '" + term.name() + "': no usable gamma in the default grid");
    return std::make_pair(std::move(best_W), best_gamma);
  };

  // main effects first so interactions can reuse their parents' weights
  std::map<std::string, const Eigen::MatrixXd*> main_weights;
  for (size_t ti = 0; ti < spec.terms.size(); ++ti) {
    TermSpec& term = built.resolved[ti];
    if (term.kind != TermKind::Main) continue;
    const std::string& view = term.views[0];
    Eigen::MatrixXd dist;
    if (term.gamma_estimate) dist = view_distances(data, term, view);
    auto [W, gamma] = resolve_weights(
        ti, [&](double g) { return constituent_weights(data, term, view, g); }, &dist);
    if (term.gamma_estimate) {
      term.gamma = gamma;
      term.gamma_estimate = false;
    }
    built.blueprints[ti] = TermBlueprint::from_weights(
        term.name(), term.form, std::move(W),
        term.gamma ? *term.gamma : std::numeric_limits<double>::quiet_NaN(), term.k);
    main_weights[view] = &built.blueprints[ti].weights;
  }

  for (size_t ti = 0; ti < spec.terms.size(); ++ti) {
    TermSpec& term = built.resolved[ti];
    if (term.kind != TermKind::Interaction) continue;
    // constituent weights come from the matching main effect when present,
    // otherwise from this term's own settings applied to both views
    auto constituent = [&](const std::string& view, double g) -> Eigen::MatrixXd {
      const auto it = main_weights.find(view);
      if (it != main_weights.end()) return *it->second;
      return constituent_weights(data, term, view, g);
    };
    const bool all_parents = main_weights.count(term.views[0]) && main_weights.count(term.views[1]);
    Eigen::MatrixXd dist;
    if (term.gamma_estimate && !all_parents) dist = view_distances(data, term, term.views[0]);
    if (term.gamma_estimate && all_parents) {
      term.gamma_estimate = false;  // nothing left to estimate
      term.gamma.reset();
    }
    auto [W, gamma] = resolve_weights(
        ti,
        [&](double g) {
          return interaction_graph(constituent(term.views[0], g), constituent(term.views[1], g),
                                   term.op);
        },
        &dist);
    if (term.gamma_estimate) {
      term.gamma = gamma;
      term.gamma_estimate = false;
    }
    built.blueprints[ti] = TermBlueprint::from_weights(
        term.name(), term.form, std::move(W),
        term.gamma ? *term.gamma : std::numeric_limits<double>::quiet_NaN(), term.k);
  }

  for (size_t ti = 0; ti < spec.terms.size(); ++ti) {
    const TermSpec& term = built.resolved[ti];
    if (term.form == SmootherForm::Stochastic)
      built.lambda_grids[ti] = {1.0};  // no tuning parameter in D^{-1}A
    else if (term.lambda_estimate)
      built.lambda_grids[ti] = default_lambda_grid();
    else
      built.lambda_grids[ti] = {term.lambda ? *term.lambda : 1.0};
  }
  return built;
}

}  // namespace mvt
