#ifndef MVT_MODEL_BUILD_HPP
#define MVT_MODEL_BUILD_HPP

#include "mvt/ingest.hpp"
#include "mvt/modelsel.hpp"

namespace mvt {

struct BuiltModel {
  std::vector<TermBlueprint> blueprints;
  std::vector<std::vector<double>> lambda_grids;  // singleton grid for fixed lambdas
  std::vector<TermSpec> resolved;                 // spec echo with estimated gammas filled in
};

// Pairwise distances a term sees on one view: the configured metric on
// feature rows, shortest-path lengths on graphs (edge length 1/weight).
Eigen::MatrixXd view_distances(const Dataset& data, const TermSpec& term,
                               const std::string& view);

// Instantiate every term of the model: resolve "estimate" kernel widths by
// tGCV on the term's single-view model, build kernel/K-NN weight matrices and
// interaction composites, and attach per-term lambda grids.
BuiltModel build_model(const Dataset& data, const AdditiveModelSpec& spec,
                       const FitOptions& opt = {});

}  // namespace mvt

#endif
