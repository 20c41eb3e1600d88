#ifndef MVT_INGEST_HPP
#define MVT_INGEST_HPP

#include "mvt/types.hpp"

namespace mvt {

// Labels plus the canonical observation order they define.
struct LabelData {
  LabelVector labels;
  Partition partition;
  std::vector<std::string> ids;
  Eigen::VectorXd y_L;  // labeled values in partition order
};

// CSV with a header row; first column is the observation id, remaining
// columns are numeric. Rows keep first-appearance order.
FeatureView load_feature_view(const std::string& path, const std::string& name);

// Whitespace-separated lines `src dst weight`. Duplicate and reversed entries
// are summed into one symmetric weight; diagonal entries are kept.
GraphView load_graph_view(const std::string& path, const std::string& name,
                          const std::vector<std::string>& id_order);

// CSV `id,label` with the literal NA marking unlabeled rows. An empty
// id_order takes the canonical order from the file itself; otherwise rows are
// matched against the given order.
LabelData load_labels(const std::string& path, Task task,
                      const std::vector<std::string>& id_order = {});

// CSV `id,phi` covering all n ids; split into labeled/unlabeled parts.
LearnerPredictions load_learner_predictions(const std::string& path, const std::string& view_name,
                                            const std::vector<std::string>& id_order,
                                            const Partition& part);

AdditiveModelSpec load_model_spec(const std::string& path);
AdditiveModelSpec parse_model_spec(const std::string& json_text);

// Edge-list writer; loading the output reproduces the adjacency exactly.
void save_graph_view(const GraphView& g, const std::vector<std::string>& id_order,
                     const std::string& path);

// Reorder rows to the canonical id order; the id sets must coincide.
FeatureView align_feature_view(FeatureView view, const std::vector<std::string>& id_order);

struct Dataset {
  std::vector<FeatureView> features;
  std::vector<GraphView> graphs;
  LabelData labels;

  const FeatureView* find_feature(const std::string& name) const;
  const GraphView* find_graph(const std::string& name) const;
  bool has_view(const std::string& name) const;
};

// Cross checks that need data: every referenced view exists and the link
// matches the label task.
void validate_model_spec(const AdditiveModelSpec& spec, const Dataset& data);

}  // namespace mvt

#endif
