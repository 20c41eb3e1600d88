#include "mvt/ingest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace mvt {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool parse_number(const std::string& token, double& out) {
  if (token.empty()) return false;
  char* end = nullptr;
  out = std::strtod(token.c_str(), &end);
  return end == token.c_str() + token.size() && std::isfinite(out);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::map<std::string, int> index_of(const std::vector<std::string>& ids) {
  std::map<std::string, int> idx;
  for (size_t i = 0; i < ids.size(); ++i) idx[ids[i]] = static_cast<int>(i);
  return idx;
}

}  // namespace

FeatureView load_feature_view(const std::string& path, const std::string& name) {
  const auto lines = read_lines(path);
  if (lines.empty() || trim(lines[0]).empty())
    throw std::runtime_error("feature view '" + name + "': no observations in '" + path + "'");
  const auto header = split_csv(lines[0]);
  if (header.size() < 2)
    throw std::runtime_error("feature view '" + name + "': header needs an id column and at "
                             "least one variable");
  FeatureView view;
  view.name = name;
  view.column_names.assign(header.begin() + 1, header.end());
  const int p = static_cast<int>(view.column_names.size());

  std::vector<std::vector<double>> rows;
  std::map<std::string, int> seen;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_csv(lines[li]);
    const int row = static_cast<int>(rows.size()) + 1;  // 1-based data row
    if (static_cast<int>(fields.size()) != p + 1)
      throw std::runtime_error("feature view '" + name + "': row " + std::to_string(row) +
                               " has " + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(p + 1));
    if (seen.count(fields[0]))
      throw std::runtime_error("feature view '" + name + "': duplicate id '" + fields[0] + "'");
    seen[fields[0]] = row;
    view.ids.push_back(fields[0]);
    std::vector<double> vals(p);
    for (int j = 0; j < p; ++j) {
      if (!parse_number(fields[j + 1], vals[j]))
        throw std::runtime_error("feature view '" + name + "': parse error at row " +
                                 std::to_string(row) + ", column '" + view.column_names[j] +
                                 "': '" + fields[j + 1] + "' is not a number");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty())
    throw std::runtime_error("feature view '" + name + "': no observations in '" + path + "'");
  view.data.resize(rows.size(), p);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < p; ++j) view.data(i, j) = rows[i][j];
  return view;
}

GraphView load_graph_view(const std::string& path, const std::string& name,
                          const std::vector<std::string>& id_order) {
  const auto idx = index_of(id_order);
  const int n = static_cast<int>(id_order.size());
  GraphView g;
  g.name = name;
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  const auto lines = read_lines(path);
  for (size_t li = 0; li < lines.size(); ++li) {
    const std::string line = trim(lines[li]);
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string src, dst, wtoken, extra;
    if (!(ss >> src >> dst >> wtoken) || (ss >> extra))
      throw std::runtime_error("graph view '" + name + "': malformed line " +
                               std::to_string(li + 1) + " (want 'src dst weight')");
    double w;
    if (!parse_number(wtoken, w))
      throw std::runtime_error("graph view '" + name + "': bad weight '" + wtoken + "' on line " +
                               std::to_string(li + 1));
    if (w < 0.0)
      throw std::runtime_error("graph view '" + name + "': negative weight on line " +
                               std::to_string(li + 1));
    const auto si = idx.find(src);
    const auto di = idx.find(dst);
    if (si == idx.end() || di == idx.end())
      throw std::runtime_error("graph view '" + name + "': unknown id '" +
                               (si == idx.end() ? src : dst) + "' on line " +
                               std::to_string(li + 1));
    g.adjacency(si->second, di->second) += w;
    if (si->second != di->second) g.adjacency(di->second, si->second) += w;
  }
  return g;
}

LabelData load_labels(const std::string& path, Task task,
                      const std::vector<std::string>& id_order) {
  const auto lines = read_lines(path);
  if (lines.empty() || split_csv(lines[0]).size() != 2)
    throw std::runtime_error("labels: expected CSV with header 'id,label' in '" + path + "'");

  std::vector<std::string> ids;
  std::vector<double> values;  // NaN = missing
  std::map<std::string, int> seen;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_csv(lines[li]);
    if (fields.size() != 2)
      throw std::runtime_error("labels: malformed line " + std::to_string(li + 1));
    if (seen.count(fields[0]))
      throw std::runtime_error("labels: duplicate id '" + fields[0] + "'");
    seen[fields[0]] = 1;
    double v = std::numeric_limits<double>::quiet_NaN();
    if (fields[1] != "NA") {
      if (!parse_number(fields[1], v))
        throw std::runtime_error("labels: bad value '" + fields[1] + "' for id '" + fields[0] +
                                 "' (use NA for unlabeled)");
      if (task == Task::Classification && v != 0.0 && v != 1.0)
        throw std::runtime_error("labels: classification label for id '" + fields[0] +
                                 "' must be 0 or 1");
    }
    ids.push_back(fields[0]);
    values.push_back(v);
  }
  if (ids.empty()) throw std::runtime_error("labels: no observations in '" + path + "'");

  LabelData data;
  if (id_order.empty()) {
    data.ids = ids;
  } else {
    if (id_order.size() != ids.size())
      throw std::runtime_error("labels: id count does not match the expected order");
    data.ids = id_order;
    const auto have = index_of(ids);
    std::vector<double> reordered(ids.size());
    for (size_t i = 0; i < id_order.size(); ++i) {
      const auto it = have.find(id_order[i]);
      if (it == have.end()) throw std::runtime_error("labels: missing id '" + id_order[i] + "'");
      reordered[i] = values[it->second];
    }
    values = std::move(reordered);
  }

  const int n = static_cast<int>(values.size());
  data.labels.task = task;
  data.labels.values.resize(n);
  std::vector<bool> missing(n);
  for (int i = 0; i < n; ++i) {
    data.labels.values[i] = values[i];
    missing[i] = std::isnan(values[i]);
  }
  if (std::all_of(missing.begin(), missing.end(), [](bool b) { return b; }))
    throw std::runtime_error("labels: no labeled observations");
  data.partition = Partition::from_missing(missing);
  data.y_L.resize(data.partition.m());
  for (int i = 0; i < data.partition.m(); ++i)
    data.y_L[i] = data.labels.values[data.partition.labeled[i]];
  return data;
}

LearnerPredictions load_learner_predictions(const std::string& path, const std::string& view_name,
                                            const std::vector<std::string>& id_order,
                                            const Partition& part) {
  const auto lines = read_lines(path);
  if (lines.empty() || split_csv(lines[0]).size() != 2)
    throw std::runtime_error("learner predictions: expected CSV with header 'id,phi'");
  const auto idx = index_of(id_order);
  const int n = static_cast<int>(id_order.size());
  Eigen::VectorXd phi(n);
  std::vector<bool> filled(n, false);
  for (size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_csv(lines[li]);
    if (fields.size() != 2)
      throw std::runtime_error("learner predictions: malformed line " + std::to_string(li + 1));
    const auto it = idx.find(fields[0]);
    if (it == idx.end())
      throw std::runtime_error("learner predictions: unknown id '" + fields[0] + "'");
    if (filled[it->second])
      throw std::runtime_error("learner predictions: duplicate id '" + fields[0] + "'");
    double v;
    if (!parse_number(fields[1], v))
      throw std::runtime_error("learner predictions: bad value for id '" + fields[0] + "'");
    phi[it->second] = v;
    filled[it->second] = true;
  }
  for (int i = 0; i < n; ++i)
    if (!filled[i])
      throw std::runtime_error("learner predictions: missing id '" + id_order[i] + "'");

  LearnerPredictions preds;
  preds.view_name = view_name;
  preds.phi_L = pick(phi, part.labeled);
  preds.phi_U = pick(phi, part.unlabeled);
  return preds;
}

namespace {

TermSpec parse_term(const nlohmann::json& jt) {
  TermSpec t;
  if (!jt.contains("views") || !jt["views"].is_array() || jt["views"].empty())
    throw std::runtime_error("model spec: every term needs a nonempty 'views' array");
  for (const auto& v : jt["views"]) t.views.push_back(v.get<std::string>());
  const std::string kind = jt.value("kind", t.views.size() == 2 ? "interaction" : "main");
  if (kind == "main")
    t.kind = TermKind::Main;
  else if (kind == "interaction")
    t.kind = TermKind::Interaction;
  else
    throw std::runtime_error("model spec: unknown term kind '" + kind + "'");

  const std::string op = jt.value("interaction_op", "intersection");
  if (op == "intersection")
    t.op = InteractionOp::Intersection;
  else if (op == "union")
    t.op = InteractionOp::Union;
  else
    throw std::runtime_error("model spec: unknown interaction_op '" + op + "'");

  const std::string form = jt.value("smoother", "regularized");
  if (form == "stochastic")
    t.form = SmootherForm::Stochastic;
  else if (form == "regularized")
    t.form = SmootherForm::Regularized;
  else if (form == "symmetric")
    t.form = SmootherForm::Symmetric;
  else
    throw std::runtime_error("model spec: unknown smoother form '" + form + "'");

  const std::string dist = jt.value("distance", "euclidean");
  if (dist == "euclidean")
    t.distance = DistanceKind::Euclidean;
  else if (dist == "cosine" || dist == "cosine_dissimilarity")
    t.distance = DistanceKind::CosineDissimilarity;
  else
    throw std::runtime_error("model spec: unknown distance '" + dist + "'");

  if (jt.contains("gamma") && !jt["gamma"].is_null()) {
    if (jt["gamma"].is_string()) {
      if (jt["gamma"] != "estimate")
        throw std::runtime_error("model spec: gamma must be a number or \"estimate\"");
      t.gamma_estimate = true;
    } else {
      t.gamma = jt["gamma"].get<double>();
    }
  }
  if (jt.contains("k") && !jt["k"].is_null()) t.k = jt["k"].get<int>();
  if (jt.contains("lambda") && !jt["lambda"].is_null()) {
    if (jt["lambda"].is_string()) {
      if (jt["lambda"] != "estimate")
        throw std::runtime_error("model spec: lambda must be a number or \"estimate\"");
      t.lambda_estimate = true;
    } else {
      t.lambda = jt["lambda"].get<double>();
    }
  } else {
    t.lambda_estimate = true;  // unspecified lambda gets estimated
  }
  return t;
}

}  // namespace

AdditiveModelSpec parse_model_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("model spec: invalid JSON: ") + e.what());
  }
  AdditiveModelSpec spec;
  const std::string link = j.value("link", "identity");
  if (link == "identity")
    spec.link = Link::Identity;
  else if (link == "logit")
    spec.link = Link::Logit;
  else
    throw std::runtime_error("model spec: unknown link '" + link + "'");
  spec.hierarchy = j.value("hierarchy", true);
  if (!j.contains("terms") || !j["terms"].is_array())
    throw std::runtime_error("model spec: missing 'terms' array");
  for (const auto& jt : j["terms"]) spec.terms.push_back(parse_term(jt));
  spec.validate();
  return spec;
}

AdditiveModelSpec load_model_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_spec(ss.str());
}

void save_graph_view(const GraphView& g, const std::vector<std::string>& id_order,
                     const std::string& path) {
  const Eigen::Index n = g.adjacency.rows();
  if (static_cast<Eigen::Index>(id_order.size()) != n)
    throw std::invalid_argument("save_graph_view: id count mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[64];
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      if (g.adjacency(i, j) != 0.0) {
        std::snprintf(buf, sizeof(buf), "%.17g", g.adjacency(i, j));
        out << id_order[i] << ' ' << id_order[j] << ' ' << buf << '\n';
      }
}

FeatureView align_feature_view(FeatureView view, const std::vector<std::string>& id_order) {
  if (view.ids.size() != id_order.size())
    throw std::runtime_error("view '" + view.name + "': id count does not match the labels file");
  const auto have = index_of(view.ids);
  Eigen::MatrixXd data(view.data.rows(), view.data.cols());
  for (size_t i = 0; i < id_order.size(); ++i) {
    const auto it = have.find(id_order[i]);
    if (it == have.end())
      throw std::runtime_error("view '" + view.name + "': missing id '" + id_order[i] + "'");
    data.row(i) = view.data.row(it->second);
  }
  view.data = std::move(data);
  view.ids = id_order;
  return view;
}

const FeatureView* Dataset::find_feature(const std::string& name) const {
  for (const auto& v : features)
    if (v.name == name) return &v;
  return nullptr;
}

const GraphView* Dataset::find_graph(const std::string& name) const {
  for (const auto& g : graphs)
    if (g.name == name) return &g;
  return nullptr;
}

bool Dataset::has_view(const std::string& name) const {
  return find_feature(name) != nullptr || find_graph(name) != nullptr;
}

void validate_model_spec(const AdditiveModelSpec& spec, const Dataset& data) {
  spec.validate();
  for (const auto& t : spec.terms)
    for (const auto& v : t.views)
      if (!data.has_view(v))
        throw std::runtime_error("model spec: unknown view '" + v + "'");
  const Task task = data.labels.labels.task;
  if ((spec.link == Link::Logit) != (task == Task::Classification))
    throw std::runtime_error("model spec: link/task mismatch");
}

}  // namespace mvt
