#include "mvt/types.hpp"

#include <algorithm>

namespace mvt {

void Partition::validate() const {
  if (n <= 0) throw std::invalid_argument("partition: n must be positive");
  if (labeled.empty()) throw std::invalid_argument("partition: no labeled observations");
  std::vector<char> seen(n, 0);
  auto mark = [&](const std::vector<int>& idx, const char* which) {
    for (int i : idx) {
      if (i < 0 || i >= n)
        throw std::invalid_argument(std::string("partition: ") + which + " index out of range");
      if (seen[i]) throw std::invalid_argument("partition: duplicate index");
      seen[i] = 1;
    }
  };
  mark(labeled, "labeled");
  mark(unlabeled, "unlabeled");
  if (static_cast<int>(labeled.size() + unlabeled.size()) != n)
    throw std::invalid_argument("partition: labeled and unlabeled do not cover all observations");
  if (!std::is_sorted(labeled.begin(), labeled.end()) ||
      !std::is_sorted(unlabeled.begin(), unlabeled.end()))
    throw std::invalid_argument("partition: index lists must be sorted");
}

Partition Partition::from_missing(const std::vector<bool>& missing) {
  Partition p;
  p.n = static_cast<int>(missing.size());
  for (int i = 0; i < p.n; ++i) (missing[i] ? p.unlabeled : p.labeled).push_back(i);
  p.validate();
  return p;
}

void GraphView::validate() const {
  const Eigen::Index n = adjacency.rows();
  if (adjacency.cols() != n) throw std::invalid_argument("graph view '" + name + "': adjacency not square");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = adjacency(i, j);
      if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("graph view '" + name + "': negative or non-finite weight");
      if (w != adjacency(j, i))
        throw std::invalid_argument("graph view '" + name + "': adjacency not symmetric");
    }
}

std::string TermSpec::name() const {
  std::string out = views.empty() ? std::string("?") : views[0];
  for (size_t i = 1; i < views.size(); ++i) out += "*" + views[i];
  return out;
}

void AdditiveModelSpec::validate() const {
  if (terms.empty()) throw std::invalid_argument("model spec: no terms");
  for (const auto& t : terms) {
    if (t.kind == TermKind::Main && t.views.size() != 1)
      throw std::invalid_argument("model spec: main-effect term must reference exactly 1 view");
    if (t.kind == TermKind::Interaction && t.views.size() != 2)
      throw std::invalid_argument("model spec: interaction term must reference exactly 2 views");
    if (t.gamma && *t.gamma <= 0.0)
      throw std::invalid_argument("model spec: gamma must be positive");
    if (t.k && *t.k < 1) throw std::invalid_argument("model spec: k must be a positive integer");
    if (t.lambda && *t.lambda <= 0.0)
      throw std::invalid_argument("model spec: lambda must be positive");
  }
  if (hierarchy) {
    for (const auto& t : terms) {
      if (t.kind != TermKind::Interaction) continue;
      for (const auto& v : t.views) {
        bool found = false;
        for (const auto& other : terms)
          if (other.kind == TermKind::Main && other.views[0] == v) found = true;
        if (!found)
          throw std::invalid_argument(
              "model spec: interaction '" + t.name() + "' requires main effect for view '" + v +
              "' under the hierarchical constraint (identifiability guard)");
      }
    }
  }
}

Eigen::VectorXd scatter(const Partition& part, const Eigen::VectorXd& labeled_vals,
                        const Eigen::VectorXd& unlabeled_vals) {
  if (labeled_vals.size() != part.m() || unlabeled_vals.size() != part.u())
    throw std::invalid_argument("scatter: part sizes do not match partition");
  Eigen::VectorXd out(part.n);
  for (int i = 0; i < part.m(); ++i) out[part.labeled[i]] = labeled_vals[i];
  for (int i = 0; i < part.u(); ++i) out[part.unlabeled[i]] = unlabeled_vals[i];
  return out;
}

}  // namespace mvt
