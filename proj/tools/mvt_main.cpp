// Command-line frontend: fit a configured multi-view model, run hierarchical
// model selection, run the lattice benchmark, or check a graph smoother.
// Exit codes: 0 ok, 1 error, 2 fit did not converge, 3 not transductive.

#include "mvt/ingest.hpp"
#include "mvt/lattice.hpp"
#include "mvt/model_build.hpp"
#include "mvt/smoother.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::pair<std::string, std::string> split_assignment(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
    throw std::runtime_error("expected name=path, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

struct CommonArgs {
  std::vector<std::string> views;
  std::vector<std::string> graphs;
  std::string labels_path;
  std::string out_dir;
  int max_outer = 200;
  int max_inner = 1000;
  double outer_delta = 1e-6;
  double inner_delta = 1e-8;
  bool cold_start = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_labels = true) {
  cmd->add_option("--views", args.views, "Feature views as name=path (CSV)");
  cmd->add_option("--graphs", args.graphs, "Graph views as name=path (edge list)");
  auto* lab = cmd->add_option("--labels", args.labels_path, "Labels CSV (id,label; NA=unlabeled)");
  if (needs_labels) lab->required();
  cmd->add_option("--out", args.out_dir, "Output directory")->required();
  cmd->add_option("--max-outer", args.max_outer, "Outer self-training iteration cap");
  cmd->add_option("--max-inner", args.max_inner, "Inner iteration cap");
  cmd->add_option("--outer-delta", args.outer_delta, "Outer stopping tolerance");
  cmd->add_option("--inner-delta", args.inner_delta, "Inner stopping tolerance");
  cmd->add_flag("--cold-start", args.cold_start, "Disable the warm start");
  cmd->add_option("--threads", args.threads, "Worker threads (0 = hardware)");
}

mvt::FitOptions fit_options(const CommonArgs& args) {
  mvt::FitOptions opt;
  opt.max_outer = args.max_outer;
  opt.max_inner = args.max_inner;
  opt.outer_delta = args.outer_delta;
  opt.inner_delta = args.inner_delta;
  opt.warm_start = !args.cold_start;
  return opt;
}

mvt::Dataset load_dataset(const CommonArgs& args, mvt::Task task) {
  mvt::Dataset data;
  data.labels = mvt::load_labels(args.labels_path, task);
  for (const auto& arg : args.views) {
    const auto [name, path] = split_assignment(arg);
    data.features.push_back(
        mvt::align_feature_view(mvt::load_feature_view(path, name), data.labels.ids));
  }
  for (const auto& arg : args.graphs) {
    const auto [name, path] = split_assignment(arg);
    data.graphs.push_back(mvt::load_graph_view(path, name, data.labels.ids));
    data.graphs.back().validate();
  }
  return data;
}

json term_spec_json(const mvt::TermSpec& t) {
  json j;
  j["views"] = t.views;
  j["kind"] = t.kind == mvt::TermKind::Main ? "main" : "interaction";
  if (t.kind == mvt::TermKind::Interaction)
    j["interaction_op"] = t.op == mvt::InteractionOp::Intersection ? "intersection" : "union";
  switch (t.form) {
    case mvt::SmootherForm::Stochastic: j["smoother"] = "stochastic"; break;
    case mvt::SmootherForm::Regularized: j["smoother"] = "regularized"; break;
    case mvt::SmootherForm::Symmetric: j["smoother"] = "symmetric"; break;
    default: break;
  }
  if (t.gamma)
    j["gamma"] = *t.gamma;
  else
    j["gamma"] = nullptr;
  j["k"] = t.k ? json(*t.k) : json(nullptr);
  return j;
}

struct FitArtifacts {
  mvt::AdditiveFit fit;
  std::vector<double> lambdas;
  std::vector<mvt::AdditiveTerm> terms;
  mvt::BuiltModel built;
  double tgcv = std::numeric_limits<double>::quiet_NaN();
  double taic = std::numeric_limits<double>::quiet_NaN();
  double df = std::numeric_limits<double>::quiet_NaN();
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> prop1;
};

FitArtifacts run_fit(const mvt::Dataset& data, const mvt::AdditiveModelSpec& spec,
                     const mvt::FitOptions& opt) {
  const mvt::Partition& part = data.labels.partition;
  const Eigen::VectorXd& y_L = data.labels.y_L;

  FitArtifacts art;
  art.built = mvt::build_model(data, spec, opt);

  bool any_search = false;
  for (const auto& grid : art.built.lambda_grids) any_search = any_search || grid.size() > 1;
  if (any_search) {
    art.lambdas = mvt::estimate_lambdas(art.built.blueprints, part, y_L, art.built.lambda_grids,
                                        opt);
  } else {
    for (const auto& grid : art.built.lambda_grids) art.lambdas.push_back(grid.front());
  }

  for (size_t l = 0; l < art.built.blueprints.size(); ++l) {
    mvt::AdditiveTerm t = art.built.blueprints[l].term(art.lambdas[l]);
    const double rho = mvt::spectral_radius_uu(t.smoother, part);
    if (rho >= 1.0)
      throw std::runtime_error("term '" + t.name + "' is not a transductive smoother (rho_uu = " +
                               std::to_string(rho) +
                               "); consider shortest-path completion or another form");
    art.terms.push_back(std::move(t));
  }

  art.fit = spec.link == mvt::Link::Logit ? mvt::local_scoring(art.terms, part, y_L, opt)
                                          : mvt::transductive_backfit(art.terms, part, y_L, opt);

  std::vector<double> traces;
  for (const auto& tf : art.fit.term_fits) traces.push_back(tf.trace_M);
  art.df = mvt::trace_aggregate(traces);
  const Eigen::VectorXd fitted_L = mvt::pick(art.fit.yhat, part.labeled);
  art.loss = spec.link == mvt::Link::Logit ? mvt::logistic_loss(y_L, fitted_L)
                                           : mvt::squared_error_loss(y_L, fitted_L);
  art.taic = std::isinf(art.loss) ? art.loss : mvt::taic(art.loss, art.df, part.m());
  try {
    art.tgcv = mvt::model_tgcv(art.built.blueprints, art.lambdas, part, y_L, opt);
  } catch (const std::exception&) {
  }
  if (art.terms.size() == 2) {
    try {
      Eigen::VectorXd v = Eigen::VectorXd::Ones(part.n);
      if (spec.link == mvt::Link::Logit)
        for (int i = 0; i < part.n; ++i)
          v[i] = std::max(art.fit.yhat[i] * (1.0 - art.fit.yhat[i]), mvt::kVarianceFloor);
      art.prop1 = mvt::prop1_radius({art.terms[0].penalty, art.terms[0].name},
                                    {art.terms[1].penalty, art.terms[1].name}, art.lambdas[0],
                                    art.lambdas[1], v, part);
    } catch (const std::exception&) {
    }
  }
  return art;
}

json report_json(const mvt::Dataset& data, const mvt::AdditiveModelSpec& spec,
                 const FitArtifacts& art) {
  json j;
  j["link"] = spec.link == mvt::Link::Logit ? "logit" : "identity";
  j["hierarchy"] = spec.hierarchy;
  j["terms"] = json::array();
  for (size_t l = 0; l < art.built.resolved.size(); ++l) {
    json jt = term_spec_json(art.built.resolved[l]);
    jt["name"] = art.built.resolved[l].name();
    jt["lambda"] = art.lambdas[l];
    jt["trace"] = art.fit.term_fits[l].trace_M;
    j["terms"].push_back(jt);
  }
  j["alpha"] = art.fit.alpha;
  j["tgcv"] = std::isnan(art.tgcv) ? json(nullptr) : json(art.tgcv);
  j["taic"] = std::isinf(art.taic) ? json(nullptr) : json(art.taic);
  j["df"] = art.df;
  j["loss"] = std::isinf(art.loss) ? json(nullptr) : json(art.loss);
  j["prop1_radius"] = art.prop1 ? json(*art.prop1) : json(nullptr);
  j["converged"] = art.fit.converged;
  j["status"] = art.fit.status == mvt::FitStatus::Converged
                    ? "converged"
                    : (art.fit.status == mvt::FitStatus::Separation ? "separation" : "max_iter");
  j["outer_iterations"] = art.fit.outer_iterations;
  j["inner_iterations"] = art.fit.inner_iterations;
  j["n"] = data.labels.partition.n;
  j["labeled"] = data.labels.partition.m();
  j["predictions"] = "predictions.csv";
  return j;
}

int cmd_fit(const CommonArgs& args, const std::string& model_path) {
  const mvt::AdditiveModelSpec spec = mvt::load_model_spec(model_path);
  const mvt::Task task =
      spec.link == mvt::Link::Logit ? mvt::Task::Classification : mvt::Task::Regression;
  const mvt::Dataset data = load_dataset(args, task);
  mvt::validate_model_spec(spec, data);

  const FitArtifacts art = run_fit(data, spec, fit_options(args));

  std::filesystem::create_directories(args.out_dir);
  std::string csv = spec.link == mvt::Link::Logit ? "id,yhat,assignment\n" : "id,yhat\n";
  for (int i = 0; i < data.labels.partition.n; ++i) {
    csv += data.labels.ids[i] + "," + fmt(art.fit.yhat[i]);
    if (spec.link == mvt::Link::Logit) csv += std::string(",") + (art.fit.yhat[i] >= 0.5 ? "1" : "0");
    csv += "\n";
  }
  atomic_write(args.out_dir + "/predictions.csv", csv);
  atomic_write(args.out_dir + "/report.json", report_json(data, spec, art).dump(2) + "\n");
  return art.fit.converged ? 0 : 2;
}

int cmd_select(const CommonArgs& args, const std::string& candidates_path) {
  const mvt::AdditiveModelSpec cand_spec = mvt::load_model_spec(candidates_path);
  const mvt::Task task =
      cand_spec.link == mvt::Link::Logit ? mvt::Task::Classification : mvt::Task::Regression;
  const mvt::Dataset data = load_dataset(args, task);
  mvt::validate_model_spec(cand_spec, data);
  const mvt::FitOptions opt = fit_options(args);

  const mvt::BuiltModel built = mvt::build_model(data, cand_spec, opt);
  std::vector<mvt::CandidateTerm> candidates(built.blueprints.size());
  for (size_t i = 0; i < built.blueprints.size(); ++i) {
    candidates[i].blueprint = built.blueprints[i];
    const mvt::TermSpec& t = built.resolved[i];
    if (t.kind == mvt::TermKind::Interaction) {
      candidates[i].is_interaction = true;
      for (int side = 0; side < 2; ++side)
        for (size_t j = 0; j < built.resolved.size(); ++j)
          if (built.resolved[j].kind == mvt::TermKind::Main &&
              built.resolved[j].views[0] == t.views[side])
            candidates[i].parents[side] = static_cast<int>(j);
    }
  }
  mvt::SelectionConfig config;
  config.link = cand_spec.link;
  config.hierarchy = cand_spec.hierarchy;
  config.fit = opt;
  config.lambda_grids = built.lambda_grids;

  const mvt::SelectionResult result =
      mvt::hierarchical_search(candidates, data.labels.partition, data.labels.y_L, config);

  std::filesystem::create_directories(args.out_dir);
  std::string csv = "model,taic,tgcv,df,loss,converged\n";
  for (const auto& rep : result.reports) {
    std::string label;
    for (const auto& t : rep.model_terms) label += (label.empty() ? "" : "+") + t;
    if (rep.failed) {
      csv += label + ",failed,failed,failed,failed,false\n";
      continue;
    }
    csv += label + "," + fmt(rep.taic) + "," + fmt(rep.tgcv) + "," + fmt(rep.df) + "," +
           fmt(rep.loss) + "," + (rep.converged ? "true" : "false") + "\n";
  }
  atomic_write(args.out_dir + "/selection.csv", csv);

  const mvt::SelectionReport& best = result.reports[result.best];
  json j;
  j["model_terms"] = best.model_terms;
  j["lambda"] = best.lambda;
  j["tau"] = json::array();
  for (const auto& [gamma, k] : best.tau) {
    json tau;
    tau["gamma"] = std::isnan(gamma) ? json(nullptr) : json(gamma);
    tau["k"] = k ? json(*k) : json(nullptr);
    j["tau"].push_back(tau);
  }
  j["taic"] = best.taic;
  j["tgcv"] = std::isnan(best.tgcv) ? json(nullptr) : json(best.tgcv);
  j["df"] = best.df;
  j["loss"] = best.loss;
  j["prop1_radius"] = best.prop1 ? json(*best.prop1) : json(nullptr);
  j["converged"] = best.converged;
  atomic_write(args.out_dir + "/best.json", j.dump(2) + "\n");
  return 0;
}

struct LatticeArgs {
  int rows = 25, cols = 25, block = 5, reps = 50, threads = 0;
  std::string pattern = "checkerboard";
  std::string neighborhoods = "square,diagonal";
  std::vector<double> fracs;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<double> gamma_grid, lambda_grid;
};

int cmd_lattice(const LatticeArgs& args, const CommonArgs& common) {
  mvt::LatticeConfig config;
  config.rows = args.rows;
  config.cols = args.cols;
  config.block_size = args.block;
  config.reps = args.reps;
  config.threads = args.threads;
  config.seed = args.seed;
  config.labeled_fracs = args.fracs;
  config.gamma_grid = args.gamma_grid;
  config.lambda_grid = args.lambda_grid;
  config.fit = fit_options(common);
  if (args.pattern == "checkerboard")
    config.pattern = mvt::ResponsePattern::Checkerboard;
  else if (args.pattern == "mixed")
    config.pattern = mvt::ResponsePattern::Mixed;
  else
    throw std::runtime_error("unknown pattern '" + args.pattern + "'");
  config.neighborhoods.clear();
  std::stringstream ss(args.neighborhoods);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token == "square")
      config.neighborhoods.push_back(mvt::Neighborhood::Square);
    else if (token == "diagonal")
      config.neighborhoods.push_back(mvt::Neighborhood::Diagonal);
    else
      throw std::runtime_error("unknown neighborhood '" + token + "'");
  }

  const mvt::BenchResult result = mvt::run_benchmark(config);
  std::filesystem::create_directories(args.out_dir);
  mvt::write_records_csv(result, args.out_dir + "/lattice_runs.csv");
  mvt::write_summary_csv(result, args.out_dir + "/lattice_summary.csv");
  return 0;
}

struct CheckArgs {
  std::string graph_path;
  std::string labels_path;
  std::string form = "stochastic";
  double lambda = 1.0;
  double gamma = 1.0;
  int knn = 0;
};

int cmd_check_smoother(const CheckArgs& args) {
  const mvt::LabelData labels = mvt::load_labels(args.labels_path, mvt::Task::Regression);
  mvt::GraphView g = mvt::load_graph_view(args.graph_path, "graph", labels.ids);
  g.validate();
  const mvt::Partition& part = labels.partition;
  const int n = part.n;

  Eigen::MatrixXd A = g.adjacency;
  if (args.knn > 0) A = mvt::knn_graph(A, args.knn);

  // connected components and their label counts
  std::vector<int> comp(n, -1);
  int ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack = {s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < n; ++w)
        if (w != v && A(v, w) > 0.0 && comp[w] < 0) {
          comp[w] = ncomp;
          stack.push_back(w);
        }
    }
    ++ncomp;
  }
  std::vector<int> comp_labels(ncomp, 0), comp_unlabeled(ncomp, 0);
  for (int i : part.labeled) comp_labels[comp[i]] += 1;
  for (int i : part.unlabeled) comp_unlabeled[comp[i]] += 1;
  int bad_components = 0;
  for (int c = 0; c < ncomp; ++c)
    if (comp_unlabeled[c] > 0 && comp_labels[c] == 0) ++bad_components;
  const bool repairable = bad_components == 0;

  const Eigen::VectorXd deg = A.rowwise().sum();
  int zero_rows = 0;
  for (int i = 0; i < n; ++i) zero_rows += deg[i] <= 0.0;
  int direct_link = 0;
  for (int i : part.unlabeled) {
    double mass = 0.0;
    for (int j : part.labeled) mass += A(i, j);
    direct_link += mass > 0.0;
  }

  std::printf("n = %d, labeled = %d, unlabeled = %d\n", n, part.m(), part.u());
  std::printf("components = %d, components with unlabeled nodes and no label = %d\n", ncomp,
              bad_components);
  std::printf("unlabeled nodes with a direct labeled connection = %d of %d\n", direct_link,
              part.u());
  std::printf("zero-degree nodes = %d, min row sum = %.6g\n", zero_rows,
              n > 0 ? deg.minCoeff() : 0.0);

  try {
    mvt::TransductiveSmoother S = [&] {
      if (args.form == "stochastic") return mvt::stochastic_smoother(A, part);
      if (args.form == "regularized") return mvt::regularized_smoother(A, args.lambda, part);
      if (args.form == "symmetric")
        return mvt::symmetric_smoother(mvt::combinatorial_laplacian(A), args.lambda, part);
      throw std::runtime_error("unknown smoother form '" + args.form + "'");
    }();
    std::printf("rho_uu = %.5f\n", S.rho_uu);
    std::printf("transductive: yes\n");
    return 0;
  } catch (const std::exception& e) {
    std::printf("transductive: no (%s)\n", e.what());
    if (repairable) {
      try {
        auto repaired =
            mvt::stochastic_smoother(mvt::shortest_path_complete(A, {args.gamma}), part);
        std::printf("shortest-path completion would repair: yes (rho_uu = %.5f)\n",
                    repaired.rho_uu);
      } catch (const std::exception&) {
        std::printf("shortest-path completion would repair: no\n");
      }
    } else {
      std::printf("shortest-path completion would repair: no (%d component(s) carry no label)\n",
                  bad_components);
    }
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view transductive additive models"};
  app.require_subcommand(1);

  CommonArgs fit_args, select_args, lattice_common;
  std::string model_path, candidates_path;

  auto* fit = app.add_subcommand("fit", "Fit a configured model");
  add_common(fit, fit_args);
  fit->add_option("--model", model_path, "Model spec JSON")->required();

  auto* select = app.add_subcommand("select", "Hierarchical model selection by tAIC");
  add_common(select, select_args);
  select->add_option("--candidates", candidates_path, "Candidate terms JSON")->required();

  LatticeArgs lattice_args;
  auto* lattice = app.add_subcommand("lattice", "Run the lattice benchmark");
  lattice->add_option("--rows", lattice_args.rows, "Grid rows");
  lattice->add_option("--cols", lattice_args.cols, "Grid columns");
  lattice->add_option("--pattern", lattice_args.pattern, "checkerboard or mixed");
  lattice->add_option("--block", lattice_args.block, "Block size");
  lattice->add_option("--fracs", lattice_args.fracs, "Labeled fractions")
      ->required()
      ->delimiter(',');
  lattice->add_option("--reps", lattice_args.reps, "Replications per fraction");
  lattice->add_option("--seed", lattice_args.seed, "Random seed");
  lattice->add_option("--neighborhoods", lattice_args.neighborhoods,
                      "Comma list of square,diagonal");
  lattice->add_option("--gamma-grid", lattice_args.gamma_grid, "Kernel width grid")
      ->delimiter(',');
  lattice->add_option("--lambda-grid", lattice_args.lambda_grid, "Penalty grid")->delimiter(',');
  lattice->add_option("--threads", lattice_args.threads, "Worker threads (0 = hardware)");
  lattice->add_option("--out", lattice_args.out_dir, "Output directory")->required();
  lattice->add_option("--max-outer", lattice_common.max_outer, "Outer iteration cap");
  lattice->add_option("--max-inner", lattice_common.max_inner, "Inner iteration cap");

  CheckArgs check_args;
  auto* check = app.add_subcommand("check-smoother", "Diagnose a graph smoother");
  check->add_option("--graph", check_args.graph_path, "Graph edge list")->required();
  check->add_option("--labels", check_args.labels_path, "Labels CSV")->required();
  check->add_option("--form", check_args.form, "stochastic|regularized|symmetric");
  check->add_option("--lambda", check_args.lambda, "Penalty weight");
  check->add_option("--gamma", check_args.gamma, "Kernel width for completion hint");
  check->add_option("--knn", check_args.knn, "Thin to k nearest neighbors first");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(fit_args, model_path);
    if (select->parsed()) return cmd_select(select_args, candidates_path);
    if (lattice->parsed()) return cmd_lattice(lattice_args, lattice_common);
    if (check->parsed()) return cmd_check_smoother(check_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
