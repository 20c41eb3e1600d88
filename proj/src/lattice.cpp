#include "mvt/lattice.hpp"

#include "mvt/smoother.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

namespace mvt {

namespace {

std::string nb_name(Neighborhood nb) { return nb == Neighborhood::Square ? "S" : "D"; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int> sample_without_replacement(std::mt19937_64& rng, int n, int m) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string format_value(double v) {
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

}  // namespace

GraphView make_lattice(int rows, int cols, Neighborhood nb) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("make_lattice: rows, cols must be >= 2");
  const int n = rows * cols;
  GraphView g;
  g.name = nb_name(nb);
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  auto id = [cols](int r, int c) { return r * cols + c; };
  auto connect = [&](int r1, int c1, int r2, int c2) {
    if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) return;
    g.adjacency(id(r1, c1), id(r2, c2)) = 1.0;
    g.adjacency(id(r2, c2), id(r1, c1)) = 1.0;
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (nb == Neighborhood::Square) {
        connect(r, c, r + 1, c);
        connect(r, c, r, c + 1);
      } else {
        connect(r, c, r + 1, c + 1);
        connect(r, c, r + 1, c - 1);
      }
    }
  return g;
}

std::vector<int> make_response(int rows, int cols, ResponsePattern pattern, int block_size) {
  if (rows < 1 || cols < 1 || block_size < 1)
    throw std::invalid_argument("make_response: bad dimensions");
  if (pattern == ResponsePattern::Checkerboard && std::min(rows, cols) % block_size != 0)
    throw std::invalid_argument("make_response: block size must divide min(rows, cols)");
  std::vector<int> y(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int cls;
      if (pattern == ResponsePattern::Checkerboard || c < cols / 2)
        cls = (r / block_size + c / block_size) % 2;
      else
        cls = (r / block_size) % 2;  // horizontal stripes on the right half
      y[static_cast<size_t>(r) * cols + c] = cls;
    }
  return y;
}

Eigen::MatrixXd shortest_path_kernel_weights(const GraphView& g, double gamma) {
  if (gamma <= 0.0)
    throw std::invalid_argument("shortest_path_kernel_weights: gamma must be positive");
  const Eigen::MatrixXd D = shortest_path_lengths(g.adjacency, /*unit_lengths=*/true);
  const Eigen::Index n = D.rows();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::isfinite(D(i, j))) W(i, j) = std::exp(-D(i, j) / gamma);
  return W;
}

Confusion confusion_counts(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("confusion: length mismatch");
  Confusion c;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 1)
      (pred[i] == 1 ? c.tp : c.fn) += 1;
    else
      (pred[i] == 1 ? c.fp : c.tn) += 1;
  }
  return c;
}

double kappa(const Confusion& c) {
  const double tot = static_cast<double>(c.total());
  if (tot < 1.0) throw std::invalid_argument("kappa: empty confusion matrix");
  const double observed = (c.tp + c.tn) / tot;
  const double expected =
      ((c.tp + c.fp) * (c.tp + c.fn) + (c.tn + c.fn) * (c.tn + c.fp)) / (tot * tot);
  if (std::abs(1.0 - expected) < 1e-15) return std::numeric_limits<double>::quiet_NaN();
  return (observed - expected) / (1.0 - expected);
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("accuracy: need equal nonempty label vectors");
  long agree = 0;
  for (size_t i = 0; i < pred.size(); ++i) agree += pred[i] == truth[i];
  return static_cast<double>(agree) / static_cast<double>(pred.size());
}

std::uint64_t replication_seed(std::uint64_t seed, int frac_index, int rep) {
  std::uint64_t h = splitmix64(seed ^ 0x6c61747469636540ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(frac_index));
  h = splitmix64(h ^ static_cast<std::uint64_t>(rep));
  return h;
}

void LatticeConfig::validate() const {
  if (rows < 2 || cols < 2 || rows * cols < 4)
    throw std::invalid_argument("lattice config: grid must be at least 2x2");
  if (neighborhoods.empty()) throw std::invalid_argument("lattice config: no neighborhoods");
  if (block_size < 1) throw std::invalid_argument("lattice config: block size must be positive");
  if (pattern == ResponsePattern::Checkerboard && std::min(rows, cols) % block_size != 0)
    throw std::invalid_argument("lattice config: block size must divide min(rows, cols)");
  if (labeled_fracs.empty()) throw std::invalid_argument("lattice config: no labeled fractions");
  for (double f : labeled_fracs)
    if (!(f > 0.0 && f <= 1.0))
      throw std::invalid_argument("lattice config: labeled fractions must lie in (0, 1]");
  if (reps < 1) throw std::invalid_argument("lattice config: reps must be positive");
}

namespace {

struct BenchContext {
  const LatticeConfig* config = nullptr;
  int n = 0;
  std::vector<int> truth;
  std::vector<Eigen::MatrixXd> dsp;               // per neighborhood
  std::vector<std::vector<double>> gamma_grids;   // per neighborhood
  std::vector<double> lambda_grid;
  std::vector<std::vector<int>> menu;             // neighborhood index subsets
  std::vector<std::string> model_names;
};

std::vector<RepRecord> run_one(const BenchContext& ctx, int frac_index, int rep) {
  const LatticeConfig& cfg = *ctx.config;
  const double frac = cfg.labeled_fracs[frac_index];
  const int n = ctx.n;
  std::mt19937_64 rng(replication_seed(cfg.seed, frac_index, rep));
  const int m = std::min<int>(n, std::max<int>(1, std::lround(frac * n)));

  std::vector<RepRecord> out(ctx.menu.size());
  for (size_t mi = 0; mi < ctx.menu.size(); ++mi) {
    out[mi].model = ctx.model_names[mi];
    out[mi].labeled_frac = frac;
    out[mi].rep = rep;
  }

  try {
    std::vector<bool> missing(n, true);
    for (int i : sample_without_replacement(rng, n, m)) missing[i] = false;
    const Partition part = Partition::from_missing(missing);
    Eigen::VectorXd y_L(part.m());
    for (int i = 0; i < part.m(); ++i) y_L[i] = ctx.truth[part.labeled[i]];
    std::vector<int> truth_U;
    for (int i : part.unlabeled) truth_U.push_back(ctx.truth[i]);

    // per-view kernel width by tGCV on the single-view model at lambda = 1
    std::vector<TermBlueprint> view_bps(ctx.dsp.size());
    for (size_t v = 0; v < ctx.dsp.size(); ++v) {
      double best = std::numeric_limits<double>::infinity();
      bool found = false;
      for (double gamma : ctx.gamma_grids[v]) {
        try {
          Eigen::MatrixXd W = (-ctx.dsp[v] / gamma).array().exp().matrix();
          TermBlueprint bp = TermBlueprint::from_weights(nb_name(cfg.neighborhoods[v]),
                                                         SmootherForm::Regularized, std::move(W),
                                                         gamma);
          const double val = model_tgcv({bp}, {1.0}, part, y_L, cfg.fit);
          if (val < best) {  // ascending grid: ties keep the smaller gamma
            best = val;
            view_bps[v] = std::move(bp);
            found = true;
          }
        } catch (const std::exception&) {
          // invalid width for this replication; try the next grid point
        }
      }
      if (!found)
        throw std::runtime_error("no valid kernel width for view " +
                                 nb_name(cfg.neighborhoods[v]));
    }

    SmootherCache cache;
    for (size_t mi = 0; mi < ctx.menu.size(); ++mi) {
      RepRecord& rec = out[mi];
      try {
        std::vector<TermBlueprint> bps;
        std::vector<std::vector<double>> grids;
        for (int v : ctx.menu[mi]) {
          bps.push_back(view_bps[v]);
          grids.push_back(ctx.lambda_grid);
        }
        const std::vector<double> lambdas =
            estimate_lambdas(bps, part, y_L, grids, cfg.fit, &cache);

        std::vector<AdditiveTerm> terms;
        std::vector<LabeledOperator> ops;
        for (size_t l = 0; l < bps.size(); ++l) {
          AdditiveTerm t;
          t.name = bps[l].name;
          t.penalty = bps[l].penalty;
          t.lambda = lambdas[l];
          const auto key = std::make_pair(bps[l].name, lambdas[l]);
          auto it = cache.smoother.find(key);
          t.smoother = (it != cache.smoother.end() && it->second.size() > 0)
                           ? it->second
                           : bps[l].raw_smoother(lambdas[l]);
          if (spectral_radius_uu(t.smoother, part) >= 1.0)
            throw std::runtime_error("term '" + t.name + "' is not transductive at lambda " +
                                     std::to_string(lambdas[l]));
          auto oit = cache.op.find(key);
          ops.push_back(oit != cache.op.end() ? oit->second
                                              : labeled_operator(t.smoother, part));
          terms.push_back(std::move(t));
        }
        FitOptions fopt = cfg.fit;
        Eigen::VectorXd y_u0;
        if (part.u() > 0 && fopt.warm_start && fopt.y_u0 == nullptr) {
          y_u0 = warm_start_from_operators(ops, part, y_L, fopt.inner_delta, fopt.max_inner);
          fopt.y_u0 = &y_u0;
        }
        AdditiveFit fit = local_scoring(terms, part, y_L, fopt);

        if (part.u() > 0) {
          const std::vector<int> pred = predict_assignments(fit, part, 0.5);
          rec.accuracy = accuracy(pred, truth_U);
          rec.kappa = kappa(confusion_counts(pred, truth_U));
        }
        std::vector<double> traces;
        for (const auto& tf : fit.term_fits) traces.push_back(tf.trace_M);
        rec.taic = taic_fitted(y_L, pick(fit.yhat, part.labeled), trace_aggregate(traces),
                               part.m(), Link::Logit);
        rec.ok = true;
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  } catch (const std::exception& e) {
    for (auto& rec : out) {
      rec.ok = false;
      rec.error = e.what();
    }
  }
  return out;
}

}  // namespace

BenchResult run_benchmark(const LatticeConfig& config) {
  config.validate();

  BenchContext ctx;
  ctx.config = &config;
  ctx.n = config.rows * config.cols;
  ctx.truth = make_response(config.rows, config.cols, config.pattern, config.block_size);
  for (auto nb : config.neighborhoods) {
    const GraphView g = make_lattice(config.rows, config.cols, nb);
    ctx.dsp.push_back(shortest_path_lengths(g.adjacency, /*unit_lengths=*/true));
    ctx.gamma_grids.push_back(config.gamma_grid.empty() ? default_gamma_grid(ctx.dsp.back())
                                                        : config.gamma_grid);
  }
  ctx.lambda_grid = config.lambda_grid.empty() ? default_lambda_grid() : config.lambda_grid;

  const int v = static_cast<int>(config.neighborhoods.size());
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask < (1u << v); ++mask) masks.push_back(mask);
  std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
    const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
    return pa != pb ? pa < pb : a < b;
  });
  for (unsigned mask : masks) {
    std::vector<int> subset;
    std::string label;
    for (int i = 0; i < v; ++i)
      if (mask & (1u << i)) {
        subset.push_back(i);
        label += (label.empty() ? "" : "+") + nb_name(config.neighborhoods[i]);
      }
    ctx.menu.push_back(std::move(subset));
    ctx.model_names.push_back(std::move(label));
  }

  const int tasks = static_cast<int>(config.labeled_fracs.size()) * config.reps;
  std::vector<std::vector<RepRecord>> per_task(tasks);
  int threads = config.threads > 0 ? config.threads
                                   : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks);
  if (threads <= 1) {
    for (int t = 0; t < tasks; ++t)
      per_task[t] = run_one(ctx, t / config.reps, t % config.reps);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int t = next.fetch_add(1); t < tasks; t = next.fetch_add(1))
        per_task[t] = run_one(ctx, t / config.reps, t % config.reps);
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BenchResult result;
  for (auto& recs : per_task)
    for (auto& r : recs) result.records.push_back(std::move(r));

  // aggregate in fixed (model, fraction) order
  for (size_t mi = 0; mi < ctx.menu.size(); ++mi) {
    for (size_t fi = 0; fi < config.labeled_fracs.size(); ++fi) {
      SummaryRow row;
      row.model = ctx.model_names[mi];
      row.labeled_frac = config.labeled_fracs[fi];
      std::vector<double> accs, kappas, taics;
      for (const auto& r : result.records) {
        if (r.model != row.model || r.labeled_frac != row.labeled_frac) continue;
        if (!r.ok) {
          row.reps_failed += 1;
          continue;
        }
        row.reps_ok += 1;
        if (!std::isnan(r.accuracy)) accs.push_back(r.accuracy);
        if (!std::isnan(r.kappa)) kappas.push_back(r.kappa);
        if (!std::isnan(r.taic)) taics.push_back(r.taic);
      }
      auto mean = [](const std::vector<double>& xs) {
        if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
      };
      row.mean_accuracy = mean(accs);
      row.mean_kappa = mean(kappas);
      row.mean_taic = mean(taics);
      if (accs.size() >= 2) {
        double ss = 0.0;
        for (double x : accs) ss += (x - row.mean_accuracy) * (x - row.mean_accuracy);
        row.sd_accuracy = std::sqrt(ss / static_cast<double>(accs.size() - 1));
      }
      result.summary.push_back(std::move(row));
    }
  }
  return result;
}

void write_records_csv(const BenchResult& result, const std::string& path) {
  std::string out = "model,labeled_frac,rep,accuracy,kappa,taic\n";
  for (const auto& r : result.records) {
    out += r.model + "," + format_value(r.labeled_frac) + "," + std::to_string(r.rep) + "," +
           (r.ok ? format_value(r.accuracy) : "failed") + "," +
           (r.ok ? format_value(r.kappa) : "failed") + "," +
           (r.ok ? format_value(r.taic) : "failed") + "\n";
  }
  atomic_write(path, out);
}

void write_summary_csv(const BenchResult& result, const std::string& path) {
  std::string out =
      "model,labeled_frac,reps_ok,reps_failed,mean_accuracy,sd_accuracy,mean_kappa,mean_taic\n";
  for (const auto& s : result.summary) {
    out += s.model + "," + format_value(s.labeled_frac) + "," + std::to_string(s.reps_ok) + "," +
           std::to_string(s.reps_failed) + "," + format_value(s.mean_accuracy) + "," +
           format_value(s.sd_accuracy) + "," + format_value(s.mean_kappa) + "," +
           format_value(s.mean_taic) + "\n";
  }
  atomic_write(path, out);
}

}  // namespace mvt
