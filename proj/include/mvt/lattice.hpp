#ifndef MVT_LATTICE_HPP
#define MVT_LATTICE_HPP

#include "mvt/modelsel.hpp"

#include <cstdint>

namespace mvt {

enum class Neighborhood { Square, Diagonal };
enum class ResponsePattern { Checkerboard, Mixed };

// Unit-weight lattice graph on a rows x cols grid. Square connects the four
// axis neighbors, Diagonal the four diagonal neighbors; no wraparound.
GraphView make_lattice(int rows, int cols, Neighborhood nb);

// Binary class per cell. Checkerboard: (floor(r/b) + floor(c/b)) mod 2, b
// dividing min(rows, cols). Mixed: checkerboard on the left half of the
// columns, horizontal stripes of height b on the right half.
std::vector<int> make_response(int rows, int cols, ResponsePattern pattern, int block_size);

// W_ij = exp(-d_sp(i,j)/gamma) with hop-count shortest paths (BFS per node).
// W_ii = 1; pairs in different components get 0.
Eigen::MatrixXd shortest_path_kernel_weights(const GraphView& g, double gamma);

struct Confusion {
  long tp = 0, fn = 0, fp = 0, tn = 0;
  long total() const { return tp + fn + fp + tn; }
};

Confusion confusion_counts(const std::vector<int>& pred, const std::vector<int>& truth);

// Chance-corrected agreement (O - E)/(1 - E); NaN when E = 1 (degenerate
// single-class marginals on both sides).
double kappa(const Confusion& c);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

struct LatticeConfig {
  int rows = 25;
  int cols = 25;
  std::vector<Neighborhood> neighborhoods = {Neighborhood::Square, Neighborhood::Diagonal};
  ResponsePattern pattern = ResponsePattern::Checkerboard;
  int block_size = 5;
  std::vector<double> labeled_fracs = {0.1};
  int reps = 50;
  std::uint64_t seed = 0;
  std::vector<double> gamma_grid;   // empty: 8 log-spaced around the median d_sp
  std::vector<double> lambda_grid;  // empty: default_lambda_grid()
  int threads = 0;                  // 0: hardware concurrency
  FitOptions fit;

  void validate() const;
};

struct RepRecord {
  std::string model;
  double labeled_frac = 0.0;
  int rep = 0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN: not applicable
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double taic = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

struct SummaryRow {
  std::string model;
  double labeled_frac = 0.0;
  int reps_ok = 0;
  int reps_failed = 0;
  double mean_accuracy = std::numeric_limits<double>::quiet_NaN();
  double sd_accuracy = std::numeric_limits<double>::quiet_NaN();
  double mean_kappa = std::numeric_limits<double>::quiet_NaN();
  double mean_taic = std::numeric_limits<double>::quiet_NaN();
};

struct BenchResult {
  std::vector<RepRecord> records;   // fixed (frac, rep, model) order
  std::vector<SummaryRow> summary;  // fixed (model, frac) order
};

// Stream splitting for replications: two splitmix64 rounds folding the
// labeled-fraction index and the replication index into the base seed, so
// replications are independent and reproducible in any execution order.
std::uint64_t replication_seed(std::uint64_t seed, int frac_index, int rep);

// Full protocol: per (fraction, replication), sample the labeled set, pick
// each neighborhood's gamma by tGCV on its single-view model (lambda = 1),
// estimate lambdas per admissible model {S}, {D}, {S,D}, fit by local
// scoring, and score unlabeled accuracy, kappa and tAIC.
BenchResult run_benchmark(const LatticeConfig& config);

void write_records_csv(const BenchResult& result, const std::string& path);
void write_summary_csv(const BenchResult& result, const std::string& path);

}  // namespace mvt

#endif
