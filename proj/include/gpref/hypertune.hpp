#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpref/dataset.hpp"
#include "gpref/hdmr.hpp"
#include "gpref/kernels.hpp"

namespace gpref::tune {

/// Root mean squared difference. Lengths must match and be >= 1.
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Sample Pearson correlation. Lengths >= 2; throws on zero variance.
double pearson_r(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

struct ScanGrid {
  std::vector<double> l_values;
  std::vector<double> log10_delta_values;

  /// l in {2.5 .. 5.0 step 0.5}, log10(delta) in {-2 .. -7 step -1}.
  static ScanGrid defaults();

  /// Throws unless both lists are non-empty and strictly monotone.
  void validate() const;
};

struct ScanCell {
  double log_length = 0.0;
  double log10_delta = 0.0;
  bool stable = false;
  std::optional<double> train_rmse;
  std::optional<double> testtrain_rmse;
  std::optional<double> test_rmse;
  std::optional<double> pearson_train;
  std::optional<double> pearson_test;
  // Marginal wall time of the cell's own factor-and-evaluate work; the
  // row-shared kernel construction is not attributed to cells.
  double seconds = 0.0;
};

struct ScanReport {
  ScanGrid grid;
  std::vector<ScanCell> cells;  // l-major, log10(delta)-minor
  sampling::Provenance dataset_provenance = sampling::Provenance::RealFile;

  const ScanCell& cell(size_t il, size_t id) const;
};

struct ScanOptions {
  kernels::Family family = kernels::Family::SquaredExponential;
  bool additive = false;  // singleton-subset kernel instead of one full subset
  int workers = 1;
  // Per-worker cap on cached Gram + cross-matrix storage; rows whose
  // matrices exceed it rebuild cross blocks per cell instead.
  std::size_t row_cache_bytes = std::size_t(3200) * 1024 * 1024;
};

/// Trains one model per grid cell on the train split and evaluates every
/// available split. Unstable cells are flagged and carry no metrics.
/// Deterministic for fixed inputs regardless of worker count.
ScanReport scan(const sampling::Dataset& dataset, const ScanGrid& grid,
                const ScanOptions& options = {});

/// One row per cell: l log10_delta train_rmse testtrain_rmse test_rmse
/// pearson_train pearson_test stable seconds; absent values print "-".
std::string format_report(const ScanReport& report, bool include_seconds = true);
void save_report(const ScanReport& report, const std::string& path,
                 bool include_seconds = true);

enum class SelectionRule { GuardedBestTest, Mle };

const char* selection_rule_name(SelectionRule rule);

struct SelectionResult {
  double log_length = 0.0;
  double delta = 0.0;
  double guard_ratio = std::numeric_limits<double>::quiet_NaN();
  SelectionRule rule = SelectionRule::GuardedBestTest;
  double train_rmse = std::numeric_limits<double>::quiet_NaN();
  double test_rmse = std::numeric_limits<double>::quiet_NaN();
};

/// Outcome of the guarded rule. When no stable cell passes the guard the
/// selection is empty and best_unguarded records the otherwise-best cell.
struct GuardedSelection {
  std::optional<SelectionResult> selection;
  std::optional<ScanCell> best_unguarded;

  bool selected() const { return selection.has_value(); }
};

/// Among stable cells with test_rmse <= ratio_cap * train_rmse, picks the
/// minimal test_rmse; ties within 1e-9 relative go to larger l, then larger
/// delta. Requires at least one stable cell with a test value.
GuardedSelection select_guarded(const ScanReport& report, double ratio_cap = 2.0);

struct MleOptions {
  kernels::Family family = kernels::Family::SquaredExponential;
  bool additive = false;
  bool optimize_delta = true;  // otherwise delta stays at the initialization
  double init_log_length = 3.5;
  double init_log10_delta = -5.0;
  int max_evaluations_per_start = 150;
  bool evaluate_splits = true;  // fill rmse fields from the dataset splits
};

struct MleResult {
  SelectionResult selection;  // rule == Mle
  double objective = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Maximizes the log marginal likelihood over l (and log10(delta) when
/// requested) with a derivative-free simplex search restarted from a small
/// lattice around the initialization. Bounds: l in [-5, 10], log10(delta)
/// in [-8, 4]; unstable or out-of-bounds points count as -infinity. The
/// optimum is reported regardless of its generalization quality.
MleResult optimize_mle(const sampling::Dataset& dataset, const MleOptions& options);

using ProbeFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Basis-completeness error: fits the kernel basis centered at X_train to
/// probe values at X_train, then reports rmse of that representation on
/// n_probe fresh quasirandom points over the bounding box of X_train.
/// Unstable fits report +infinity. stream_offset places the probe points
/// deep in the sequence so they never collide with training samples.
double completeness_error(const kernels::KernelSpec& spec, double delta,
                          const Eigen::MatrixXd& X_train,
                          const ProbeFunction& probe, Eigen::Index n_probe,
                          std::uint64_t stream_offset = std::uint64_t(1) << 20);

double completeness_error(const kernels::KernelSpec& spec, double delta,
                          const Eigen::MatrixXd& X_train,
                          const hdmr::ReferenceFunction& probe,
                          Eigen::Index n_probe,
                          std::uint64_t stream_offset = std::uint64_t(1) << 20);

}  // namespace gpref::tune
