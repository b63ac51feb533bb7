#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpref/dataset.hpp"
#include "gpref/gpr.hpp"
#include "gpref/hdmr.hpp"
#include "gpref/hypertune.hpp"

namespace gpref::pipeline {

struct SyntheticSpec {
  int dims = 15;
  std::uint64_t seed = 1;
  Eigen::Index n = 50000;
};

/// Fully resolved experiment configuration; every run serializes it next to
/// its outputs so results are independently reproducible.
struct ExperimentConfig {
  std::string data_path;                  // file source (exclusive with synthetic)
  std::optional<SyntheticSpec> synthetic;

  Eigen::Index n_train = 5000;
  Eigen::Index n_testtrain = 5000;
  Eigen::Index n_test = 40000;

  kernels::Family family = kernels::Family::SquaredExponential;
  tune::ScanGrid scan_grid = tune::ScanGrid::defaults();
  tune::ScanGrid reference_grid = tune::ScanGrid::defaults();

  Eigen::Index n_ref = 40000;  // synthetic reference-labeled test size
  double ratio_cap = 2.0;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 1;
  bool dry_run = false;

  double mle_init_log_length = 3.5;
  double mle_init_log10_delta = -5.0;
  int mle_budget = 150;
  bool mle_fix_delta = false;  // run_mle subcommand only

  Eigen::Index completeness_probes = 4000;

  void validate() const;
  std::string to_json() const;
  std::string dataset_id() const;
};

/// Thrown by the pipeline with the failing stage recorded.
struct StageError : std::runtime_error {
  std::string stage;
  StageError(std::string stage_name, const std::string& message)
      : std::runtime_error("stage=" + stage_name + ": " + message),
        stage(std::move(stage_name)) {}
};

/// One summary row of the final comparison table. Metrics prefixed synth_
/// come from the reference-labeled synthetic scan; real_ metrics come from
/// the held-out real test split. ratio is real_test/real_train.
struct FitSummary {
  std::string label;
  double log_length = std::numeric_limits<double>::quiet_NaN();
  double log10_delta = std::numeric_limits<double>::quiet_NaN();
  double synth_train_rmse = std::numeric_limits<double>::quiet_NaN();
  double synth_test_rmse = std::numeric_limits<double>::quiet_NaN();
  double real_train_rmse = std::numeric_limits<double>::quiet_NaN();
  double real_test_rmse = std::numeric_limits<double>::quiet_NaN();
  double pearson_train = std::numeric_limits<double>::quiet_NaN();
  double pearson_test = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double completeness = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct FinalFit {
  FitSummary summary;
  gpr::TrainedModel model;  // factor dropped; may be unstable
  Eigen::VectorXd pred_train;
  Eigen::VectorXd pred_test;
};

struct PipelineResult {
  sampling::Dataset data;
  tune::ScanReport reference_scan;
  tune::SelectionResult reference_selection;  // guarded on the testtrain split
  double reference_train_rmse = std::numeric_limits<double>::quiet_NaN();
  double reference_testtrain_rmse = std::numeric_limits<double>::quiet_NaN();
  double reference_test_rmse = std::numeric_limits<double>::quiet_NaN();
  hdmr::ReferenceFunction reference;
  sampling::Dataset synthetic;
  tune::ScanReport scan_report;
  tune::SelectionResult guarded;
  tune::MleResult mle_free;
  tune::MleResult mle_fixed;
  std::vector<FinalFit> finals;  // guarded, mle-free, mle-fixed
};

/// Runs stages 1-6 in memory; throws StageError on failure. The progress
/// callback, when set, receives one line per completed stage.
PipelineResult run_pipeline_collect(
    const ExperimentConfig& config,
    const std::function<void(const std::string&)>& progress = {});

/// Full experiment with artifacts: resolved config, STATUS marker, scan
/// tables, selection summary, correlation files, persisted models.
int run_pipeline(const ExperimentConfig& config);

/// Subcommands: thin wrappers over scan/optimize_mle/reference fitting with
/// the same config resolution and artifact conventions.
int run_scan(const ExperimentConfig& config);
int run_mle(const ExperimentConfig& config);
int run_reference(const ExperimentConfig& config);

}  // namespace gpref::pipeline
