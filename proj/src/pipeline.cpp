#include "gpref/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <utility>

namespace gpref::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
  if (!os) throw std::runtime_error("failed writing: " + path.string());
}

void put(std::ostream& os, double value) {
  if (std::isnan(value))
    os << '-';
  else
    os << value;
}

double safe_pearson(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  try {
    return tune::pearson_r(pred, truth);
  } catch (const std::exception&) {
    return kNaN;
  }
}

std::string grid_note(const tune::ScanGrid& grid) {
  std::ostringstream os;
  os << grid.l_values.size() << "x" << grid.log10_delta_values.size()
     << " (l " << grid.l_values.front() << ".." << grid.l_values.back()
     << ", log10delta " << grid.log10_delta_values.front() << ".."
     << grid.log10_delta_values.back() << ")";
  return os.str();
}

void print_plan(const char* command, const ExperimentConfig& config) {
  std::cout << "plan " << command << " (dry run, no computation)\n"
            << "  dataset: " << config.dataset_id() << "\n"
            << "  splits: train=" << config.n_train
            << " testtrain=" << config.n_testtrain << " test=" << config.n_test
            << "\n"
            << "  family: " << kernels::family_name(config.family) << "\n"
            << "  scan grid: " << grid_note(config.scan_grid) << "\n"
            << "  reference grid: " << grid_note(config.reference_grid) << "\n"
            << "  synthetic reference set: train=" << config.n_train
            << " test=" << config.n_ref << "\n"
            << "  ratio cap: " << config.ratio_cap << "\n"
            << "  mle: init_l=" << config.mle_init_log_length
            << " init_log10delta=" << config.mle_init_log10_delta
            << " budget=" << config.mle_budget
            << " fix_delta=" << (config.mle_fix_delta ? "yes" : "no") << "\n"
            << "  completeness probes: " << config.completeness_probes << "\n"
            << "  seed: " << config.seed << "  workers: " << config.workers
            << "\n"
            << "  out: " << config.out_dir << "\n";
}

sampling::Dataset prepare_dataset(const ExperimentConfig& config) {
  sampling::Dataset data;
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    data = sampling::make_synthetic_pes(s.dims, s.seed, s.n);
  } else {
    data = sampling::load_dataset(config.data_path);
  }
  sampling::assign_splits(data, config.n_train, config.n_testtrain,
                          config.n_test, config.seed);
  return data;
}

struct ReferenceOutcome {
  tune::ScanReport scan;
  tune::SelectionResult selection;
  hdmr::ReferenceFunction reference;
  double train_rmse = kNaN;
  double testtrain_rmse = kNaN;
  double test_rmse = kNaN;
};

// Reference selection: scan additive models guarded on the testtrain
// split, refit the winner, and evaluate it everywhere.
ReferenceOutcome build_reference(const sampling::Dataset& data,
                                 const ExperimentConfig& config) {
  if (data.testtrain.empty())
    throw std::runtime_error("reference selection needs a testtrain split");

  sampling::Dataset view = data;
  view.test = data.testtrain;
  view.testtrain.clear();

  tune::ScanOptions options;
  options.family = config.family;
  options.additive = true;
  options.workers = config.workers;

  ReferenceOutcome out;
  out.scan = tune::scan(view, config.reference_grid, options);
  const auto choice = tune::select_guarded(out.scan, config.ratio_cap);
  if (!choice.selected())
    throw std::runtime_error(
        "no additive scan cell passed the guard on the testtrain split");
  out.selection = *choice.selection;
  out.train_rmse = out.selection.train_rmse;
  out.testtrain_rmse = out.selection.test_rmse;

  const Eigen::MatrixXd X_train = data.features(sampling::Split::Train);
  const Eigen::VectorXd f_train = data.targets(sampling::Split::Train);
  auto additive = hdmr::fit_additive(X_train, f_train, out.selection.log_length,
                                     out.selection.delta, config.family);
  if (!additive.base.stable)
    throw std::runtime_error("additive refit unstable at the selected cell");

  out.reference.model = std::move(additive);
  out.reference.provenance = {config.dataset_id() + ":train",
                              out.selection.log_length, out.selection.delta};
  out.reference.frame_scales = data.scales;

  if (!data.test.empty())
    out.test_rmse = tune::rmse(
        gpr::predict_mean(out.reference.model.base,
                          data.features(sampling::Split::Test)),
        data.targets(sampling::Split::Test));
  return out;
}

std::string format_reference_summary(const PipelineResult& result) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "# additive reference model, guarded on the testtrain split\n";
  os << "# l log10_delta train_rmse testtrain_rmse test_rmse\n";
  os << result.reference_selection.log_length << ' '
     << std::log10(result.reference_selection.delta) << ' ';
  put(os, result.reference_train_rmse);
  os << ' ';
  put(os, result.reference_testtrain_rmse);
  os << ' ';
  put(os, result.reference_test_rmse);
  os << '\n';
  return os.str();
}

std::string format_summaries(const std::vector<FinalFit>& finals) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "# label l log10_delta synth_train_rmse synth_test_rmse"
        " real_train_rmse real_test_rmse pearson_train pearson_test ratio"
        " completeness objective\n";
  for (const auto& fit : finals) {
    const auto& s = fit.summary;
    os << s.label;
    for (double v : {s.log_length, s.log10_delta, s.synth_train_rmse,
                     s.synth_test_rmse, s.real_train_rmse, s.real_test_rmse,
                     s.pearson_train, s.pearson_test, s.ratio, s.completeness,
                     s.objective}) {
      os << ' ';
      put(os, v);
    }
    os << '\n';
  }
  return os.str();
}

void write_corr_file(const fs::path& path, const Eigen::VectorXd& truth,
                     const Eigen::VectorXd& pred) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "# truth prediction\n";
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    os << truth[i] << ' ' << pred[i] << '\n';
  os << "# pearson_r = ";
  put(os, safe_pearson(pred, truth));
  os << '\n';
  write_text(path, os.str());
}

std::string model_file_name(const std::string& label) {
  std::string name = label;
  for (char& c : name)
    if (c == '-') c = '_';
  return "model_" + name + ".dat";
}

void write_pipeline_artifacts(const PipelineResult& result,
                              const ExperimentConfig& config) {
  const fs::path out(config.out_dir);
  tune::save_report(result.reference_scan, (out / "reference_scan.dat").string());
  gpr::save_model(result.reference.model.base,
                  (out / "reference_model.dat").string());
  write_text(out / "reference_selection.dat", format_reference_summary(result));
  tune::save_report(result.scan_report, (out / "scan.dat").string());
  write_text(out / "selection_summary.dat", format_summaries(result.finals));

  const Eigen::VectorXd f_train = result.data.targets(sampling::Split::Train);
  const Eigen::VectorXd f_test = result.data.targets(sampling::Split::Test);
  for (const auto& fit : result.finals) {
    if (!fit.model.stable) continue;
    gpr::save_model(fit.model, (out / model_file_name(fit.summary.label)).string());
    write_corr_file(out / ("corr_" + fit.summary.label + "_train.dat"), f_train,
                    fit.pred_train);
    write_corr_file(out / ("corr_" + fit.summary.label + "_test.dat"), f_test,
                    fit.pred_test);
  }
}

int guarded_main(const ExperimentConfig& config, const char* command,
                 const std::function<void(const fs::path&)>& body) {
  config.validate();
  if (config.dry_run) {
    print_plan(command, config);
    return 0;
  }
  const fs::path out(config.out_dir);
  fs::create_directories(out);
  write_text(out / "config.json", config.to_json());
  write_text(out / "STATUS", "incomplete\n");
  try {
    body(out);
    write_text(out / "STATUS", "complete\n");
    return 0;
  } catch (const StageError& e) {
    write_text(out / "STATUS", std::string("failed ") + e.what() + "\n");
    std::cerr << command << " failed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    write_text(out / "STATUS",
               std::string("failed stage=") + command + ": " + e.what() + "\n");
    std::cerr << command << " failed: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  const bool has_file = !data_path.empty();
  if (has_file == synthetic.has_value())
    throw std::invalid_argument(
        "exactly one dataset source required: --data or --synthetic");
  if (synthetic) {
    if (synthetic->dims < 2 || synthetic->dims > 16)
      throw std::invalid_argument("synthetic dims must lie in [2, 16]");
    if (synthetic->n < 1)
      throw std::invalid_argument("synthetic size must be positive");
    if (n_train + n_testtrain + n_test > synthetic->n)
      throw std::invalid_argument("splits exceed the synthetic dataset size");
  }
  if (n_train < 2) throw std::invalid_argument("train split needs at least 2 samples");
  if (n_testtrain < 0) throw std::invalid_argument("negative testtrain size");
  if (n_test < 1) throw std::invalid_argument("test split needs at least 1 sample");
  scan_grid.validate();
  reference_grid.validate();
  if (n_ref < 1) throw std::invalid_argument("n_ref must be positive");
  if (!(ratio_cap > 0.0)) throw std::invalid_argument("ratio cap must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (out_dir.empty()) throw std::invalid_argument("output directory required");
  if (mle_budget < 10) throw std::invalid_argument("mle budget must be >= 10");
  if (mle_init_log_length < -5.0 || mle_init_log_length > 10.0)
    throw std::invalid_argument("mle init l outside [-5, 10]");
  if (mle_init_log10_delta < -8.0 || mle_init_log10_delta > 4.0)
    throw std::invalid_argument("mle init log10(delta) outside [-8, 4]");
  if (completeness_probes < 1)
    throw std::invalid_argument("completeness probes must be >= 1");
}

std::string ExperimentConfig::dataset_id() const {
  if (!data_path.empty()) return data_path;
  std::ostringstream os;
  os << "synthetic:D=" << synthetic->dims << ",seed=" << synthetic->seed
     << ",n=" << synthetic->n;
  return os.str();
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  if (synthetic) {
    j["dataset"] = {{"type", "synthetic"},
                    {"dims", synthetic->dims},
                    {"seed", synthetic->seed},
                    {"n", synthetic->n}};
  } else {
    j["dataset"] = {{"type", "file"}, {"path", data_path}};
  }
  j["splits"] = {{"train", n_train}, {"testtrain", n_testtrain}, {"test", n_test}};
  j["family"] = kernels::family_name(family);
  j["scan_grid"] = {{"l", scan_grid.l_values},
                    {"log10_delta", scan_grid.log10_delta_values}};
  j["reference_grid"] = {{"l", reference_grid.l_values},
                         {"log10_delta", reference_grid.log10_delta_values}};
  j["n_ref"] = n_ref;
  j["ratio_cap"] = ratio_cap;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["workers"] = workers;
  j["mle"] = {{"init_log_length", mle_init_log_length},
              {"init_log10_delta", mle_init_log10_delta},
              {"budget", mle_budget},
              {"fix_delta", mle_fix_delta}};
  j["completeness_probes"] = completeness_probes;
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline_collect(
    const ExperimentConfig& config,
    const std::function<void(const std::string&)>& progress) {
  config.validate();
  auto note = [&](const std::string& line) {
    if (progress) progress(line);
  };
  auto stage = [](const char* name, auto&& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  PipelineResult result;

  stage("load", [&] {
    result.data = prepare_dataset(config);
    if (result.data.testtrain.empty())
      throw std::runtime_error("pipeline needs a non-empty testtrain split");
    std::ostringstream os;
    os << "load: n=" << result.data.size() << " dims=" << result.data.dims()
       << " splits " << result.data.train.size() << "/"
       << result.data.testtrain.size() << "/" << result.data.test.size();
    note(os.str());
  });

  stage("reference", [&] {
    auto outcome = build_reference(result.data, config);
    result.reference_scan = std::move(outcome.scan);
    result.reference_selection = outcome.selection;
    result.reference = std::move(outcome.reference);
    result.reference_train_rmse = outcome.train_rmse;
    result.reference_testtrain_rmse = outcome.testtrain_rmse;
    result.reference_test_rmse = outcome.test_rmse;
    std::ostringstream os;
    os << "reference: l=" << result.reference_selection.log_length
       << " log10delta=" << std::log10(result.reference_selection.delta)
       << " rmse train/testtrain/test " << outcome.train_rmse << "/"
       << outcome.testtrain_rmse << "/" << outcome.test_rmse;
    note(os.str());
  });

  stage("synthesize", [&] {
    sampling::SobolStream sampler(result.data.dims());
    result.synthetic = hdmr::synthesize_dataset(
        result.reference, config.n_train + config.n_ref, sampler);
    result.synthetic.train.reserve(static_cast<size_t>(config.n_train));
    for (Eigen::Index i = 0; i < config.n_train; ++i)
      result.synthetic.train.push_back(i);
    result.synthetic.test.reserve(static_cast<size_t>(config.n_ref));
    for (Eigen::Index i = 0; i < config.n_ref; ++i)
      result.synthetic.test.push_back(config.n_train + i);
    std::ostringstream os;
    os << "synthesize: " << result.synthetic.size()
       << " reference-labeled points (train " << config.n_train << ", test "
       << config.n_ref << ")";
    note(os.str());
  });

  stage("scan", [&] {
    tune::ScanOptions options;
    options.family = config.family;
    options.workers = config.workers;
    result.scan_report = tune::scan(result.synthetic, config.scan_grid, options);
    const auto choice = tune::select_guarded(result.scan_report, config.ratio_cap);
    if (!choice.selected()) {
      const auto& b = *choice.best_unguarded;
      std::ostringstream os;
      os << "no scan cell passed the guard; best unguarded cell l="
         << b.log_length << " log10delta=" << b.log10_delta << " train=";
      put(os, b.train_rmse ? *b.train_rmse : kNaN);
      os << " test=";
      put(os, b.test_rmse ? *b.test_rmse : kNaN);
      throw std::runtime_error(os.str());
    }
    result.guarded = *choice.selection;
    std::ostringstream os;
    os << "scan: guarded l=" << result.guarded.log_length << " log10delta="
       << std::log10(result.guarded.delta) << " synthetic train/test "
       << result.guarded.train_rmse << "/" << result.guarded.test_rmse;
    note(os.str());
  });

  stage("mle", [&] {
    tune::MleOptions options;
    options.family = config.family;
    options.init_log_length = config.mle_init_log_length;
    options.init_log10_delta = config.mle_init_log10_delta;
    options.max_evaluations_per_start = config.mle_budget;
    options.evaluate_splits = false;
    options.optimize_delta = true;
    result.mle_free = tune::optimize_mle(result.data, options);
    options.optimize_delta = false;
    result.mle_fixed = tune::optimize_mle(result.data, options);
    std::ostringstream os;
    os << "mle: free l=" << result.mle_free.selection.log_length
       << " log10delta=" << std::log10(result.mle_free.selection.delta)
       << " objective=" << result.mle_free.objective << " evals="
       << result.mle_free.evaluations << "; fixed l="
       << result.mle_fixed.selection.log_length << " objective="
       << result.mle_fixed.objective << " evals=" << result.mle_fixed.evaluations;
    note(os.str());
  });

  stage("final", [&] {
    const Eigen::MatrixXd X_train = result.data.features(sampling::Split::Train);
    const Eigen::VectorXd f_train = result.data.targets(sampling::Split::Train);
    const Eigen::MatrixXd X_test = result.data.features(sampling::Split::Test);
    const Eigen::VectorXd f_test = result.data.targets(sampling::Split::Test);

    auto make_final = [&](const std::string& label, double log_length,
                          double delta, double synth_train, double synth_test,
                          double objective, bool required) {
      FinalFit fit;
      fit.summary.label = label;
      fit.summary.log_length = log_length;
      fit.summary.log10_delta = std::log10(delta);
      fit.summary.synth_train_rmse = synth_train;
      fit.summary.synth_test_rmse = synth_test;
      fit.summary.objective = objective;
      const auto spec =
          kernels::KernelSpec::full(config.family, log_length, result.data.dims());
      fit.model = gpr::train(spec, X_train, f_train, delta);
      if (fit.model.stable) {
        fit.model.factor.resize(0, 0);  // mean-only use downstream
        fit.pred_train = gpr::predict_mean(fit.model, X_train);
        fit.pred_test = gpr::predict_mean(fit.model, X_test);
        fit.summary.real_train_rmse = tune::rmse(fit.pred_train, f_train);
        fit.summary.real_test_rmse = tune::rmse(fit.pred_test, f_test);
        fit.summary.ratio =
            fit.summary.real_test_rmse / fit.summary.real_train_rmse;
        fit.summary.pearson_train = safe_pearson(fit.pred_train, f_train);
        fit.summary.pearson_test = safe_pearson(fit.pred_test, f_test);
      } else if (required) {
        std::ostringstream os;
        os << label << " final fit unstable at l=" << log_length
           << " delta=" << delta;
        throw std::runtime_error(os.str());
      }
      fit.summary.completeness = tune::completeness_error(
          spec, delta, X_train, result.reference, config.completeness_probes);
      return fit;
    };

    result.finals.push_back(make_final(
        "guarded", result.guarded.log_length, result.guarded.delta,
        result.guarded.train_rmse, result.guarded.test_rmse, kNaN, true));
    result.finals.push_back(make_final(
        "mle-free", result.mle_free.selection.log_length,
        result.mle_free.selection.delta, kNaN, kNaN, result.mle_free.objective,
        false));
    result.finals.push_back(make_final(
        "mle-fixed", result.mle_fixed.selection.log_length,
        result.mle_fixed.selection.delta, kNaN, kNaN,
        result.mle_fixed.objective, false));

    std::ostringstream os;
    os << "final:";
    for (const auto& fit : result.finals) {
      os << ' ' << fit.summary.label << " real train/test ";
      put(os, fit.summary.real_train_rmse);
      os << '/';
      put(os, fit.summary.real_test_rmse);
      os << ';';
    }
    note(os.str());
  });

  return result;
}

int run_pipeline(const ExperimentConfig& config) {
  return guarded_main(config, "pipeline", [&](const fs::path&) {
    auto result = run_pipeline_collect(
        config, [](const std::string& line) { std::cout << line << "\n"; });
    try {
      write_pipeline_artifacts(result, config);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("artifacts", e.what());
    }
    std::cout << format_summaries(result.finals);
  });
}

int run_scan(const ExperimentConfig& config) {
  return guarded_main(config, "scan", [&](const fs::path& out) {
    const auto data = prepare_dataset(config);
    tune::ScanOptions options;
    options.family = config.family;
    options.workers = config.workers;
    const auto report = tune::scan(data, config.scan_grid, options);
    tune::save_report(report, (out / "scan.dat").string());

    const auto choice = tune::select_guarded(report, config.ratio_cap);
    std::ostringstream os;
    os << std::setprecision(10);
    if (choice.selected()) {
      const auto& s = *choice.selection;
      os << "# rule l log10_delta train_rmse test_rmse guard_ratio\n";
      os << tune::selection_rule_name(s.rule) << ' ' << s.log_length << ' '
         << std::log10(s.delta) << ' ' << s.train_rmse << ' ' << s.test_rmse
         << ' ' << s.guard_ratio << '\n';
    } else {
      const auto& b = *choice.best_unguarded;
      os << "# no cell passed the guard (ratio cap " << config.ratio_cap
         << "); best unguarded cell below\n";
      os << "# l log10_delta train_rmse test_rmse\n";
      os << b.log_length << ' ' << b.log10_delta << ' ';
      put(os, b.train_rmse ? *b.train_rmse : kNaN);
      os << ' ';
      put(os, b.test_rmse ? *b.test_rmse : kNaN);
      os << '\n';
    }
    write_text(out / "selection.dat", os.str());
    std::cout << os.str();
  });
}

int run_mle(const ExperimentConfig& config) {
  return guarded_main(config, "mle", [&](const fs::path& out) {
    const auto data = prepare_dataset(config);
    tune::MleOptions options;
    options.family = config.family;
    options.optimize_delta = !config.mle_fix_delta;
    options.init_log_length = config.mle_init_log_length;
    options.init_log10_delta = config.mle_init_log10_delta;
    options.max_evaluations_per_start = config.mle_budget;
    const auto result = tune::optimize_mle(data, options);

    std::ostringstream os;
    os << std::setprecision(10);
    os << "# l log10_delta objective evaluations train_rmse test_rmse ratio\n";
    os << result.selection.log_length << ' ' << std::log10(result.selection.delta)
       << ' ' << result.objective << ' ' << result.evaluations << ' ';
    put(os, result.selection.train_rmse);
    os << ' ';
    put(os, result.selection.test_rmse);
    os << ' ';
    put(os, result.selection.guard_ratio);
    os << '\n';
    write_text(out / "mle.dat", os.str());
    std::cout << os.str();
  });
}

int run_reference(const ExperimentConfig& config) {
  return guarded_main(config, "reference", [&](const fs::path& out) {
    const auto data = prepare_dataset(config);
    auto outcome = build_reference(data, config);
    tune::save_report(outcome.scan, (out / "reference_scan.dat").string());
    gpr::save_model(outcome.reference.model.base,
                    (out / "reference_model.dat").string());

    PipelineResult shim;
    shim.reference_selection = outcome.selection;
    shim.reference_train_rmse = outcome.train_rmse;
    shim.reference_testtrain_rmse = outcome.testtrain_rmse;
    shim.reference_test_rmse = outcome.test_rmse;
    const std::string summary = format_reference_summary(shim);
    write_text(out / "reference_selection.dat", summary);
    std::cout << summary;
  });
}

}  // namespace gpref::pipeline
