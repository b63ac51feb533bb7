// Command line driver for the hyperparameter selection experiments.
#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gpref/pipeline.hpp"

namespace {

using gpref::pipeline::ExperimentConfig;
using gpref::pipeline::SyntheticSpec;

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) parts.push_back(item);
  return parts;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw CLI::ValidationError(what, "not a number: '" + text + "'");
  }
}

long long parse_integer(const std::string& text, const std::string& what) {
  try {
    size_t used = 0;
    const long long value = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw CLI::ValidationError(what, "not an integer: '" + text + "'");
  }
}

// "a:b:step" generates the inclusive range; a bare "a" is a single value.
std::vector<double> parse_axis(const std::string& text, const std::string& what) {
  const auto parts = split_on(text, ':');
  if (parts.size() == 1) return {parse_double(parts[0], what)};
  if (parts.size() != 3)
    throw CLI::ValidationError(what, "expected a:b:step, got '" + text + "'");
  const double lo = parse_double(parts[0], what);
  const double hi = parse_double(parts[1], what);
  const double step = parse_double(parts[2], what);
  if (step == 0.0 || (hi - lo) * step < 0.0)
    throw CLI::ValidationError(what, "step does not reach b from a");
  std::vector<double> values;
  const double tol = 1e-9 * std::abs(step);
  for (double v = lo; (step > 0 ? v <= hi + tol : v >= hi - tol);
       v += step)
    values.push_back(v);
  return values;
}

SyntheticSpec parse_synthetic(const std::string& text) {
  SyntheticSpec spec;
  bool saw_dims = false;
  for (const auto& part : split_on(text, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--synthetic", "expected key=value, got '" + part + "'");
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    if (key == "D" || key == "d") {
      spec.dims = static_cast<int>(parse_integer(value, "--synthetic D"));
      saw_dims = true;
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_integer(value, "--synthetic seed"));
    } else if (key == "n") {
      spec.n = static_cast<Eigen::Index>(parse_integer(value, "--synthetic n"));
    } else {
      throw CLI::ValidationError("--synthetic", "unknown key '" + key + "'");
    }
  }
  if (!saw_dims)
    throw CLI::ValidationError("--synthetic", "D=<dims> is required");
  return spec;
}

struct RawOptions {
  std::string data;
  std::string synthetic;
  std::string splits;
  std::string grid_l;
  std::string grid_logdelta;
  std::string family = "se";
  ExperimentConfig config;  // numeric fields bound directly
};

void add_common(CLI::App& cmd, RawOptions& raw) {
  cmd.add_option("--data", raw.data, "dataset file (one sample per row)");
  cmd.add_option("--synthetic", raw.synthetic,
                 "synthetic dataset spec D=..,seed=..,n=..");
  cmd.add_option("--splits", raw.splits, "split sizes M,T1,T2 (train,testtrain,test)");
  cmd.add_option("--grid-l", raw.grid_l, "length scale axis a:b:step");
  cmd.add_option("--grid-logdelta", raw.grid_logdelta,
                 "log10 regularization axis a:b:step");
  cmd.add_option("--nref", raw.config.n_ref,
                 "reference-labeled synthetic test size");
  cmd.add_option("--ratio-cap", raw.config.ratio_cap,
                 "guard: test rmse may exceed train rmse by at most this factor");
  cmd.add_option("--seed", raw.config.seed, "split shuffle seed");
  cmd.add_option("--out", raw.config.out_dir, "output directory");
  cmd.add_option("--workers", raw.config.workers, "scan worker threads");
  cmd.add_option("--family", raw.family, "kernel family: se|matern12|matern32|matern52");
  cmd.add_flag("--dry-run", raw.config.dry_run, "print the resolved plan and exit");
}

ExperimentConfig resolve(const RawOptions& raw) {
  ExperimentConfig config = raw.config;
  config.data_path = raw.data;
  if (!raw.synthetic.empty()) config.synthetic = parse_synthetic(raw.synthetic);
  if (!raw.splits.empty()) {
    const auto parts = split_on(raw.splits, ',');
    if (parts.size() != 3)
      throw CLI::ValidationError("--splits", "expected M,T1,T2");
    config.n_train = static_cast<Eigen::Index>(parse_integer(parts[0], "--splits M"));
    config.n_testtrain = static_cast<Eigen::Index>(parse_integer(parts[1], "--splits T1"));
    config.n_test = static_cast<Eigen::Index>(parse_integer(parts[2], "--splits T2"));
  }
  if (!raw.grid_l.empty())
    config.scan_grid.l_values = parse_axis(raw.grid_l, "--grid-l");
  if (!raw.grid_logdelta.empty())
    config.scan_grid.log10_delta_values =
        parse_axis(raw.grid_logdelta, "--grid-logdelta");
  config.reference_grid = config.scan_grid;
  try {
    config.family = gpref::kernels::family_from_name(raw.family);
  } catch (const std::exception& e) {
    throw CLI::ValidationError("--family", e.what());
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process regression with guarded hyperparameter selection"};
  app.require_subcommand(1);

  RawOptions pipeline_raw, scan_raw, mle_raw, reference_raw;

  auto* pipeline = app.add_subcommand(
      "pipeline", "full experiment: reference model, synthetic scan, mle, final fits");
  add_common(*pipeline, pipeline_raw);

  auto* scan = app.add_subcommand("scan", "grid scan with guarded selection");
  add_common(*scan, scan_raw);

  auto* mle = app.add_subcommand("mle", "marginal likelihood optimization");
  add_common(*mle, mle_raw);
  mle->add_flag("--fix-delta", mle_raw.config.mle_fix_delta,
                "optimize the length scale only");

  auto* reference = app.add_subcommand(
      "reference", "fit the additive reference model on the testtrain split");
  add_common(*reference, reference_raw);

  for (auto* cmd : {pipeline, mle}) {
    RawOptions& raw = (cmd == pipeline) ? pipeline_raw : mle_raw;
    cmd->add_option("--init-l", raw.config.mle_init_log_length,
                    "mle starting length scale");
    cmd->add_option("--init-logdelta", raw.config.mle_init_log10_delta,
                    "mle starting log10 regularization");
    cmd->add_option("--budget", raw.config.mle_budget,
                    "mle evaluations per restart");
  }
  pipeline->add_option("--completeness-probes", pipeline_raw.config.completeness_probes,
                       "points used for the completeness error estimate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pipeline->parsed())
      return gpref::pipeline::run_pipeline(resolve(pipeline_raw));
    if (scan->parsed()) return gpref::pipeline::run_scan(resolve(scan_raw));
    if (mle->parsed()) return gpref::pipeline::run_mle(resolve(mle_raw));
    return gpref::pipeline::run_reference(resolve(reference_raw));
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
