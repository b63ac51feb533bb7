#include "gpref/hypertune.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gpref/gpr.hpp"
#include "gpref/sobol.hpp"

namespace gpref::tune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogLengthMin = -5.0, kLogLengthMax = 10.0;
constexpr double kLog10DeltaMin = -8.0, kLog10DeltaMax = 4.0;

std::optional<double> maybe_pearson(const Eigen::VectorXd& pred,
                                    const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() < 2) return std::nullopt;
  const Eigen::ArrayXd a = pred.array() - pred.mean();
  const Eigen::ArrayXd b = truth.array() - truth.mean();
  const double na = std::sqrt(a.square().sum());
  const double nb = std::sqrt(b.square().sum());
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp((a * b).sum() / (na * nb), -1.0, 1.0);
}

kernels::KernelSpec spec_for(kernels::Family family, bool additive,
                             double log_length, int dims) {
  return additive ? kernels::KernelSpec::additive(family, log_length, dims)
                  : kernels::KernelSpec::full(family, log_length, dims);
}

Eigen::VectorXd blocked_predict(const kernels::KernelSpec& spec,
                                const Eigen::MatrixXd& X_query,
                                const Eigen::MatrixXd& X_train,
                                const Eigen::VectorXd& coefficients) {
  constexpr Eigen::Index kBlock = 4096;
  Eigen::VectorXd out(X_query.rows());
  Eigen::MatrixXd buffer;
  for (Eigen::Index start = 0; start < X_query.rows(); start += kBlock) {
    const Eigen::Index n = std::min<Eigen::Index>(kBlock, X_query.rows() - start);
    kernels::fill_cross(spec, X_query.middleRows(start, n), X_train, buffer);
    out.segment(start, n).noalias() = buffer * coefficients;
  }
  return out;
}

void append_value(std::ostream& os, const std::optional<double>& value) {
  if (value)
    os << ' ' << *value;
  else
    os << " -";
}

// (test, l, log10_delta) ordering for the guarded rule: smaller test wins;
// values within 1e-9 relative are ties, broken toward larger l, then
// larger delta.
bool cell_beats(const ScanCell& challenger, const ScanCell* incumbent) {
  if (!incumbent) return true;
  const double t = *challenger.test_rmse;
  const double b = *incumbent->test_rmse;
  const double scale = std::max(std::abs(t), std::abs(b));
  if (std::abs(t - b) <= 1e-9 * scale) {
    if (challenger.log_length != incumbent->log_length)
      return challenger.log_length > incumbent->log_length;
    return challenger.log10_delta > incumbent->log10_delta;
  }
  return t < b;
}

struct SimplexOutcome {
  Eigen::VectorXd point;
  double value = -kInf;
};

// Nelder-Mead ascent. Vertices valued -infinity (out of bounds, unstable
// factorization) lose every comparison and are reflected away.
SimplexOutcome simplex_maximize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, const Eigen::VectorXd& step, int max_evals,
    int& total_evaluations) {
  const int n = static_cast<int>(start.size());
  int used = 0;
  auto eval = [&](const Eigen::VectorXd& p) {
    ++used;
    ++total_evaluations;
    return objective(p);
  };

  std::vector<Eigen::VectorXd> x(static_cast<size_t>(n) + 1, start);
  std::vector<double> v(static_cast<size_t>(n) + 1);
  v[0] = eval(x[0]);
  for (int i = 1; i <= n; ++i) {
    x[i][i - 1] += step[i - 1];
    v[i] = eval(x[i]);
  }

  while (used < max_evals) {
    int ib = 0, iw = 0;
    for (int i = 1; i <= n; ++i) {
      if (v[i] > v[ib]) ib = i;
      if (v[i] < v[iw]) iw = i;
    }
    if (ib == iw) iw = (ib + 1) % (n + 1);
    if (v[ib] == -kInf) break;
    double second_worst = kInf;
    double diameter = 0.0;
    for (int i = 0; i <= n; ++i) {
      if (i != iw) second_worst = std::min(second_worst, v[i]);
      diameter = std::max(diameter, (x[i] - x[ib]).cwiseAbs().maxCoeff());
    }
    if (std::isfinite(v[iw]) &&
        v[ib] - v[iw] <= 1e-10 * (1.0 + std::abs(v[ib])))
      break;
    if (diameter <= 1e-8) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != iw) centroid += x[i];
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + (centroid - x[iw]);
    const double vr = eval(reflected);
    if (vr > v[ib]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - x[iw]);
      const double ve = eval(expanded);
      if (ve > vr) {
        x[iw] = expanded;
        v[iw] = ve;
      } else {
        x[iw] = reflected;
        v[iw] = vr;
      }
      continue;
    }
    if (vr > second_worst) {
      x[iw] = reflected;
      v[iw] = vr;
      continue;
    }
    const bool outside = vr > v[iw];
    const Eigen::VectorXd contracted =
        outside ? centroid + 0.5 * (reflected - centroid)
                : centroid + 0.5 * (x[iw] - centroid);
    const double vc = eval(contracted);
    if ((outside && vc >= vr) || (!outside && vc > v[iw])) {
      x[iw] = contracted;
      v[iw] = vc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == ib) continue;
      x[i] = x[ib] + 0.5 * (x[i] - x[ib]);
      v[i] = eval(x[i]);
    }
  }

  int ib = 0;
  for (int i = 1; i <= n; ++i)
    if (v[i] > v[ib]) ib = i;
  return {x[ib], v[ib]};
}

}  // namespace

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("rmse length mismatch");
  if (pred.size() < 1) throw std::invalid_argument("rmse of empty vectors");
  return std::sqrt((pred - truth).squaredNorm() /
                   static_cast<double>(pred.size()));
}

double pearson_r(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("pearson_r length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("pearson_r needs length >= 2");
  const auto r = maybe_pearson(pred, truth);
  if (!r) throw std::invalid_argument("pearson_r undefined for zero variance");
  return *r;
}

ScanGrid ScanGrid::defaults() {
  ScanGrid grid;
  for (int i = 0; i <= 5; ++i) grid.l_values.push_back(2.5 + 0.5 * i);
  for (int i = 2; i <= 7; ++i) grid.log10_delta_values.push_back(-double(i));
  return grid;
}

void ScanGrid::validate() const {
  auto check = [](const std::vector<double>& values, const char* name) {
    if (values.empty())
      throw std::invalid_argument(std::string("empty grid axis: ") + name);
    for (size_t i = 1; i < values.size(); ++i) {
      const bool ascending = values[1] > values[0];
      if ((ascending && values[i] <= values[i - 1]) ||
          (!ascending && values[i] >= values[i - 1]))
        throw std::invalid_argument(std::string("grid axis not strictly monotone: ") + name);
    }
  };
  check(l_values, "l");
  check(log10_delta_values, "log10_delta");
}

const ScanCell& ScanReport::cell(size_t il, size_t id) const {
  const size_t nd = grid.log10_delta_values.size();
  if (il >= grid.l_values.size() || id >= nd)
    throw std::out_of_range("scan cell index");
  return cells[il * nd + id];
}

ScanReport scan(const sampling::Dataset& dataset, const ScanGrid& grid,
                const ScanOptions& options) {
  grid.validate();
  if (dataset.train.empty()) throw std::invalid_argument("scan needs a train split");
  if (dataset.test.empty()) throw std::invalid_argument("scan needs a test split");

  const Eigen::MatrixXd X_train = dataset.features(sampling::Split::Train);
  const Eigen::VectorXd f_train = dataset.targets(sampling::Split::Train);
  const Eigen::MatrixXd X_tt = dataset.features(sampling::Split::TestTrain);
  const Eigen::VectorXd f_tt = dataset.targets(sampling::Split::TestTrain);
  const Eigen::MatrixXd X_te = dataset.features(sampling::Split::Test);
  const Eigen::VectorXd f_te = dataset.targets(sampling::Split::Test);
  const int dims = dataset.dims();

  const size_t nl = grid.l_values.size();
  const size_t nd = grid.log10_delta_values.size();
  ScanReport report;
  report.grid = grid;
  report.dataset_provenance = dataset.provenance;
  report.cells.resize(nl * nd);

  auto compute_row = [&](size_t il) {
    const double l = grid.l_values[il];
    const auto spec = spec_for(options.family, options.additive, l, dims);
    kernels::GramMatrix base = kernels::build_gram(spec, X_train, 0.0);

    const double m = static_cast<double>(X_train.rows());
    const double extra = static_cast<double>(X_tt.rows() + X_te.rows());
    const bool cache_cross =
        (2.0 * m * m + extra * m) * sizeof(double) <=
        static_cast<double>(options.row_cache_bytes);
    Eigen::MatrixXd C_tt, C_te;
    if (cache_cross) {
      if (X_tt.rows() > 0) C_tt = kernels::build_cross(spec, X_tt, X_train);
      if (X_te.rows() > 0) C_te = kernels::build_cross(spec, X_te, X_train);
    }

    Eigen::MatrixXd scratch;
    for (size_t id = 0; id < nd; ++id) {
      const auto t0 = std::chrono::steady_clock::now();
      ScanCell cell;
      cell.log_length = l;
      cell.log10_delta = grid.log10_delta_values[id];
      const double delta = std::pow(10.0, cell.log10_delta);

      scratch = base.values;
      scratch.diagonal().array() += delta;
      const auto outcome = gpr::detail::cholesky_in_place(scratch);
      cell.stable = outcome.factorized &&
                    outcome.condition_estimate <= gpr::detail::condition_threshold();
      if (cell.stable) {
        Eigen::VectorXd c = scratch.triangularView<Eigen::Lower>().solve(f_train);
        scratch.triangularView<Eigen::Lower>().adjoint().solveInPlace(c);
        const Eigen::VectorXd train_pred = base.values * c;
        cell.train_rmse = rmse(train_pred, f_train);
        cell.pearson_train = maybe_pearson(train_pred, f_train);
        if (X_tt.rows() > 0) {
          const Eigen::VectorXd pred =
              cache_cross ? Eigen::VectorXd(C_tt * c)
                          : blocked_predict(spec, X_tt, X_train, c);
          cell.testtrain_rmse = rmse(pred, f_tt);
        }
        if (X_te.rows() > 0) {
          const Eigen::VectorXd pred =
              cache_cross ? Eigen::VectorXd(C_te * c)
                          : blocked_predict(spec, X_te, X_train, c);
          cell.test_rmse = rmse(pred, f_te);
          cell.pearson_test = maybe_pearson(pred, f_te);
        }
      }
      cell.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      report.cells[il * nd + id] = std::move(cell);
    }
  };

  const int workers =
      std::clamp(options.workers, 1, static_cast<int>(nl));
  if (workers == 1) {
    for (size_t il = 0; il < nl; ++il) compute_row(il);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
      try {
        for (size_t il = next.fetch_add(1); il < nl; il = next.fetch_add(1))
          compute_row(il);
      } catch (...) {
        const std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  return report;
}

std::string format_report(const ScanReport& report, bool include_seconds) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "# provenance " << sampling::provenance_name(report.dataset_provenance)
     << "\n";
  os << "# l log10_delta train_rmse testtrain_rmse test_rmse pearson_train"
        " pearson_test stable";
  if (include_seconds) os << " seconds";
  os << "\n";
  for (const auto& cell : report.cells) {
    os << cell.log_length << ' ' << cell.log10_delta;
    append_value(os, cell.train_rmse);
    append_value(os, cell.testtrain_rmse);
    append_value(os, cell.test_rmse);
    append_value(os, cell.pearson_train);
    append_value(os, cell.pearson_test);
    os << ' ' << (cell.stable ? 1 : 0);
    if (include_seconds) os << ' ' << cell.seconds;
    os << '\n';
  }
  return os.str();
}

void save_report(const ScanReport& report, const std::string& path,
                 bool include_seconds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open report file for writing: " + path);
  os << format_report(report, include_seconds);
  if (!os) throw std::runtime_error("failed writing report file: " + path);
}

const char* selection_rule_name(SelectionRule rule) {
  switch (rule) {
    case SelectionRule::GuardedBestTest: return "guarded-best-test";
    case SelectionRule::Mle: return "mle";
  }
  throw std::logic_error("unknown selection rule");
}

GuardedSelection select_guarded(const ScanReport& report, double ratio_cap) {
  if (!(ratio_cap > 0.0)) throw std::invalid_argument("ratio cap must be positive");
  const ScanCell* best = nullptr;
  const ScanCell* best_unguarded = nullptr;
  bool any_candidate = false;
  for (const auto& cell : report.cells) {
    if (!cell.stable || !cell.test_rmse) continue;
    any_candidate = true;
    if (cell_beats(cell, best_unguarded)) best_unguarded = &cell;
    if (!cell.train_rmse) continue;
    if (*cell.test_rmse <= ratio_cap * *cell.train_rmse && cell_beats(cell, best))
      best = &cell;
  }
  if (!any_candidate)
    throw std::invalid_argument("scan report has no stable cell with a test value");

  GuardedSelection out;
  if (best) {
    SelectionResult sel;
    sel.log_length = best->log_length;
    sel.delta = std::pow(10.0, best->log10_delta);
    sel.train_rmse = *best->train_rmse;
    sel.test_rmse = *best->test_rmse;
    sel.guard_ratio = *best->test_rmse / *best->train_rmse;
    sel.rule = SelectionRule::GuardedBestTest;
    out.selection = sel;
  } else {
    out.best_unguarded = *best_unguarded;
  }
  return out;
}

MleResult optimize_mle(const sampling::Dataset& dataset, const MleOptions& options) {
  if (dataset.train.empty())
    throw std::invalid_argument("optimize_mle needs a train split");
  if (!options.optimize_delta &&
      (options.init_log10_delta < kLog10DeltaMin ||
       options.init_log10_delta > kLog10DeltaMax))
    throw std::invalid_argument("fixed log10(delta) outside [-8, 4]");

  const Eigen::MatrixXd X_train = dataset.features(sampling::Split::Train);
  const Eigen::VectorXd f_train = dataset.targets(sampling::Split::Train);
  const int dims = dataset.dims();
  const int n = options.optimize_delta ? 2 : 1;

  int evaluations = 0;
  auto objective = [&](const Eigen::VectorXd& p) -> double {
    const double l = p[0];
    const double logd = options.optimize_delta ? p[1] : options.init_log10_delta;
    if (l < kLogLengthMin || l > kLogLengthMax || logd < kLog10DeltaMin ||
        logd > kLog10DeltaMax)
      return -kInf;
    const auto model = gpr::train(spec_for(options.family, options.additive, l, dims),
                                  X_train, f_train, std::pow(10.0, logd));
    return gpr::log_marginal_likelihood(model);
  };

  const double margin = 1e-6;
  auto clamped_start = [&](double dl, double dd) {
    Eigen::VectorXd p(n);
    p[0] = std::clamp(options.init_log_length + dl, kLogLengthMin + margin,
                      kLogLengthMax - margin);
    if (n == 2)
      p[1] = std::clamp(options.init_log10_delta + dd, kLog10DeltaMin + margin,
                        kLog10DeltaMax - margin);
    return p;
  };
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(clamped_start(0.0, 0.0));
  starts.push_back(clamped_start(0.6, 0.0));
  starts.push_back(clamped_start(-0.6, 0.0));
  if (n == 2) {
    starts.push_back(clamped_start(0.0, 0.75));
    starts.push_back(clamped_start(0.0, -0.75));
  }

  SimplexOutcome best;
  for (const auto& start : starts) {
    Eigen::VectorXd step(n);
    step[0] = (start[0] + 0.5 > kLogLengthMax) ? -0.5 : 0.5;
    if (n == 2) step[1] = (start[1] + 0.75 > kLog10DeltaMax) ? -0.75 : 0.75;
    const auto outcome = simplex_maximize(objective, start, step,
                                          options.max_evaluations_per_start,
                                          evaluations);
    if (outcome.value > best.value || best.point.size() == 0) best = outcome;
  }

  MleResult result;
  result.objective = best.value;
  result.evaluations = evaluations;
  result.selection.rule = SelectionRule::Mle;
  result.selection.log_length = best.point[0];
  result.selection.delta =
      std::pow(10.0, n == 2 ? best.point[1] : options.init_log10_delta);

  if (options.evaluate_splits) {
    const auto model = gpr::train(
        spec_for(options.family, options.additive, result.selection.log_length,
                 dims),
        X_train, f_train, result.selection.delta);
    if (model.stable) {
      result.selection.train_rmse = rmse(gpr::predict_mean(model, X_train), f_train);
      if (!dataset.test.empty()) {
        result.selection.test_rmse =
            rmse(gpr::predict_mean(model, dataset.features(sampling::Split::Test)),
                 dataset.targets(sampling::Split::Test));
        result.selection.guard_ratio =
            result.selection.test_rmse / result.selection.train_rmse;
      }
    }
  }
  return result;
}

double completeness_error(const kernels::KernelSpec& spec, double delta,
                          const Eigen::MatrixXd& X_train,
                          const ProbeFunction& probe, Eigen::Index n_probe,
                          std::uint64_t stream_offset) {
  if (n_probe < 1) throw std::invalid_argument("completeness probe needs n >= 1");
  if (delta < 0.0) throw std::invalid_argument("negative regularization");
  if (X_train.rows() < 1) throw std::invalid_argument("empty training set");
  const int dims = static_cast<int>(X_train.cols());
  spec.validate(dims);

  const Eigen::VectorXd f_train = probe(X_train);
  if (f_train.size() != X_train.rows())
    throw std::runtime_error("probe returned a wrong-length vector");
  const auto model = gpr::train(spec, X_train, f_train, delta);
  if (!model.stable) return kInf;

  sampling::SobolStream stream(dims);
  stream.jump_to(stream_offset);
  const Eigen::RowVectorXd lo = X_train.colwise().minCoeff();
  const Eigen::RowVectorXd span = X_train.colwise().maxCoeff() - lo;
  Eigen::MatrixXd X_fresh = stream.next_block(n_probe);
  X_fresh = (X_fresh.array().rowwise() * span.array()).rowwise() + lo.array();

  const Eigen::VectorXd probe_values = probe(X_fresh);
  if (probe_values.size() != n_probe)
    throw std::runtime_error("probe returned a wrong-length vector");
  return rmse(gpr::predict_mean(model, X_fresh), probe_values);
}

double completeness_error(const kernels::KernelSpec& spec, double delta,
                          const Eigen::MatrixXd& X_train,
                          const hdmr::ReferenceFunction& probe,
                          Eigen::Index n_probe, std::uint64_t stream_offset) {
  return completeness_error(
      spec, delta, X_train,
      [&probe](const Eigen::MatrixXd& X) { return hdmr::evaluate_reference(probe, X); },
      n_probe, stream_offset);
}

}  // namespace gpref::tune
