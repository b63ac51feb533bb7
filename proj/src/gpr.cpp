#include "gpref/gpr.hpp"

#include <cfloat>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gpref::gpr {

namespace detail {

double condition_threshold() { return 1.0 / (100.0 * DBL_EPSILON); }

CholeskyOutcome cholesky_in_place(Eigen::MatrixXd& matrix) {
  CholeskyOutcome out;
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(matrix);
  if (llt.info() != Eigen::Success) return out;
  const auto diag = matrix.diagonal();
  const double dmax = diag.maxCoeff();
  const double dmin = diag.minCoeff();
  if (!(dmin > 0.0) || !std::isfinite(dmax)) return out;
  out.factorized = true;
  out.condition_estimate = (dmax / dmin) * (dmax / dmin);
  out.log_det = 2.0 * diag.array().log().sum();
  return out;
}

}  // namespace detail

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void require_stable(const TrainedModel& model, const char* what) {
  if (!model.stable) {
    std::ostringstream msg;
    msg << what << " on an unstable model (condition estimate "
        << model.condition_estimate << ")";
    throw std::runtime_error(msg.str());
  }
}

// Two triangular solves against the stored factor: (L L^T) x = b.
Eigen::VectorXd factor_solve(const TrainedModel& model, const Eigen::VectorXd& b) {
  Eigen::VectorXd x = model.factor.triangularView<Eigen::Lower>().solve(b);
  model.factor.triangularView<Eigen::Lower>().adjoint().solveInPlace(x);
  return x;
}

constexpr int kPredictBlock = 4096;

void write_hex(std::ostream& os, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  os << buf;
}

double read_double(std::istream& is, const char* field) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error(std::string("model file truncated at ") + field);
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw std::runtime_error(std::string("bad numeric field in model file: ") + tok);
  return v;
}

long read_count(std::istream& is, const char* field) {
  long v = 0;
  if (!(is >> v) || v < 0)
    throw std::runtime_error(std::string("bad count in model file at ") + field);
  return v;
}

void expect_tag(std::istream& is, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want)
    throw std::runtime_error("model file: expected '" + want + "', got '" + tok + "'");
}

}  // namespace

TrainedModel train(const KernelSpec& spec, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& f, double delta) {
  if (X.rows() < 1) throw std::invalid_argument("training set is empty");
  if (f.size() != X.rows())
    throw std::invalid_argument("targets do not match the number of training rows");
  if (!f.allFinite()) throw std::invalid_argument("non-finite training targets");
  spec.validate(static_cast<int>(X.cols()));

  TrainedModel model;
  model.spec = spec;
  model.delta = delta;
  model.X = X;
  model.targets = f;

  kernels::GramMatrix gram = kernels::build_gram(spec, X, delta);
  model.factor = std::move(gram.values);
  const auto outcome = detail::cholesky_in_place(model.factor);
  model.condition_estimate = outcome.condition_estimate;
  model.log_det = outcome.log_det;
  model.stable = outcome.factorized &&
                 outcome.condition_estimate <= detail::condition_threshold();
  if (model.stable) {
    model.coefficients = factor_solve(model, f);
    if (!model.coefficients.allFinite()) model.stable = false;
  }
  if (!model.stable) {
    model.coefficients =
        Eigen::VectorXd::Constant(X.rows(), std::numeric_limits<double>::quiet_NaN());
  }
  return model;
}

Eigen::VectorXd predict_mean(const TrainedModel& model, const Eigen::MatrixXd& X_query) {
  require_stable(model, "predict_mean");
  if (X_query.cols() != model.X.cols())
    throw std::invalid_argument("query dimension mismatch");
  Eigen::VectorXd out(X_query.rows());
  Eigen::MatrixXd cross;
  for (Eigen::Index start = 0; start < X_query.rows(); start += kPredictBlock) {
    const Eigen::Index n = std::min<Eigen::Index>(kPredictBlock, X_query.rows() - start);
    kernels::fill_cross(model.spec, X_query.middleRows(start, n), model.X, cross);
    out.segment(start, n).noalias() = cross * model.coefficients;
  }
  return out;
}

Eigen::VectorXd predict_variance(const TrainedModel& model, const Eigen::MatrixXd& X_query) {
  require_stable(model, "predict_variance");
  if (!model.has_factor())
    throw std::runtime_error("predict_variance needs the factor; call refactor() after loading");
  if (X_query.cols() != model.X.cols())
    throw std::invalid_argument("query dimension mismatch");
  const double prior = kernels::self_covariance(model.spec);
  Eigen::VectorXd out(X_query.rows());
  Eigen::MatrixXd cross;
  for (Eigen::Index start = 0; start < X_query.rows(); start += kPredictBlock) {
    const Eigen::Index n = std::min<Eigen::Index>(kPredictBlock, X_query.rows() - start);
    kernels::fill_cross(model.spec, X_query.middleRows(start, n), model.X, cross);
    Eigen::MatrixXd half = cross.transpose();
    model.factor.triangularView<Eigen::Lower>().solveInPlace(half);
    for (Eigen::Index q = 0; q < n; ++q) {
      const double raw = prior - half.col(q).squaredNorm();
      if (raw < -1e-8 * prior) {
        std::ostringstream msg;
        msg << "predicted variance " << raw << " below the roundoff band";
        throw std::runtime_error(msg.str());
      }
      out[start + q] = std::max(0.0, raw);
    }
  }
  return out;
}

double log_marginal_likelihood(const TrainedModel& model) {
  if (!model.stable) return -std::numeric_limits<double>::infinity();
  const double quad = model.targets.dot(model.coefficients);
  const double m = static_cast<double>(model.size());
  return -0.5 * model.log_det - 0.5 * quad - 0.5 * m * kLogTwoPi;
}

Eigen::VectorXd basis_values(const TrainedModel& model,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  Eigen::MatrixXd row = kernels::build_cross(model.spec, x, model.X);
  return row.row(0).transpose();
}

void refactor(TrainedModel& model) {
  kernels::GramMatrix gram = kernels::build_gram(model.spec, model.X, model.delta);
  model.factor = std::move(gram.values);
  const auto outcome = detail::cholesky_in_place(model.factor);
  model.condition_estimate = outcome.condition_estimate;
  model.log_det = outcome.log_det;
  model.stable = outcome.factorized &&
                 outcome.condition_estimate <= detail::condition_threshold();
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open model file for writing: " + path);
  os << "gpref-model 1\n";
  os << "family " << kernels::family_name(model.spec.family) << "\n";
  os << "log_length ";
  write_hex(os, model.spec.log_length);
  os << "\nprefactor ";
  write_hex(os, model.spec.prefactor);
  os << "\ndelta ";
  write_hex(os, model.delta);
  os << "\nstable " << (model.stable ? 1 : 0) << "\n";
  os << "condition_estimate ";
  write_hex(os, model.condition_estimate);
  os << "\nlog_det ";
  write_hex(os, model.log_det);
  os << "\nsubsets " << model.spec.subsets.size() << "\n";
  for (const auto& s : model.spec.subsets) {
    os << s.size();
    for (int idx : s) os << ' ' << idx;
    os << '\n';
  }
  os << "points " << model.size() << ' ' << model.dims() << '\n';
  for (Eigen::Index i = 0; i < model.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.X.cols(); ++j) {
      if (j) os << ' ';
      write_hex(os, model.X(i, j));
    }
    os << '\n';
  }
  os << "targets\n";
  for (Eigen::Index i = 0; i < model.targets.size(); ++i) {
    write_hex(os, model.targets[i]);
    os << '\n';
  }
  os << "coefficients\n";
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) {
    write_hex(os, model.coefficients[i]);
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  expect_tag(is, "gpref-model");
  const long version = read_count(is, "format version");
  if (version != 1)
    throw std::runtime_error("unsupported model format version " + std::to_string(version));

  TrainedModel model;
  std::string tok;
  expect_tag(is, "family");
  if (!(is >> tok)) throw std::runtime_error("model file truncated at family");
  model.spec.family = kernels::family_from_name(tok);
  expect_tag(is, "log_length");
  model.spec.log_length = read_double(is, "log_length");
  expect_tag(is, "prefactor");
  model.spec.prefactor = read_double(is, "prefactor");
  expect_tag(is, "delta");
  model.delta = read_double(is, "delta");
  expect_tag(is, "stable");
  model.stable = read_count(is, "stable") != 0;
  expect_tag(is, "condition_estimate");
  model.condition_estimate = read_double(is, "condition_estimate");
  expect_tag(is, "log_det");
  model.log_det = read_double(is, "log_det");
  expect_tag(is, "subsets");
  const long n_subsets = read_count(is, "subsets");
  model.spec.subsets.resize(static_cast<size_t>(n_subsets));
  for (auto& s : model.spec.subsets) {
    const long sz = read_count(is, "subset size");
    s.resize(static_cast<size_t>(sz));
    for (auto& idx : s) idx = static_cast<int>(read_count(is, "subset index"));
  }
  expect_tag(is, "points");
  const long m = read_count(is, "point count");
  const long d = read_count(is, "dimension");
  model.X.resize(m, d);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < d; ++j) model.X(i, j) = read_double(is, "feature");
  expect_tag(is, "targets");
  model.targets.resize(m);
  for (long i = 0; i < m; ++i) model.targets[i] = read_double(is, "target");
  expect_tag(is, "coefficients");
  model.coefficients.resize(m);
  for (long i = 0; i < m; ++i) model.coefficients[i] = read_double(is, "coefficient");
  model.spec.validate(static_cast<int>(d));
  return model;
}

}  // namespace gpref::gpr
