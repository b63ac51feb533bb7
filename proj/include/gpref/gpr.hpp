#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>

#include "gpref/kernels.hpp"

namespace gpref::gpr {

using kernels::KernelSpec;

namespace detail {

struct CholeskyOutcome {
  bool factorized = false;
  // Squared ratio of the extreme Cholesky diagonal entries; a cheap
  // condition proxy. Meaningful only when factorized.
  double condition_estimate = std::numeric_limits<double>::quiet_NaN();
  double log_det = std::numeric_limits<double>::quiet_NaN();
};

/// Factors an SPD matrix in place as L L^T (L kept in the lower triangle).
/// A non-positive pivot reports failure and leaves the contents unspecified.
CholeskyOutcome cholesky_in_place(Eigen::MatrixXd& matrix);

/// Condition estimates above this mark a factorization unstable.
double condition_threshold();

}  // namespace detail

/// A factorized GP regression model. `stable` is false when the Cholesky
/// failed or the condition estimate crossed the threshold; nothing is
/// silently repaired. `factor` holds L in its lower triangle and is empty
/// on models restored from disk (mean prediction needs only coefficients;
/// call refactor() before asking for variances again).
struct TrainedModel {
  KernelSpec spec;
  double delta = 0.0;
  Eigen::MatrixXd X;
  Eigen::VectorXd targets;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd factor;
  bool stable = false;
  double condition_estimate = std::numeric_limits<double>::quiet_NaN();
  double log_det = std::numeric_limits<double>::quiet_NaN();

  int dims() const { return static_cast<int>(X.cols()); }
  int size() const { return static_cast<int>(X.rows()); }
  bool has_factor() const { return factor.rows() == X.rows() && factor.rows() > 0; }
};

/// Solves (K + delta I) c = f through a symmetric positive-definite
/// factorization. Singular or ill-conditioned systems come back with
/// stable=false rather than an exception.
TrainedModel train(const KernelSpec& spec, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& f, double delta);

/// Posterior mean K* c at each query row. Throws on unstable models.
Eigen::VectorXd predict_mean(const TrainedModel& model, const Eigen::MatrixXd& X_query);

/// Posterior variance k(x,x) - K* (K + delta I)^{-1} K*^T per query row,
/// clamped below at zero. Roundoff more negative than 1e-8 of the prior
/// variance is reported as an error instead of being clamped.
Eigen::VectorXd predict_variance(const TrainedModel& model, const Eigen::MatrixXd& X_query);

/// Log marginal likelihood of the training targets:
///   -1/2 log|K + delta I| - 1/2 f^T (K + delta I)^{-1} f - M/2 log(2 pi).
/// Unstable models yield -infinity so optimizers steer away.
double log_marginal_likelihood(const TrainedModel& model);

/// Kernel values of a single point against every training center; the mean
/// prediction equals basis_values(model, x).dot(model.coefficients).
Eigen::VectorXd basis_values(const TrainedModel& model,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Rebuilds the Cholesky factor of a model restored from disk.
void refactor(TrainedModel& model);

/// Text format with hex floats; reloading reproduces mean predictions bit
/// for bit on the same platform.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace gpref::gpr
