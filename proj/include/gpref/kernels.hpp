#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gpref::kernels {

/// Radial covariance families. The Matern members are the half-integer
/// orders with closed forms; SquaredExponential is the smooth limit.
enum class Family { SquaredExponential, Matern12, Matern32, Matern52 };

std::string family_name(Family family);
Family family_from_name(const std::string& name);

/// Covariance specification: a radial family evaluated per variable subset
/// and summed. One subset covering all coordinates is an ordinary
/// full-dimensional kernel; D singleton subsets give the first-order
/// additive kernel. The physical length scale is exp(log_length), so scan
/// grids stay linear in log_length. Subset indices are 0-based.
struct KernelSpec {
  Family family = Family::SquaredExponential;
  double log_length = 0.0;
  double prefactor = 1.0;
  std::vector<std::vector<int>> subsets;

  static KernelSpec full(Family family, double log_length, int dims);
  static KernelSpec additive(Family family, double log_length, int dims);

  bool is_additive() const;

  /// Throws std::invalid_argument unless every subset is non-empty, sorted,
  /// duplicate-free and within [0, dims), and prefactor >= 0.
  void validate(int dims) const;
};

/// Self-covariance k(x, x): prefactor times the number of subsets.
double self_covariance(const KernelSpec& spec);

double eval_kernel(const KernelSpec& spec,
                   const Eigen::Ref<const Eigen::RowVectorXd>& a,
                   const Eigen::Ref<const Eigen::RowVectorXd>& b);

struct GramMatrix {
  Eigen::MatrixXd values;
  double delta = 0.0;
  // Filled by the factorization that consumes the Gram; NaN until then.
  double condition_estimate = std::numeric_limits<double>::quiet_NaN();
};

/// Pairwise kernel values among rows of X with delta added on the diagonal.
/// The upper triangle is computed and mirrored; the diagonal is set exactly
/// to self_covariance(spec) + delta, so the result is symmetric bit for bit.
GramMatrix build_gram(const KernelSpec& spec,
                      const Eigen::Ref<const Eigen::MatrixXd>& X,
                      double delta);

/// Kernel values of each query row against each training row; no delta.
Eigen::MatrixXd build_cross(const KernelSpec& spec,
                            const Eigen::Ref<const Eigen::MatrixXd>& X_query,
                            const Eigen::Ref<const Eigen::MatrixXd>& X_train);

/// Writes build_cross(spec, A, B) into `out` without reallocating when the
/// shape already matches. Used by solvers that loop over hyperparameters.
void fill_cross(const KernelSpec& spec,
                const Eigen::Ref<const Eigen::MatrixXd>& A,
                const Eigen::Ref<const Eigen::MatrixXd>& B,
                Eigen::MatrixXd& out);

}  // namespace gpref::kernels
