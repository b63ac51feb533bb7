#include "gpref/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpref::kernels {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;

// Turns a matrix of squared distances into kernel values in place and
// accumulates them into `out`, scaled by the prefactor.
void accumulate_family(Family family, double prefactor, double length,
                       Eigen::MatrixXd& dist2, Eigen::MatrixXd& out) {
  switch (family) {
    case Family::SquaredExponential: {
      const double inv = -0.5 / (length * length);
      out.array() += prefactor * (dist2.array() * inv).exp();
      break;
    }
    case Family::Matern12: {
      const double inv = -1.0 / length;
      out.array() += prefactor * (dist2.array().sqrt() * inv).exp();
      break;
    }
    case Family::Matern32: {
      dist2 = dist2.array().sqrt().matrix() * (kSqrt3 / length);
      out.array() += prefactor * (1.0 + dist2.array()) * (-dist2.array()).exp();
      break;
    }
    case Family::Matern52: {
      dist2 = dist2.array().sqrt().matrix() * (kSqrt5 / length);
      out.array() += prefactor *
                     (1.0 + dist2.array() + dist2.array().square() / 3.0) *
                     (-dist2.array()).exp();
      break;
    }
  }
}

double radial_value(Family family, double prefactor, double length, double r) {
  switch (family) {
    case Family::SquaredExponential:
      return prefactor * std::exp(-0.5 * r * r / (length * length));
    case Family::Matern12:
      return prefactor * std::exp(-r / length);
    case Family::Matern32: {
      const double z = kSqrt3 * r / length;
      return prefactor * (1.0 + z) * std::exp(-z);
    }
    case Family::Matern52: {
      const double z = kSqrt5 * r / length;
      return prefactor * (1.0 + z + z * z / 3.0) * std::exp(-z);
    }
  }
  throw std::logic_error("unreachable kernel family");
}

// Squared Euclidean distances between rows of A and rows of B over the
// given coordinate subset, clamped at zero to absorb roundoff.
void subset_squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& A,
                              const Eigen::Ref<const Eigen::MatrixXd>& B,
                              const std::vector<int>& subset,
                              Eigen::MatrixXd& dist2) {
  const auto n = A.rows();
  const auto m = B.rows();
  Eigen::MatrixXd As(n, static_cast<Eigen::Index>(subset.size()));
  Eigen::MatrixXd Bs(m, static_cast<Eigen::Index>(subset.size()));
  for (size_t k = 0; k < subset.size(); ++k) {
    As.col(static_cast<Eigen::Index>(k)) = A.col(subset[k]);
    Bs.col(static_cast<Eigen::Index>(k)) = B.col(subset[k]);
  }
  dist2.resize(n, m);
  dist2.noalias() = -2.0 * As * Bs.transpose();
  dist2.colwise() += As.rowwise().squaredNorm();
  dist2.rowwise() += Bs.rowwise().squaredNorm().transpose();
  dist2 = dist2.cwiseMax(0.0);
}

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::SquaredExponential: return "squared_exponential";
    case Family::Matern12: return "matern12";
    case Family::Matern32: return "matern32";
    case Family::Matern52: return "matern52";
  }
  throw std::logic_error("unreachable kernel family");
}

Family family_from_name(const std::string& name) {
  if (name == "squared_exponential" || name == "se") return Family::SquaredExponential;
  if (name == "matern12") return Family::Matern12;
  if (name == "matern32") return Family::Matern32;
  if (name == "matern52") return Family::Matern52;
  throw std::invalid_argument("unknown kernel family: " + name);
}

KernelSpec KernelSpec::full(Family family, double log_length, int dims) {
  if (dims < 1) throw std::invalid_argument("kernel dims must be >= 1");
  KernelSpec spec;
  spec.family = family;
  spec.log_length = log_length;
  std::vector<int> all(static_cast<size_t>(dims));
  for (int i = 0; i < dims; ++i) all[static_cast<size_t>(i)] = i;
  spec.subsets.push_back(std::move(all));
  return spec;
}

KernelSpec KernelSpec::additive(Family family, double log_length, int dims) {
  if (dims < 1) throw std::invalid_argument("kernel dims must be >= 1");
  KernelSpec spec;
  spec.family = family;
  spec.log_length = log_length;
  spec.subsets.reserve(static_cast<size_t>(dims));
  for (int i = 0; i < dims; ++i) spec.subsets.push_back({i});
  return spec;
}

bool KernelSpec::is_additive() const {
  if (subsets.size() < 2) return false;
  for (const auto& s : subsets)
    if (s.size() != 1) return false;
  return true;
}

void KernelSpec::validate(int dims) const {
  if (prefactor < 0.0 || !std::isfinite(prefactor))
    throw std::invalid_argument("kernel prefactor must be finite and >= 0");
  if (!std::isfinite(log_length))
    throw std::invalid_argument("kernel log_length must be finite");
  if (subsets.empty())
    throw std::invalid_argument("kernel spec needs at least one subset");
  for (const auto& s : subsets) {
    if (s.empty()) throw std::invalid_argument("empty kernel subset");
    for (size_t k = 0; k < s.size(); ++k) {
      if (s[k] < 0 || s[k] >= dims)
        throw std::invalid_argument("kernel subset index out of range");
      if (k > 0 && s[k] <= s[k - 1])
        throw std::invalid_argument("kernel subset must be sorted and duplicate-free");
    }
  }
}

double self_covariance(const KernelSpec& spec) {
  return spec.prefactor * static_cast<double>(spec.subsets.size());
}

double eval_kernel(const KernelSpec& spec,
                   const Eigen::Ref<const Eigen::RowVectorXd>& a,
                   const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("point dimension mismatch");
  spec.validate(static_cast<int>(a.size()));
  const double length = std::exp(spec.log_length);
  double total = 0.0;
  for (const auto& s : spec.subsets) {
    double d2 = 0.0;
    for (int idx : s) {
      const double diff = a[idx] - b[idx];
      d2 += diff * diff;
    }
    total += radial_value(spec.family, spec.prefactor, length, std::sqrt(d2));
  }
  return total;
}

void fill_cross(const KernelSpec& spec,
                const Eigen::Ref<const Eigen::MatrixXd>& A,
                const Eigen::Ref<const Eigen::MatrixXd>& B,
                Eigen::MatrixXd& out) {
  if (A.cols() != B.cols()) throw std::invalid_argument("feature dimension mismatch");
  spec.validate(static_cast<int>(A.cols()));
  if (!A.allFinite() || !B.allFinite())
    throw std::invalid_argument("non-finite feature values");
  const double length = std::exp(spec.log_length);
  out.setZero(A.rows(), B.rows());
  Eigen::MatrixXd dist2;
  for (const auto& s : spec.subsets) {
    subset_squared_distances(A, B, s, dist2);
    accumulate_family(spec.family, spec.prefactor, length, dist2, out);
  }
}

Eigen::MatrixXd build_cross(const KernelSpec& spec,
                            const Eigen::Ref<const Eigen::MatrixXd>& X_query,
                            const Eigen::Ref<const Eigen::MatrixXd>& X_train) {
  Eigen::MatrixXd out;
  fill_cross(spec, X_query, X_train, out);
  return out;
}

GramMatrix build_gram(const KernelSpec& spec,
                      const Eigen::Ref<const Eigen::MatrixXd>& X,
                      double delta) {
  if (X.rows() < 1) throw std::invalid_argument("Gram needs at least one point");
  if (delta < 0.0 || !std::isfinite(delta))
    throw std::invalid_argument("delta must be finite and >= 0");
  GramMatrix gram;
  gram.delta = delta;
  fill_cross(spec, X, X, gram.values);
  // Mirror the upper triangle and pin the diagonal so symmetry is exact.
  gram.values.triangularView<Eigen::StrictlyLower>() =
      gram.values.transpose().triangularView<Eigen::StrictlyLower>();
  gram.values.diagonal().setConstant(self_covariance(spec) + delta);
  return gram;
}

}  // namespace gpref::kernels
