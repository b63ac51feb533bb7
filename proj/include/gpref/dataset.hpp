#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gpref::sampling {

enum class Provenance { RealFile, SyntheticAnalytic, SyntheticFromReference };

const char* provenance_name(Provenance provenance);
Provenance provenance_from_name(std::string_view name);

enum class Split { Train, TestTrain, Test };

/// Immutable-after-construction sample collection.
///
/// Features are normalized per column by population standard deviation
/// without mean-centering; targets stay in original units. Datasets built
/// in a parent frame (provenance SyntheticFromReference) reuse the parent's
/// scales, so their own column deviations need not be 1.
struct Dataset {
  Eigen::MatrixXd X_raw;
  Eigen::MatrixXd X_norm;
  Eigen::VectorXd y;
  Eigen::VectorXd scales;
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> testtrain;
  std::vector<Eigen::Index> test;
  Provenance provenance = Provenance::RealFile;

  Eigen::Index size() const { return X_raw.rows(); }
  int dims() const { return static_cast<int>(X_raw.cols()); }

  const std::vector<Eigen::Index>& indices(Split which) const;
  Eigen::MatrixXd features(Split which) const;  // rows of X_norm
  Eigen::VectorXd targets(Split which) const;
};

/// Builds a dataset from original-unit features; computes the scales.
Dataset dataset_from_raw(Eigen::MatrixXd X_raw, Eigen::VectorXd y,
                         Provenance provenance);

/// Builds a dataset from already-normalized features in an existing frame.
Dataset dataset_in_frame(Eigen::MatrixXd X_norm, Eigen::VectorXd y,
                         Eigen::VectorXd scales, Provenance provenance);

/// Parses delimited text: one sample per row, D feature columns + 1 target,
/// comma or whitespace separators, '#' comment lines. D is inferred.
Dataset load_dataset(const std::string& path);

void save_dataset(const Dataset& dataset, const std::string& path);

/// Assigns disjoint random train/testtrain/test splits from the seed.
void assign_splits(Dataset& dataset, Eigen::Index n_train,
                   Eigen::Index n_testtrain, Eigen::Index n_test,
                   std::uint64_t seed);

/// Smooth positive surface with dominant additive structure:
/// quadratic-plus-cubic wells per coordinate and weaker bilinear couplings.
struct SyntheticSurface {
  Eigen::VectorXd quad;    // per-dimension quadratic coefficients
  Eigen::VectorXd cubic;   // per-dimension cubic coefficients
  Eigen::VectorXd center;  // per-dimension well centers in (0,1)
  Eigen::MatrixXd pair;    // symmetric zero-diagonal coupling weights
  double gamma = 0.0;      // coupling strength dial

  int dims() const { return static_cast<int>(quad.size()); }
  double value(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;

  /// Fraction of total variance carried by the pair couplings when inputs
  /// are independent U(0,1), computed from closed-form uniform moments.
  double interaction_share() const;
};

/// Draws surface coefficients deterministically from the seed (gamma = 0).
SyntheticSurface make_synthetic_surface(int dims, std::uint64_t seed);

/// Sets gamma so interaction_share() hits the requested fraction.
void dial_interaction_share(SyntheticSurface& surface, double share);

struct SynthOptions {
  double target_lo = 0.0;
  double target_hi = 6629.0;
  double pair_share = 0.10;  // requested interaction variance fraction
};

/// Samples the dialed synthetic surface at N Sobol points in [0,1)^D and
/// rescales targets affinely to [target_lo, target_hi].
Dataset make_synthetic_pes(int dims, std::uint64_t seed, Eigen::Index n,
                           const SynthOptions& options = {});

}  // namespace gpref::sampling
