#pragma once

#include <Eigen/Dense>

#include <string>

#include "gpref/dataset.hpp"
#include "gpref/gpr.hpp"
#include "gpref/sobol.hpp"

namespace gpref::hdmr {

/// GPR model over the sum-of-singletons kernel. The prediction decomposes
/// exactly into per-coordinate component functions.
struct AdditiveModel {
  gpr::TrainedModel base;

  int dims() const { return base.dims(); }
};

/// Trains the D-singleton additive model at the given hyperparameters.
/// Instability is reported through base.stable, matching train().
AdditiveModel fit_additive(const Eigen::MatrixXd& X, const Eigen::VectorXd& f,
                           double log_length, double delta,
                           kernels::Family family = kernels::Family::SquaredExponential);

/// Component function f_i evaluated on a grid of coordinate-i values
/// (0-based i). Summing the components of a point over all i reproduces
/// predict_mean at that point.
Eigen::VectorXd component(const AdditiveModel& model, int i,
                          const Eigen::VectorXd& grid);

struct ReferenceProvenance {
  std::string training_set;
  double log_length = 0.0;
  double delta = 0.0;
};

/// An additive model promoted to a labeling function over the whole
/// normalized domain. frame_scales carries the parent dataset's feature
/// scales so synthesized datasets stay in the parent frame.
struct ReferenceFunction {
  AdditiveModel model;
  ReferenceProvenance provenance;
  Eigen::VectorXd frame_scales;
};

/// Identical to predict_mean of the underlying additive model.
Eigen::VectorXd evaluate_reference(const ReferenceFunction& ref,
                                   const Eigen::MatrixXd& X_query);

/// Draws n sampler points over the bounding box of the reference's training
/// features (normalized coordinates) and labels them with the reference.
sampling::Dataset synthesize_dataset(const ReferenceFunction& ref,
                                     Eigen::Index n,
                                     sampling::SobolStream& sampler);

}  // namespace gpref::hdmr
