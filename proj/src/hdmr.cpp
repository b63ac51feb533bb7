#include "gpref/hdmr.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace gpref::hdmr {

AdditiveModel fit_additive(const Eigen::MatrixXd& X, const Eigen::VectorXd& f,
                           double log_length, double delta,
                           kernels::Family family) {
  if (X.rows() < 2) throw std::invalid_argument("additive fit needs at least two points");
  if (delta < 0.0) throw std::invalid_argument("negative regularization");
  const auto spec =
      kernels::KernelSpec::additive(family, log_length, static_cast<int>(X.cols()));
  return AdditiveModel{gpr::train(spec, X, f, delta)};
}

Eigen::VectorXd component(const AdditiveModel& model, int i,
                          const Eigen::VectorXd& grid) {
  if (i < 0 || i >= model.dims())
    throw std::invalid_argument("component index " + std::to_string(i) +
                                " outside [0, " + std::to_string(model.dims()) + ")");
  if (!model.base.spec.is_additive())
    throw std::logic_error("component extraction requires a singleton-subset spec");
  kernels::KernelSpec slice = model.base.spec;
  slice.subsets = {{0}};
  const Eigen::MatrixXd cross =
      kernels::build_cross(slice, grid, model.base.X.col(i));
  return cross * model.base.coefficients;
}

Eigen::VectorXd evaluate_reference(const ReferenceFunction& ref,
                                   const Eigen::MatrixXd& X_query) {
  return gpr::predict_mean(ref.model.base, X_query);
}

sampling::Dataset synthesize_dataset(const ReferenceFunction& ref,
                                     Eigen::Index n,
                                     sampling::SobolStream& sampler) {
  if (n < 1) throw std::invalid_argument("synthesize_dataset needs n >= 1");
  if (sampler.dims() != ref.model.dims())
    throw std::invalid_argument("sampler dimension does not match the reference");
  if (ref.frame_scales.size() != ref.model.dims())
    throw std::invalid_argument("reference frame scales missing or mis-sized");

  const Eigen::MatrixXd& X_train = ref.model.base.X;
  const Eigen::RowVectorXd lo = X_train.colwise().minCoeff();
  const Eigen::RowVectorXd span = X_train.colwise().maxCoeff() - lo;

  Eigen::MatrixXd X = sampler.next_block(n);
  X = (X.array().rowwise() * span.array()).rowwise() + lo.array();
  Eigen::VectorXd y = evaluate_reference(ref, X);
  return sampling::dataset_in_frame(std::move(X), std::move(y), ref.frame_scales,
                                    sampling::Provenance::SyntheticFromReference);
}

}  // namespace gpref::hdmr
