#include <doctest.h>

#include <cmath>
#include <random>

#include "gpref/hdmr.hpp"

using namespace gpref;

namespace {

Eigen::MatrixXd random_points(Eigen::Index n, int dims, std::uint64_t seed,
                              double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unit(lo, hi);
  Eigen::MatrixXd X(n, dims);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(eng);
  return X;
}

}  // namespace

TEST_CASE("predictions decompose exactly into per-coordinate components") {
  const int dims = 4;
  const Eigen::MatrixXd X = random_points(80, dims, 31);
  Eigen::VectorXd f(80);
  for (Eigen::Index i = 0; i < 80; ++i)
    f[i] = std::sin(3.0 * X(i, 0)) + X(i, 1) * X(i, 1) +
           std::exp(-X(i, 2)) + 0.2 * X(i, 0) * X(i, 3);
  const auto model = hdmr::fit_additive(X, f, -0.5, 1e-4);
  REQUIRE(model.base.stable);

  const Eigen::MatrixXd Q = random_points(1000, dims, 32);
  const Eigen::VectorXd mean = gpr::predict_mean(model.base, Q);
  Eigen::VectorXd summed = Eigen::VectorXd::Zero(1000);
  for (int i = 0; i < dims; ++i)
    summed += hdmr::component(model, i, Q.col(i));
  for (Eigen::Index q = 0; q < 1000; ++q)
    CHECK(std::abs(summed[q] - mean[q]) <= 1e-10 * std::max(1.0, std::abs(mean[q])));
}

TEST_CASE("an additive target is recovered on fresh points") {
  const int dims = 3;
  const Eigen::MatrixXd X = random_points(300, dims, 41);
  auto target = [](const Eigen::MatrixXd& P) {
    return (2.0 * P.col(0).array().sin() + (P.col(1).array() - 0.4).square() * 3.0 +
            P.col(2).array().cos())
        .matrix()
        .eval();
  };
  const Eigen::VectorXd f = target(X);
  const auto model = hdmr::fit_additive(X, f, -1.0, 1e-9);
  REQUIRE(model.base.stable);

  const Eigen::MatrixXd Q = random_points(500, dims, 42, 0.05, 0.95);
  const Eigen::VectorXd truth = target(Q);
  const Eigen::VectorXd pred = gpr::predict_mean(model.base, Q);
  const double spread =
      std::sqrt((f.array() - f.mean()).square().sum() / f.size());
  const double err = std::sqrt((pred - truth).squaredNorm() / 500.0);
  CHECK(err < 0.01 * spread);
}

TEST_CASE("a coordinate the target ignores gets a flat component") {
  const int dims = 3;
  const Eigen::MatrixXd X = random_points(250, dims, 51);
  // x_1 never enters the target
  const Eigen::VectorXd f =
      (4.0 * X.col(0).array().sin() + 2.0 * X.col(2).array()).matrix();
  const auto model = hdmr::fit_additive(X, f, -1.0, 1e-9);
  REQUIRE(model.base.stable);

  Eigen::VectorXd grid(50);
  for (int g = 0; g < 50; ++g) grid[g] = 0.05 + 0.9 * g / 49.0;
  const Eigen::VectorXd flat = hdmr::component(model, 1, grid);
  const Eigen::VectorXd active = hdmr::component(model, 0, grid);
  const double f_range = f.maxCoeff() - f.minCoeff();
  CHECK(flat.maxCoeff() - flat.minCoeff() < 0.05 * f_range);
  CHECK(active.maxCoeff() - active.minCoeff() > 0.5 * f_range);
}

TEST_CASE("in one dimension the additive and full kernels coincide") {
  const Eigen::MatrixXd X = random_points(40, 1, 61);
  const Eigen::VectorXd f = X.col(0).array().sin().matrix();
  const auto additive = hdmr::fit_additive(X, f, -0.7, 1e-10);
  const auto spec = kernels::KernelSpec::full(kernels::Family::SquaredExponential, -0.7, 1);
  const auto full = gpr::train(spec, X, f, 1e-10);
  REQUIRE(additive.base.stable);
  REQUIRE(full.stable);
  const Eigen::MatrixXd Q = random_points(100, 1, 62);
  CHECK((gpr::predict_mean(additive.base, Q) - gpr::predict_mean(full, Q))
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
}

TEST_CASE("component rejects out-of-range coordinates") {
  const Eigen::MatrixXd X = random_points(20, 2, 71);
  const Eigen::VectorXd f = X.col(0);
  const auto model = hdmr::fit_additive(X, f, 0.0, 1e-6);
  Eigen::VectorXd grid(3);
  grid << 0.1, 0.5, 0.9;
  CHECK_THROWS_AS(hdmr::component(model, -1, grid), std::invalid_argument);
  CHECK_THROWS_AS(hdmr::component(model, 2, grid), std::invalid_argument);
}

TEST_CASE("fit preconditions are enforced") {
  Eigen::MatrixXd X(1, 2);
  X << 0.5, 0.5;
  Eigen::VectorXd f(1);
  f << 1.0;
  CHECK_THROWS_AS(hdmr::fit_additive(X, f, 0.0, 1e-6), std::invalid_argument);
  const Eigen::MatrixXd X2 = random_points(5, 2, 81);
  const Eigen::VectorXd f2 = X2.col(0);
  CHECK_THROWS_AS(hdmr::fit_additive(X2, f2, 0.0, -1e-9), std::invalid_argument);
}

TEST_CASE("synthesized datasets replay bit for bit") {
  const Eigen::MatrixXd X = random_points(60, 3, 91, 0.2, 1.8);
  Eigen::VectorXd f(60);
  for (Eigen::Index i = 0; i < 60; ++i)
    f[i] = 100.0 + 40.0 * std::sin(X(i, 0)) + 25.0 * X(i, 1) - 10.0 * X(i, 2);
  hdmr::ReferenceFunction ref;
  ref.model = hdmr::fit_additive(X, f, 0.0, 1e-7);
  REQUIRE(ref.model.base.stable);
  ref.provenance = {"unit-test", 0.0, 1e-7};
  ref.frame_scales = Eigen::VectorXd::Constant(3, 2.5);

  sampling::SobolStream sampler_a(3);
  const auto ds_a = hdmr::synthesize_dataset(ref, 400, sampler_a);
  sampling::SobolStream sampler_b(3);
  const auto ds_b = hdmr::synthesize_dataset(ref, 400, sampler_b);

  REQUIRE(ds_a.size() == 400);
  REQUIRE(ds_a.dims() == 3);
  CHECK(ds_a.provenance == sampling::Provenance::SyntheticFromReference);
  CHECK(ds_a.X_norm == ds_b.X_norm);
  CHECK(ds_a.y == ds_b.y);
  CHECK(ds_a.scales == ref.frame_scales);

  // samples cover exactly the training bounding box
  for (int j = 0; j < 3; ++j) {
    CHECK(ds_a.X_norm.col(j).minCoeff() >= X.col(j).minCoeff());
    CHECK(ds_a.X_norm.col(j).maxCoeff() <= X.col(j).maxCoeff());
    const double span = X.col(j).maxCoeff() - X.col(j).minCoeff();
    CHECK(ds_a.X_norm.col(j).maxCoeff() - ds_a.X_norm.col(j).minCoeff() >
          0.9 * span);
  }

  // labels are the reference evaluations, nothing resampled
  const Eigen::VectorXd relabeled = hdmr::evaluate_reference(ref, ds_a.X_norm);
  CHECK(ds_a.y == relabeled);

  CHECK_THROWS_AS(hdmr::synthesize_dataset(ref, 0, sampler_a),
                  std::invalid_argument);
  sampling::SobolStream wrong_dims(2);
  CHECK_THROWS_AS(hdmr::synthesize_dataset(ref, 10, wrong_dims),
                  std::invalid_argument);
}
