#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "gpref/gpr.hpp"

using namespace gpref;

namespace {

Eigen::MatrixXd oracle_X() {
  Eigen::MatrixXd X(5, 2);
  X << 0.1, 1.2, 0.9, 0.3, 1.4, 1.9, 0.4, 0.45, 1.05, 1.5;
  return X;
}

Eigen::VectorXd oracle_f() {
  Eigen::VectorXd f(5);
  f << 1.3, -0.2, 2.7, 0.45, -1.1;
  return f;
}

Eigen::MatrixXd oracle_queries() {
  Eigen::MatrixXd Q(2, 2);
  Q << 0.5, 0.8, 1.2, 1.0;
  return Q;
}

}  // namespace

TEST_CASE("training on a pinned dataset matches a dense-inverse solve") {
  // Reference values from numpy: solve(K + delta I, f) with the explicit
  // inverse for the variance, slogdet for the likelihood.
  const double delta = 1e-4;
  struct Expected {
    bool additive;
    double mean0, mean1, var0, var1, lml;
  };
  const Expected table[] = {
      {false, -0.9839868541078579, -2.2657500319813333, 0.0014406075198536428,
       0.01110041027904174, -363.74638429970145},
      {true, -1.2575913830122611, -1.9139199635893025, 0.0008214424468633297,
       0.009065473291855142, -431.81414995241704},
  };
  for (const auto& e : table) {
    const auto spec =
        e.additive
            ? kernels::KernelSpec::additive(kernels::Family::SquaredExponential, 0.5, 2)
            : kernels::KernelSpec::full(kernels::Family::SquaredExponential, 0.5, 2);
    const auto model = gpr::train(spec, oracle_X(), oracle_f(), delta);
    REQUIRE(model.stable);
    const auto mean = gpr::predict_mean(model, oracle_queries());
    CHECK(mean[0] == doctest::Approx(e.mean0).epsilon(1e-9));
    CHECK(mean[1] == doctest::Approx(e.mean1).epsilon(1e-9));
    const auto var = gpr::predict_variance(model, oracle_queries());
    CHECK(var[0] == doctest::Approx(e.var0).epsilon(1e-9));
    CHECK(var[1] == doctest::Approx(e.var1).epsilon(1e-9));
    CHECK(gpr::log_marginal_likelihood(model) ==
          doctest::Approx(e.lml).epsilon(1e-12));
  }
}

TEST_CASE("zero regularization interpolates the training targets") {
  std::mt19937_64 eng(123);
  std::uniform_real_distribution<double> coord(0.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd X(25, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = coord(eng);
    Eigen::VectorXd f(25);
    for (Eigen::Index i = 0; i < 25; ++i)
      f[i] = std::sin(X(i, 0)) + 0.5 * X(i, 1) * X(i, 2) + 3.0;
    const auto spec = kernels::KernelSpec::full(kernels::Family::Matern32, 0.0, 3);
    const auto model = gpr::train(spec, X, f, 0.0);
    REQUIRE(model.stable);
    const auto mean = gpr::predict_mean(model, X);
    for (Eigen::Index i = 0; i < 25; ++i)
      CHECK(std::abs(mean[i] - f[i]) <= 1e-7 * std::max(1.0, std::abs(f[i])));
  }
}

TEST_CASE("blocked mean prediction equals the basis-function form") {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  Eigen::MatrixXd X(30, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = coord(eng);
  Eigen::VectorXd f = X.col(0).array().sin() + X.col(1).array().square();
  const auto spec = kernels::KernelSpec::full(kernels::Family::SquaredExponential, 0.2, 2);
  const auto model = gpr::train(spec, X, f, 1e-8);
  REQUIRE(model.stable);
  Eigen::MatrixXd Q(50, 2);
  for (Eigen::Index i = 0; i < Q.size(); ++i) Q.data()[i] = coord(eng);
  const auto mean = gpr::predict_mean(model, Q);
  for (Eigen::Index q = 0; q < Q.rows(); ++q) {
    const double via_basis =
        gpr::basis_values(model, Q.row(q)).dot(model.coefficients);
    CHECK(std::abs(mean[q] - via_basis) <=
          1e-10 * std::max(1.0, std::abs(via_basis)));
  }
}

TEST_CASE("posterior variance shrinks at the data and recovers the prior far away") {
  Eigen::MatrixXd X(8, 1);
  X << 0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75;
  Eigen::VectorXd f = X.col(0).array().cos();
  const auto spec = kernels::KernelSpec::full(kernels::Family::SquaredExponential, -0.5, 1);
  const auto model = gpr::train(spec, X, f, 1e-10);
  REQUIRE(model.stable);
  Eigen::MatrixXd at_data(1, 1), far(1, 1);
  at_data << 0.5;
  far << 40.0;
  CHECK(gpr::predict_variance(model, at_data)[0] < 1e-6);
  CHECK(gpr::predict_variance(model, far)[0] ==
        doctest::Approx(kernels::self_covariance(spec)).epsilon(1e-9));
  // variance never negative across a sweep
  Eigen::MatrixXd sweep(101, 1);
  for (int i = 0; i <= 100; ++i) sweep(i, 0) = -1.0 + 0.04 * i;
  const auto var = gpr::predict_variance(model, sweep);
  CHECK(var.minCoeff() >= 0.0);
}

TEST_CASE("duplicate rows without regularization are reported unstable") {
  Eigen::MatrixXd X(4, 2);
  X << 0.3, 0.4, 0.3, 0.4, 1.0, 1.1, 1.5, 0.2;
  Eigen::VectorXd f(4);
  f << 1.0, 1.0, 2.0, 3.0;
  const auto spec = kernels::KernelSpec::full(kernels::Family::SquaredExponential, 0.0, 2);
  const auto model = gpr::train(spec, X, f, 0.0);
  CHECK_FALSE(model.stable);
  CHECK(gpr::log_marginal_likelihood(model) ==
        -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(gpr::predict_mean(model, X), std::runtime_error);
}

TEST_CASE("likelihood recomputes from its definition") {
  // -1/2 log|K| - 1/2 f.c - M/2 log(2 pi), log|K| from the factor diagonal.
  const auto spec = kernels::KernelSpec::full(kernels::Family::Matern52, 0.3, 2);
  const auto model = gpr::train(spec, oracle_X(), oracle_f(), 1e-5);
  REQUIRE(model.stable);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < 5; ++i)
    log_det += 2.0 * std::log(model.factor(i, i));
  const double expected = -0.5 * log_det -
                          0.5 * oracle_f().dot(model.coefficients) -
                          0.5 * 5 * std::log(8.0 * std::atan(1.0));
  CHECK(gpr::log_marginal_likelihood(model) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("saved models reload with identical predictions") {
  const auto spec =
      kernels::KernelSpec::additive(kernels::Family::Matern32, 0.37, 2);
  const auto model = gpr::train(spec, oracle_X(), oracle_f(), 1e-6);
  REQUIRE(model.stable);
  const std::string path =
      (std::filesystem::temp_directory_path() / "gpref_model_roundtrip.dat").string();
  gpr::save_model(model, path);
  auto loaded = gpr::load_model(path);
  std::filesystem::remove(path);

  CHECK(loaded.spec.family == model.spec.family);
  CHECK(loaded.spec.log_length == model.spec.log_length);
  CHECK(loaded.spec.subsets == model.spec.subsets);
  CHECK(loaded.delta == model.delta);
  CHECK(loaded.stable == model.stable);
  CHECK(loaded.X == model.X);
  CHECK(loaded.targets == model.targets);
  CHECK(loaded.coefficients == model.coefficients);
  CHECK_FALSE(loaded.has_factor());

  const auto mean_orig = gpr::predict_mean(model, oracle_queries());
  const auto mean_loaded = gpr::predict_mean(loaded, oracle_queries());
  CHECK(mean_orig == mean_loaded);  // bit for bit

  // variance needs the factor back
  CHECK_THROWS_AS(gpr::predict_variance(loaded, oracle_queries()),
                  std::runtime_error);
  gpr::refactor(loaded);
  REQUIRE(loaded.has_factor());
  const auto var_orig = gpr::predict_variance(model, oracle_queries());
  const auto var_loaded = gpr::predict_variance(loaded, oracle_queries());
  CHECK((var_orig - var_loaded).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("training rejects mismatched shapes") {
  const auto spec = kernels::KernelSpec::full(kernels::Family::SquaredExponential, 0.0, 2);
  Eigen::VectorXd short_f(3);
  short_f << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(gpr::train(spec, oracle_X(), short_f, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(gpr::train(spec, oracle_X(), oracle_f(), -1.0),
                  std::invalid_argument);
}
