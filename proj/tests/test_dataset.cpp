#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gpref/dataset.hpp"
#include "gpref/sobol.hpp"

using namespace gpref::sampling;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

double population_std(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("a handwritten file loads with exact values and unit column spread") {
  const auto path = temp_file("gpref_ds_small.dat");
  {
    std::ofstream os(path);
    os << "# three samples, mixed separators\n"
       << "1.0, 2.0, 10.5\n"
       << "2.0  4.0  11.25\n"
       << "4.0,\t5.0, 12.0\n";
  }
  const auto ds = load_dataset(path.string());
  std::filesystem::remove(path);

  REQUIRE(ds.size() == 3);
  REQUIRE(ds.dims() == 2);
  CHECK(ds.provenance == Provenance::RealFile);
  CHECK(ds.X_raw(0, 0) == 1.0);
  CHECK(ds.X_raw(2, 1) == 5.0);
  CHECK(ds.y[1] == 11.25);

  // scales are the population deviations of the raw columns
  for (int j = 0; j < 2; ++j) {
    CHECK(ds.scales[j] == doctest::Approx(population_std(ds.X_raw.col(j))).epsilon(1e-15));
    CHECK(population_std(ds.X_norm.col(j)) == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      CHECK(ds.X_norm(i, j) ==
            doctest::Approx(ds.X_raw(i, j) / ds.scales[j]).epsilon(1e-15));
  }
  // normalization rescales, never centers
  CHECK(ds.X_norm.col(0).mean() != doctest::Approx(0.0).epsilon(0.1));
}

TEST_CASE("save and load round-trip within 1e-12") {
  std::mt19937_64 eng(99);
  std::uniform_real_distribution<double> unit(0.1, 2.0);
  Eigen::MatrixXd X(20, 3);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(eng);
  for (Eigen::Index i = 0; i < 20; ++i) y[i] = 1000.0 * unit(eng);
  const auto ds = dataset_from_raw(X, y, Provenance::SyntheticAnalytic);

  const auto path = temp_file("gpref_ds_roundtrip.dat");
  save_dataset(ds, path.string());
  const auto back = load_dataset(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dims() == ds.dims());
  CHECK(back.provenance == ds.provenance);
  CHECK((back.X_norm - ds.X_norm).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.y - ds.y).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.scales - ds.scales).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.X_raw - ds.X_raw).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("a zero-variance column is rejected by name") {
  Eigen::MatrixXd X(3, 2);
  X << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0;
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  CHECK_THROWS_WITH_AS(dataset_from_raw(X, y, Provenance::RealFile),
                       doctest::Contains("column 2"), std::invalid_argument);
}

TEST_CASE("frame datasets keep the parent scales") {
  Eigen::MatrixXd X_norm(4, 2);
  X_norm << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, 3.0, 4.0;
  Eigen::VectorXd scales(2);
  scales << 2.0, 4.0;
  const auto ds = dataset_in_frame(X_norm, y, scales, Provenance::SyntheticFromReference);
  CHECK(ds.scales == scales);
  CHECK(ds.X_norm == X_norm);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(ds.X_raw(i, j) == doctest::Approx(X_norm(i, j) * scales[j]).epsilon(1e-15));
}

TEST_CASE("splits are disjoint, sorted, and seed-deterministic") {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd X(100, 2);
  Eigen::VectorXd y(100);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(eng);
  for (Eigen::Index i = 0; i < 100; ++i) y[i] = unit(eng);
  auto ds = dataset_from_raw(X, y, Provenance::RealFile);

  assign_splits(ds, 30, 20, 40, 7);
  REQUIRE(ds.train.size() == 30);
  REQUIRE(ds.testtrain.size() == 20);
  REQUIRE(ds.test.size() == 40);

  std::vector<char> seen(100, 0);
  for (auto split : {Split::Train, Split::TestTrain, Split::Test}) {
    const auto& idx = ds.indices(split);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    for (auto i : idx) {
      REQUIRE(i >= 0);
      REQUIRE(i < 100);
      CHECK_FALSE(seen[static_cast<size_t>(i)]);
      seen[static_cast<size_t>(i)] = 1;
    }
  }

  auto ds_same = ds;
  assign_splits(ds_same, 30, 20, 40, 7);
  CHECK(ds_same.train == ds.train);
  CHECK(ds_same.testtrain == ds.testtrain);
  CHECK(ds_same.test == ds.test);

  auto ds_other = ds;
  assign_splits(ds_other, 30, 20, 40, 8);
  CHECK(ds_other.train != ds.train);

  CHECK_THROWS_AS(assign_splits(ds, 60, 30, 30, 1), std::invalid_argument);
}

TEST_CASE("split accessors gather the right rows") {
  Eigen::MatrixXd X(6, 1);
  X << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd y(6);
  y << 10, 20, 30, 40, 50, 60;
  auto ds = dataset_from_raw(X, y, Provenance::RealFile);
  ds.train = {1, 4};
  ds.test = {0, 5};
  CHECK(ds.targets(Split::Train)[0] == 20.0);
  CHECK(ds.targets(Split::Train)[1] == 50.0);
  CHECK(ds.features(Split::Test)(1, 0) == ds.X_norm(5, 0));
  CHECK(ds.targets(Split::TestTrain).size() == 0);
}

TEST_CASE("surface coefficients are reproducible and the value matches the formula") {
  const auto a = make_synthetic_surface(5, 77);
  const auto b = make_synthetic_surface(5, 77);
  CHECK(a.quad == b.quad);
  CHECK(a.cubic == b.cubic);
  CHECK(a.center == b.center);
  CHECK(a.pair == b.pair);
  CHECK(make_synthetic_surface(5, 78).quad != a.quad);

  CHECK(a.pair.diagonal().isZero());
  CHECK(a.pair == a.pair.transpose());
  CHECK((a.quad.array() >= 1.0).all());   // 10^U(0, 1.5)
  CHECK((a.center.array() > 0.0).all());
  CHECK((a.center.array() < 1.0).all());

  auto s = a;
  s.gamma = 0.25;
  Eigen::RowVectorXd x(5);
  x << 0.3, 0.8, 0.5, 0.1, 0.9;
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double t = x[i] - s.center[i];
    expected += s.quad[i] * t * t + s.cubic[i] * t * t * t;
    for (int j = i + 1; j < 5; ++j)
      expected += s.gamma * s.pair(i, j) * t * (x[j] - s.center[j]);
  }
  CHECK(s.value(x) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(s.evaluate(x)(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("interaction share grows with the coupling dial") {
  auto s = make_synthetic_surface(6, 5);
  double previous = -1.0;
  for (double gamma : {0.0, 0.1, 0.3}) {
    s.gamma = gamma;
    const double share = s.interaction_share();
    CHECK(share > previous);
    previous = share;
  }
  s.gamma = 0.0;
  CHECK(s.interaction_share() == 0.0);
}

TEST_CASE("the dial hits a requested interaction share exactly") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto s = make_synthetic_surface(8, seed);
    dial_interaction_share(s, 0.10);
    CHECK(s.gamma > 0.0);
    CHECK(s.interaction_share() == doctest::Approx(0.10).epsilon(1e-9));
  }
}

TEST_CASE("the closed-form share matches a Monte Carlo estimate") {
  // Independent check of the uniform-moment algebra: estimate the additive
  // (main effect) variance by conditional-mean sampling and compare the
  // remainder against interaction_share().
  auto s = make_synthetic_surface(3, 21);
  dial_interaction_share(s, 0.10);

  std::mt19937_64 eng(4242);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_total = 100000;
  Eigen::MatrixXd X(n_total, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(eng);
  const Eigen::VectorXd y = s.evaluate(X);
  const double mean = y.mean();
  const double var_total = (y.array() - mean).square().sum() / n_total;

  // E[y | x_i] on a stratified grid, averaging over the other coordinates
  double var_main = 0.0;
  const int n_grid = 200, n_inner = 500;
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0, sum2 = 0.0;
    for (int g = 0; g < n_grid; ++g) {
      const double xi = (g + 0.5) / n_grid;
      Eigen::MatrixXd inner(n_inner, 3);
      for (Eigen::Index k = 0; k < inner.size(); ++k) inner.data()[k] = unit(eng);
      inner.col(i).setConstant(xi);
      const double cond_mean = s.evaluate(inner).mean();
      sum += cond_mean;
      sum2 += cond_mean * cond_mean;
    }
    const double m = sum / n_grid;
    var_main += sum2 / n_grid - m * m;
  }
  const double mc_share = 1.0 - var_main / var_total;
  CHECK(mc_share > 0.05);
  CHECK(mc_share < 0.15);
  CHECK(mc_share == doctest::Approx(s.interaction_share()).epsilon(0.35));
}

TEST_CASE("synthetic datasets are reproducible with pinned target range") {
  const auto ds = make_synthetic_pes(4, 11, 500);
  REQUIRE(ds.size() == 500);
  REQUIRE(ds.dims() == 4);
  CHECK(ds.provenance == Provenance::SyntheticAnalytic);
  CHECK(ds.y.minCoeff() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ds.y.maxCoeff() == doctest::Approx(6629.0).epsilon(1e-12));
  for (int j = 0; j < 4; ++j)
    CHECK(population_std(ds.X_norm.col(j)) == doctest::Approx(1.0).epsilon(1e-12));

  const auto again = make_synthetic_pes(4, 11, 500);
  CHECK(again.X_norm == ds.X_norm);
  CHECK(again.y == ds.y);

  const auto other = make_synthetic_pes(4, 12, 500);
  CHECK(other.y != ds.y);

  SynthOptions options;
  options.target_lo = -5.0;
  options.target_hi = 5.0;
  const auto shifted = make_synthetic_pes(4, 11, 500, options);
  CHECK(shifted.y.minCoeff() == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(shifted.y.maxCoeff() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("provenance names round-trip") {
  for (auto p : {Provenance::RealFile, Provenance::SyntheticAnalytic,
                 Provenance::SyntheticFromReference})
    CHECK(provenance_from_name(provenance_name(p)) == p);
  CHECK_THROWS_AS(provenance_from_name("unknown"), std::invalid_argument);
}
