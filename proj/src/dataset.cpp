#include "gpref/dataset.hpp"

#include "gpref/sobol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gpref::sampling {

namespace {

// Uniform draw on [0,1) from the top 53 bits; fully specified by the
// standard so streams are identical across platforms.
double unit_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Box-Muller, always consuming exactly two engine draws.
double unit_normal(std::mt19937_64& eng) {
  const double u1 = (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = unit_uniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Unbiased draw in [0, n): rejects the first 2^64 mod n engine values.
std::uint64_t bounded(std::mt19937_64& eng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x < threshold);
  return x % n;
}

Eigen::VectorXd column_deviations(const Eigen::MatrixXd& X) {
  const double n = static_cast<double>(X.rows());
  Eigen::VectorXd scales(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    scales[j] = std::sqrt((X.col(j).array() - mean).square().sum() / n);
  }
  return scales;
}

// E[(x - c)^k] for x ~ U(0,1).
double uniform_moment(int k, double c) {
  return (std::pow(1.0 - c, k + 1) - std::pow(-c, k + 1)) / (k + 1);
}

struct ShareTerms {
  double quad_gain = 0.0;    // interaction variance per gamma^2
  double base = 0.0;         // additive variance at gamma = 0
  double linear = 0.0;       // additive cross term per gamma
  double quad_additive = 0.0;  // additive variance per gamma^2
};

// Closed-form ANOVA split of the surface under independent U(0,1) inputs.
// The surface is a sum of univariate wells and bilinear couplings, so the
// only nonzero components are first-order and pairwise.
ShareTerms share_terms(const SyntheticSurface& s) {
  const int d = s.dims();
  Eigen::VectorXd mu1(d), vart(d), var_well(d), cov_well(d);
  Eigen::VectorXd mu(7);
  for (int i = 0; i < d; ++i) {
    for (int k = 1; k <= 6; ++k) mu[k] = uniform_moment(k, s.center[i]);
    const double a = s.quad[i], b = s.cubic[i];
    const double mean_well = a * mu[2] + b * mu[3];
    mu1[i] = mu[1];
    vart[i] = mu[2] - mu[1] * mu[1];
    var_well[i] = a * a * mu[4] + 2.0 * a * b * mu[5] + b * b * mu[6] -
                  mean_well * mean_well;
    cov_well[i] = a * mu[3] + b * mu[4] - mean_well * mu[1];
  }
  ShareTerms t;
  for (int i = 0; i < d; ++i) {
    double beta = 0.0;
    for (int j = 0; j < d; ++j) beta += s.pair(i, j) * mu1[j];
    t.base += var_well[i];
    t.linear += 2.0 * beta * cov_well[i];
    t.quad_additive += beta * beta * vart[i];
    for (int j = i + 1; j < d; ++j)
      t.quad_gain += s.pair(i, j) * s.pair(i, j) * vart[i] * vart[j];
  }
  return t;
}

double share_at(const ShareTerms& t, double gamma) {
  const double v_int = t.quad_gain * gamma * gamma;
  const double v_add =
      t.base + t.linear * gamma + t.quad_additive * gamma * gamma;
  return v_int / (v_add + v_int);
}

std::vector<Eigen::Index> sorted_slice(const std::vector<Eigen::Index>& perm,
                                       Eigen::Index begin, Eigen::Index count) {
  std::vector<Eigen::Index> out(perm.begin() + begin,
                                perm.begin() + begin + count);
  std::sort(out.begin(), out.end());
  return out;
}

double parse_strict(const std::string& token, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw std::runtime_error("dataset line " + std::to_string(line_no) +
                             ": non-numeric token '" + token + "'");
  return v;
}

}  // namespace

const char* provenance_name(Provenance provenance) {
  switch (provenance) {
    case Provenance::RealFile: return "real-file";
    case Provenance::SyntheticAnalytic: return "synthetic-analytic";
    case Provenance::SyntheticFromReference: return "synthetic-from-reference";
  }
  throw std::logic_error("unknown provenance");
}

Provenance provenance_from_name(std::string_view name) {
  if (name == "real-file") return Provenance::RealFile;
  if (name == "synthetic-analytic") return Provenance::SyntheticAnalytic;
  if (name == "synthetic-from-reference") return Provenance::SyntheticFromReference;
  throw std::invalid_argument("unknown provenance name: " + std::string(name));
}

const std::vector<Eigen::Index>& Dataset::indices(Split which) const {
  switch (which) {
    case Split::Train: return train;
    case Split::TestTrain: return testtrain;
    case Split::Test: return test;
  }
  throw std::logic_error("unknown split");
}

Eigen::MatrixXd Dataset::features(Split which) const {
  const auto& idx = indices(which);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X_norm.cols());
  for (size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = X_norm.row(idx[r]);
  return out;
}

Eigen::VectorXd Dataset::targets(Split which) const {
  const auto& idx = indices(which);
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (size_t r = 0; r < idx.size(); ++r)
    out[static_cast<Eigen::Index>(r)] = y[idx[r]];
  return out;
}

Dataset dataset_from_raw(Eigen::MatrixXd X_raw, Eigen::VectorXd y,
                         Provenance provenance) {
  if (X_raw.rows() < 1 || X_raw.cols() < 1)
    throw std::invalid_argument("empty feature matrix");
  if (y.size() != X_raw.rows())
    throw std::invalid_argument("target length does not match sample count");
  if (!X_raw.allFinite() || !y.allFinite())
    throw std::invalid_argument("non-finite dataset values");

  Dataset ds;
  ds.scales = column_deviations(X_raw);
  for (Eigen::Index j = 0; j < ds.scales.size(); ++j)
    if (!(ds.scales[j] > 0.0))
      throw std::invalid_argument("feature column " + std::to_string(j + 1) +
                                  " has zero variance; normalization impossible");
  ds.X_norm = X_raw * ds.scales.cwiseInverse().asDiagonal();
  ds.X_raw = std::move(X_raw);
  ds.y = std::move(y);
  ds.provenance = provenance;
  return ds;
}

Dataset dataset_in_frame(Eigen::MatrixXd X_norm, Eigen::VectorXd y,
                         Eigen::VectorXd scales, Provenance provenance) {
  if (X_norm.rows() < 1 || X_norm.cols() < 1)
    throw std::invalid_argument("empty feature matrix");
  if (y.size() != X_norm.rows())
    throw std::invalid_argument("target length does not match sample count");
  if (scales.size() != X_norm.cols())
    throw std::invalid_argument("scales length does not match dimension");
  if (!(scales.array() > 0.0).all())
    throw std::invalid_argument("non-positive scale");

  Dataset ds;
  ds.X_raw = X_norm * scales.asDiagonal();
  ds.X_norm = std::move(X_norm);
  ds.y = std::move(y);
  ds.scales = std::move(scales);
  ds.provenance = provenance;
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset file: " + path);

  Provenance provenance = Provenance::RealFile;
  Eigen::VectorXd stored_scales;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  Eigen::Index columns = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string::size_type first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream hs(line.substr(first + 1));
      std::string key;
      hs >> key;
      if (key == "provenance") {
        std::string name;
        if (hs >> name) provenance = provenance_from_name(name);
      } else if (key == "scales") {
        std::vector<double> vals;
        std::string tok;
        while (hs >> tok) vals.push_back(parse_strict(tok, line_no));
        stored_scales = Eigen::Map<Eigen::VectorXd>(vals.data(),
                                                    static_cast<Eigen::Index>(vals.size()));
      }
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) values.push_back(parse_strict(tok, line_no));
    if (columns < 0) {
      columns = static_cast<Eigen::Index>(values.size());
      if (columns < 2)
        throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                 ": need at least one feature and a target");
    } else if (static_cast<Eigen::Index>(values.size()) != columns) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) +
                               ": expected " + std::to_string(columns) +
                               " columns, found " + std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::runtime_error("dataset file has no data rows: " + path);

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = columns - 1;
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    y[i] = rows[static_cast<size_t>(i)][static_cast<size_t>(d)];
  }
  if (stored_scales.size() > 0) {
    if (stored_scales.size() != d)
      throw std::runtime_error("scales header length does not match column count");
    Eigen::MatrixXd X_norm = X * stored_scales.cwiseInverse().asDiagonal();
    return dataset_in_frame(std::move(X_norm), std::move(y),
                            std::move(stored_scales), provenance);
  }
  return dataset_from_raw(std::move(X), std::move(y), provenance);
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open dataset file for writing: " + path);
  os << std::setprecision(17);
  os << "# gpref dataset\n";
  os << "# provenance " << provenance_name(dataset.provenance) << "\n";
  os << "# scales";
  for (Eigen::Index j = 0; j < dataset.scales.size(); ++j) os << ' ' << dataset.scales[j];
  os << "\n";
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    for (Eigen::Index j = 0; j < dataset.X_raw.cols(); ++j) os << dataset.X_raw(i, j) << ' ';
    os << dataset.y[i] << '\n';
  }
  if (!os) throw std::runtime_error("failed writing dataset file: " + path);
}

void assign_splits(Dataset& dataset, Eigen::Index n_train,
                   Eigen::Index n_testtrain, Eigen::Index n_test,
                   std::uint64_t seed) {
  if (n_train < 0 || n_testtrain < 0 || n_test < 0)
    throw std::invalid_argument("negative split size");
  if (n_train + n_testtrain + n_test > dataset.size())
    throw std::invalid_argument("split sizes exceed dataset size");

  std::vector<Eigen::Index> perm(static_cast<size_t>(dataset.size()));
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(i);
  std::mt19937_64 eng(seed);
  for (std::uint64_t i = perm.size() - 1; i > 0; --i) {
    const std::uint64_t j = bounded(eng, i + 1);
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  dataset.train = sorted_slice(perm, 0, n_train);
  dataset.testtrain = sorted_slice(perm, n_train, n_testtrain);
  dataset.test = sorted_slice(perm, n_train + n_testtrain, n_test);
}

double SyntheticSurface::value(const Eigen::RowVectorXd& x) const {
  return evaluate(x)[0];
}

Eigen::VectorXd SyntheticSurface::evaluate(const Eigen::MatrixXd& X) const {
  if (X.cols() != dims()) throw std::invalid_argument("surface dimension mismatch");
  const Eigen::ArrayXXd t = (X.rowwise() - center.transpose()).array();
  Eigen::VectorXd out = t.square().matrix() * quad + t.cube().matrix() * cubic;
  if (gamma != 0.0)
    out.noalias() +=
        0.5 * gamma * ((t.matrix() * pair).array() * t).rowwise().sum().matrix();
  return out;
}

double SyntheticSurface::interaction_share() const {
  return share_at(share_terms(*this), gamma);
}

SyntheticSurface make_synthetic_surface(int dims, std::uint64_t seed) {
  if (dims < 2) throw std::invalid_argument("synthetic surface needs dims >= 2");
  SyntheticSurface s;
  s.quad.resize(dims);
  s.cubic.resize(dims);
  s.center.resize(dims);
  s.pair = Eigen::MatrixXd::Zero(dims, dims);

  // Draw order is fixed; changing it would silently change every dataset.
  std::mt19937_64 eng(seed);
  for (int i = 0; i < dims; ++i)
    s.quad[i] = std::pow(10.0, 1.5 * unit_uniform(eng));
  for (int i = 0; i < dims; ++i) {
    const double magnitude = 0.5 + 1.5 * unit_uniform(eng);
    const double sign = unit_uniform(eng) < 0.5 ? -1.0 : 1.0;
    s.cubic[i] = sign * magnitude * s.quad[i];
  }
  for (int i = 0; i < dims; ++i) s.center[i] = 0.25 + 0.5 * unit_uniform(eng);
  for (int i = 0; i < dims; ++i)
    for (int j = i + 1; j < dims; ++j) {
      const double w = unit_normal(eng) * std::sqrt(s.quad[i] * s.quad[j]);
      s.pair(i, j) = w;
      s.pair(j, i) = w;
    }
  return s;
}

void dial_interaction_share(SyntheticSurface& surface, double share) {
  if (!(share >= 0.0 && share < 1.0))
    throw std::invalid_argument("interaction share must lie in [0, 1)");
  if (share == 0.0) {
    surface.gamma = 0.0;
    return;
  }
  const ShareTerms t = share_terms(surface);
  const double qa = t.quad_gain - share * (t.quad_gain + t.quad_additive);
  const double qb = -share * t.linear;
  const double qc = -share * t.base;
  if (!(qa > 0.0))
    throw std::runtime_error("requested interaction share is unreachable");
  const double disc = qb * qb - 4.0 * qa * qc;
  surface.gamma = (-qb + std::sqrt(disc)) / (2.0 * qa);
  const double achieved = share_at(t, surface.gamma);
  if (std::abs(achieved - share) > 1e-10)
    throw std::runtime_error("interaction share dial failed to converge");
}

Dataset make_synthetic_pes(int dims, std::uint64_t seed, Eigen::Index n,
                           const SynthOptions& options) {
  if (dims < 2) throw std::invalid_argument("synthetic dataset needs dims >= 2");
  if (n < 1) throw std::invalid_argument("synthetic dataset needs n >= 1");
  if (!(options.target_hi > options.target_lo))
    throw std::invalid_argument("target range is empty");

  SyntheticSurface surface = make_synthetic_surface(dims, seed);
  dial_interaction_share(surface, options.pair_share);

  SobolStream stream(dims);
  Eigen::MatrixXd X = stream.next_block(n);
  Eigen::VectorXd raw = surface.evaluate(X);
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  Eigen::VectorXd y;
  if (hi > lo) {
    const double gain = (options.target_hi - options.target_lo) / (hi - lo);
    y = ((raw.array() - lo) * gain + options.target_lo).matrix();
  } else {
    y = Eigen::VectorXd::Constant(n, options.target_lo);
  }
  return dataset_from_raw(std::move(X), std::move(y),
                          Provenance::SyntheticAnalytic);
}

}  // namespace gpref::sampling
