// Direction numbers for dimensions 2..16 are the first rows of the
// Joe & Kuo "new-joe-kuo-6" table (D=6 search criterion, 21201 dims);
// dimension 1 uses the van der Corput sequence (all m_j = 1).
#include "gpref/sobol.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace gpref::sampling {

namespace {

constexpr int kBits = 32;

struct PolyRow {
  int degree;
  std::uint32_t coeffs;               // middle bits a_1..a_{s-1}
  std::uint32_t m_init[6];            // first s odd initial values
};

// Rows for dimensions 2..16 of new-joe-kuo-6.
constexpr PolyRow kTable[] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
};

constexpr double kScale = 0x1.0p-32;

// v_j = m_j << (32 - j), with m_j extended by the primitive-polynomial
// recurrence m_k = m_{k-s} ^ (m_{k-s} << s) ^ XOR_i a_i (m_{k-i} << i).
void fill_directions(int dim_index, std::uint32_t* v) {
  std::uint32_t m[kBits];
  if (dim_index == 0) {
    for (int j = 0; j < kBits; ++j) m[j] = 1;
  } else {
    const PolyRow& row = kTable[dim_index - 1];
    const int s = row.degree;
    for (int j = 0; j < s; ++j) m[j] = row.m_init[j];
    for (int k = s; k < kBits; ++k) {
      std::uint32_t value = m[k - s] ^ (m[k - s] << s);
      for (int i = 1; i < s; ++i)
        if ((row.coeffs >> (s - 1 - i)) & 1u) value ^= m[k - i] << i;
      m[k] = value;
    }
  }
  for (int j = 0; j < kBits; ++j) v[j] = m[j] << (kBits - 1 - j);
}

}  // namespace

const char* SobolStream::table_id() { return "new-joe-kuo-6"; }

SobolStream::SobolStream(int dims, bool skip_initial_zero)
    : dims_(dims), skip_(skip_initial_zero), index_(0) {
  if (dims < 1 || dims > kSobolMaxDims)
    throw std::invalid_argument("Sobol dimension " + std::to_string(dims) +
                                " outside table capacity 1.." +
                                std::to_string(kSobolMaxDims));
  directions_.resize(dims, kBits);
  std::uint32_t v[kBits];
  for (int d = 0; d < dims; ++d) {
    fill_directions(d, v);
    for (int j = 0; j < kBits; ++j) directions_(d, j) = v[j];
  }
  state_ = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 1>::Zero(dims);
  if (skip_) advance();
}

void SobolStream::advance() {
  const int j = std::countr_one(index_);
  if (j >= kBits) throw std::length_error("Sobol sequence exhausted (2^32 points)");
  for (int d = 0; d < dims_; ++d) state_[d] ^= directions_(d, j);
  ++index_;
}

void SobolStream::jump_to(std::uint64_t position) {
  const std::uint64_t n = position + (skip_ ? 1u : 0u);
  if (n >> kBits) throw std::length_error("Sobol jump beyond 2^32 points");
  const std::uint64_t gray = n ^ (n >> 1);
  state_.setZero();
  for (int j = 0; j < kBits; ++j)
    if ((gray >> j) & 1u)
      for (int d = 0; d < dims_; ++d) state_[d] ^= directions_(d, j);
  index_ = n;
}

Eigen::RowVectorXd SobolStream::next() {
  Eigen::RowVectorXd point = state_.cast<double>().transpose() * kScale;
  advance();
  return point;
}

Eigen::MatrixXd SobolStream::next_block(Eigen::Index n) {
  if (n < 0) throw std::invalid_argument("negative Sobol block size");
  Eigen::MatrixXd block(n, dims_);
  for (Eigen::Index i = 0; i < n; ++i) {
    block.row(i) = state_.cast<double>().transpose() * kScale;
    advance();
  }
  return block;
}

Eigen::MatrixXd sobol_next(SobolStream& stream, Eigen::Index n) {
  return stream.next_block(n);
}

}  // namespace gpref::sampling
