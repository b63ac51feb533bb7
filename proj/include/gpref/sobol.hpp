#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace gpref::sampling {

/// Direction-number table capacity; dimension 1 is the van der Corput sequence.
inline constexpr int kSobolMaxDims = 16;

/// Gray-code Sobol sequence over [0,1)^D.
///
/// Deterministic for fixed (dims, skip flag): identical streams yield
/// identical sequences. The all-zeros initial point is skipped by default.
class SobolStream {
 public:
  explicit SobolStream(int dims, bool skip_initial_zero = true);

  int dims() const { return dims_; }
  bool skips_initial_zero() const { return skip_; }

  /// Identifier of the embedded direction-number table.
  static const char* table_id();

  /// Position of the next emitted point, counted in emitted-stream space
  /// (0 = the first point next() would return on a fresh stream).
  std::uint64_t position() const { return index_ - (skip_ ? 1 : 0); }

  /// Repositions the stream so the next emitted point is the one at
  /// `position` in emitted-stream space. O(1): rebuilds the XOR state
  /// from the Gray code of the underlying index.
  void jump_to(std::uint64_t position);

  /// Next point of the sequence.
  Eigen::RowVectorXd next();

  /// Next n points as an n x D matrix (n = 0 gives an empty matrix).
  Eigen::MatrixXd next_block(Eigen::Index n);

 private:
  void advance();

  int dims_;
  bool skip_;
  std::uint64_t index_;  // natural sequence index of the state below
  Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 32> directions_;
  Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 1> state_;
};

/// Convenience wrapper: the next n points of the stream.
Eigen::MatrixXd sobol_next(SobolStream& stream, Eigen::Index n);

}  // namespace gpref::sampling
