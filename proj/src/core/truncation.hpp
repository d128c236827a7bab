#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "linalg.hpp"

namespace l0trunc {

/// Number of products dropped from each end of a sorted elementwise product.
struct TruncationParam {
  std::size_t k = 0;

  constexpr TruncationParam() = default;
  constexpr explicit TruncationParam(std::size_t count) : k(count) {}

  friend constexpr bool operator==(TruncationParam, TruncationParam) = default;
};

/// Coordinates whose products survive truncation, ascending. Always d - 2k long.
class SurvivorMask {
 public:
  SurvivorMask() = default;
  explicit SurvivorMask(std::vector<std::size_t> indices) : indices_(std::move(indices)) {}

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool contains(std::size_t i) const;

 private:
  std::vector<std::size_t> indices_;
};

/// Throws kInvalidTruncation unless 2k < d.
void check_truncation(std::size_t d, TruncationParam k);

/// Sum of the middle d - 2k entries of w ⊙ x sorted in descending order.
///
/// Equal products rank by ascending coordinate index, so the dropped set is
/// unique. Survivors are accumulated in ascending index order in double, which
/// makes k = 0 the plain left-to-right dot product.
double truncated_inner_product(std::span<const double> w, std::span<const double> x,
                               TruncationParam k);

SurvivorMask survivor_mask(std::span<const double> w, std::span<const double> x,
                           TruncationParam k);

/// u_i = <W[i], x>_k + bias_i. Bias is added after truncation.
std::vector<double> truncated_matvec(const Matrix& weights, std::span<const double> x,
                                     TruncationParam k, std::span<const double> bias);

/// Unchecked hot-path kernel with reusable scratch. Not thread-safe; keep one
/// per thread.
class TruncationKernel {
 public:
  /// `dropped`, when non-null, receives the 2k dropped indices in ascending order.
  double dot(const double* w, const double* x, std::size_t d, std::size_t k,
             std::uint32_t* dropped = nullptr);

  /// Writes the 2k dropped indices (ascending) for the products u[0..d).
  void select_dropped(const double* u, std::size_t d, std::size_t k, std::uint32_t* dropped);

 private:
  void select_small(const double* u, std::size_t d, std::size_t k, std::uint32_t* dropped);
  void select_large(const double* u, std::size_t d, std::size_t k, std::uint32_t* dropped);

  std::vector<double> products_;
  std::vector<std::uint32_t> order_;
  std::vector<double> top_val_, bot_val_;
  std::vector<std::uint32_t> top_idx_, bot_idx_;
  std::vector<std::uint32_t> dropped_;
};

/// Sums u[0..d) in ascending index order, skipping `dropped` (ascending, n entries).
double sum_skipping(const double* u, std::size_t d, const std::uint32_t* dropped, std::size_t n);

}  // namespace l0trunc
