#include "truncation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"

namespace l0trunc {

namespace {

constexpr std::size_t kSmallSelectionLimit = 32;

void check_pair(std::span<const double> w, std::span<const double> x, TruncationParam k) {
  require(w.size() == x.size(), ErrorCode::kDimensionMismatch,
          "dimension mismatch: w has " + std::to_string(w.size()) + " entries, x has " +
              std::to_string(x.size()));
  check_truncation(x.size(), k);
  for (std::size_t i = 0; i < w.size(); ++i) {
    require(std::isfinite(w[i]) && std::isfinite(x[i]), ErrorCode::kNonFinite,
            "non-finite input at coordinate " + std::to_string(i));
  }
}

}  // namespace

bool SurvivorMask::contains(std::size_t i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

void check_truncation(std::size_t d, TruncationParam k) {
  require(2 * k.k < d, ErrorCode::kInvalidTruncation,
          "truncation requires 2k < d (k=" + std::to_string(k.k) + ", d=" + std::to_string(d) +
              ")");
}

double sum_skipping(const double* u, std::size_t d, const std::uint32_t* dropped, std::size_t n) {
  double s = 0.0;
  std::size_t j = 0;
  for (std::size_t m = 0; m < n; ++m) {
    for (const std::size_t stop = dropped[m]; j < stop; ++j) s += u[j];
    j = dropped[m] + 1;
  }
  for (; j < d; ++j) s += u[j];
  return s;
}

double TruncationKernel::dot(const double* w, const double* x, std::size_t d, std::size_t k,
                             std::uint32_t* dropped) {
  if (products_.size() < d) products_.resize(d);
  double* u = products_.data();
  for (std::size_t j = 0; j < d; ++j) u[j] = w[j] * x[j];
  if (k == 0) return sum_skipping(u, d, nullptr, 0);
  std::uint32_t* out = dropped;
  if (out == nullptr) {
    dropped_.resize(2 * k);
    out = dropped_.data();
  }
  select_dropped(u, d, k, out);
  return sum_skipping(u, d, out, 2 * k);
}

void TruncationKernel::select_dropped(const double* u, std::size_t d, std::size_t k,
                                      std::uint32_t* dropped) {
  if (k == 0) return;
  if (k <= kSmallSelectionLimit) {
    select_small(u, d, k, dropped);
  } else {
    select_large(u, d, k, dropped);
  }
  std::sort(dropped, dropped + 2 * k);
}

// Single pass with two bounded insertion buffers. Indices arrive in ascending
// order, so a new product ties below an equal top entry and ranks as "lower"
// than an equal bottom entry. The current cut-offs live in locals so the
// common no-insert case is two compares.
void TruncationKernel::select_small(const double* u, std::size_t d, std::size_t k,
                                    std::uint32_t* dropped) {
  top_val_.resize(k);
  bot_val_.resize(k);
  top_idx_.resize(k);
  bot_idx_.resize(k);
  double* tv = top_val_.data();
  double* bv = bot_val_.data();
  std::uint32_t* ti = top_idx_.data();
  std::uint32_t* bi = bot_idx_.data();

  // Seed both buffers with the first k products (2k < d guarantees them).
  for (std::size_t j = 0; j < k; ++j) {
    const double v = u[j];
    std::size_t p = j;
    while (p > 0 && tv[p - 1] < v) {
      tv[p] = tv[p - 1];
      ti[p] = ti[p - 1];
      --p;
    }
    tv[p] = v;
    ti[p] = static_cast<std::uint32_t>(j);
    p = j;
    while (p > 0 && v <= bv[p - 1]) {
      bv[p] = bv[p - 1];
      bi[p] = bi[p - 1];
      --p;
    }
    bv[p] = v;
    bi[p] = static_cast<std::uint32_t>(j);
  }
  double top_cut = tv[k - 1];
  double bot_cut = bv[k - 1];

  for (std::size_t j = k; j < d; ++j) {
    const double v = u[j];
    if (v > top_cut) {
      std::size_t p = k - 1;
      while (p > 0 && tv[p - 1] < v) {
        tv[p] = tv[p - 1];
        ti[p] = ti[p - 1];
        --p;
      }
      tv[p] = v;
      ti[p] = static_cast<std::uint32_t>(j);
      top_cut = tv[k - 1];
    }
    if (v <= bot_cut) {
      std::size_t p = k - 1;
      while (p > 0 && v <= bv[p - 1]) {
        bv[p] = bv[p - 1];
        bi[p] = bi[p - 1];
        --p;
      }
      bv[p] = v;
      bi[p] = static_cast<std::uint32_t>(j);
      bot_cut = bv[k - 1];
    }
  }
  std::copy(ti, ti + k, dropped);
  std::copy(bi, bi + k, dropped + k);
}

void TruncationKernel::select_large(const double* u, std::size_t d, std::size_t k,
                                    std::uint32_t* dropped) {
  order_.resize(d);
  std::iota(order_.begin(), order_.end(), 0u);
  auto ranks_above = [u](std::uint32_t a, std::uint32_t b) {
    return u[a] > u[b] || (u[a] == u[b] && a < b);
  };
  auto first = order_.begin();
  auto last = order_.end();
  std::nth_element(first, first + static_cast<std::ptrdiff_t>(k), last, ranks_above);
  std::nth_element(first + static_cast<std::ptrdiff_t>(k), last - static_cast<std::ptrdiff_t>(k),
                   last, ranks_above);
  std::copy(first, first + static_cast<std::ptrdiff_t>(k), dropped);
  std::copy(last - static_cast<std::ptrdiff_t>(k), last, dropped + k);
}

double truncated_inner_product(std::span<const double> w, std::span<const double> x,
                               TruncationParam k) {
  check_pair(w, x, k);
  TruncationKernel kernel;
  return kernel.dot(w.data(), x.data(), x.size(), k.k);
}

SurvivorMask survivor_mask(std::span<const double> w, std::span<const double> x,
                           TruncationParam k) {
  check_pair(w, x, k);
  const std::size_t d = x.size();
  std::vector<double> u(d);
  for (std::size_t j = 0; j < d; ++j) u[j] = w[j] * x[j];
  std::vector<std::uint32_t> dropped(2 * k.k);
  TruncationKernel kernel;
  kernel.select_dropped(u.data(), d, k.k, dropped.data());

  std::vector<std::size_t> keep;
  keep.reserve(d - 2 * k.k);
  std::size_t m = 0;
  for (std::size_t j = 0; j < d; ++j) {
    if (m < dropped.size() && dropped[m] == j) {
      ++m;
      continue;
    }
    keep.push_back(j);
  }
  return SurvivorMask(std::move(keep));
}

std::vector<double> truncated_matvec(const Matrix& weights, std::span<const double> x,
                                     TruncationParam k, std::span<const double> bias) {
  const auto rows = static_cast<std::size_t>(weights.rows());
  const auto cols = static_cast<std::size_t>(weights.cols());
  require(cols == x.size(), ErrorCode::kDimensionMismatch,
          "dimension mismatch: W has " + std::to_string(cols) + " columns, x has " +
              std::to_string(x.size()) + " entries");
  require(bias.size() == rows, ErrorCode::kDimensionMismatch,
          "bias length " + std::to_string(bias.size()) + " does not match " +
              std::to_string(rows) + " rows");
  check_truncation(cols, k);
  for (std::size_t j = 0; j < cols; ++j) {
    require(std::isfinite(x[j]), ErrorCode::kNonFinite,
            "non-finite input at coordinate " + std::to_string(j));
  }
  require(weights.allFinite(), ErrorCode::kNonFinite, "non-finite weight");

  TruncationKernel kernel;
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    out[i] = kernel.dot(weights.row(static_cast<Eigen::Index>(i)).data(), x.data(), cols, k.k) +
             bias[i];
  }
  return out;
}

}  // namespace l0trunc
