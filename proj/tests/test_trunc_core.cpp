#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "core/linalg.hpp"
#include "core/truncation.hpp"
#include "support.hpp"

using namespace l0trunc;
using l0trunc::test::uniform_vector;

namespace {

// Reference: full stable ranking, then an index-ordered sum over survivors.
std::vector<std::size_t> brute_survivors(const std::vector<double>& w, const std::vector<double>& x,
                                         std::size_t k) {
  const std::size_t d = w.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] * x[a] > w[b] * x[b]; });
  std::vector<std::size_t> kept(order.begin() + k, order.end() - k);
  std::sort(kept.begin(), kept.end());
  return kept;
}

double brute_truncated(const std::vector<double>& w, const std::vector<double>& x, std::size_t k) {
  double s = 0.0;
  for (std::size_t i : brute_survivors(w, x, k)) s += w[i] * x[i];
  return s;
}

double plain_dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

TEST_CASE("truncated inner product: worked examples") {
  CHECK(truncated_inner_product(std::vector<double>{1, 2}, std::vector<double>{3, 4},
                                TruncationParam(0)) == 11.0);
  const std::vector<double> ones{1, 1, 1, 1, 1};
  const std::vector<double> x{5, -3, 2, 0, 1};
  CHECK(truncated_inner_product(ones, x, TruncationParam(1)) == 3.0);

  const std::vector<double> w3{1, 1, 1};
  const std::vector<double> clean{1, 1, 1};
  const std::vector<double> spiked{100, 1, 1};
  const double t = truncated_inner_product(w3, spiked, TruncationParam(1));
  CHECK(t == 1.0);
  CHECK(std::abs(t - plain_dot(w3, clean)) == 2.0);
  CHECK(std::abs(t - plain_dot(w3, clean)) <= 8.0);
}

TEST_CASE("truncated inner product rejects bad input") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{1, 2, 3};
  CHECK_ERROR(truncated_inner_product(a, b, TruncationParam(0)), ErrorCode::kDimensionMismatch);
  CHECK_ERROR(truncated_inner_product(a, a, TruncationParam(2)), ErrorCode::kInvalidTruncation);
  CHECK_ERROR(truncated_inner_product(a, a, TruncationParam(3)), ErrorCode::kInvalidTruncation);
  std::vector<double> bad = a;
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_ERROR(truncated_inner_product(a, bad, TruncationParam(1)), ErrorCode::kNonFinite);
  bad[2] = std::numeric_limits<double>::infinity();
  CHECK_ERROR(truncated_inner_product(bad, a, TruncationParam(1)), ErrorCode::kNonFinite);
  CHECK_NOTHROW(truncated_inner_product(a, a, TruncationParam(1)));
}

TEST_CASE("survivor mask examples and tie rule") {
  const std::vector<double> ones{1, 1, 1, 1, 1};
  const std::vector<double> x{5, -3, 2, 0, 1};
  CHECK(survivor_mask(ones, x, TruncationParam(1)).indices() == std::vector<std::size_t>{2, 3, 4});
  CHECK(survivor_mask(ones, x, TruncationParam(0)).indices() ==
        std::vector<std::size_t>{0, 1, 2, 3, 4});
  const std::vector<double> w3{1, 1, 1};
  const std::vector<double> tie{7, 7, 0};
  CHECK(survivor_mask(w3, tie, TruncationParam(1)).indices() == std::vector<std::size_t>{1});
  // All-equal products: lower indices rank higher, so the first k are the top
  // and the last k the bottom.
  const std::vector<double> flat(7, 2.0);
  CHECK(survivor_mask(flat, flat, TruncationParam(2)).indices() ==
        std::vector<std::size_t>{2, 3, 4});
}

TEST_CASE("truncated matvec examples") {
  Matrix w(2, 3);
  w << 1, 0, 0, 0, 1, 1;
  const std::vector<double> x{2, -1, 3};
  const std::vector<double> zero_bias{0, 0};
  CHECK(truncated_matvec(w, x, TruncationParam(1), zero_bias) == std::vector<double>{0, 0});

  Matrix row(1, 5);
  row << 1, 1, 1, 1, 1;
  const std::vector<double> x5{5, -3, 2, 0, 1};
  const std::vector<double> bias{10};
  CHECK(truncated_matvec(row, x5, TruncationParam(1), bias) == std::vector<double>{13});

  const std::vector<double> short_bias{1};
  CHECK_ERROR(truncated_matvec(w, x, TruncationParam(0), short_bias),
              ErrorCode::kDimensionMismatch);
  const std::vector<double> short_x{1, 2};
  CHECK_ERROR(truncated_matvec(w, short_x, TruncationParam(0), zero_bias),
              ErrorCode::kDimensionMismatch);
}

TEST_CASE("kernel agrees with brute force across the selection paths") {
  SplitMix64 rng(11);
  TruncationKernel kernel;
  // Small k takes the insertion-buffer path, large k the partitioning path.
  for (std::size_t trial = 0; trial < 600; ++trial) {
    const std::size_t d = 3 + rng() % 300;
    const std::size_t k = rng() % ((d - 1) / 2 + 1);
    auto w = uniform_vector(rng, d, -2, 2);
    auto x = uniform_vector(rng, d, -2, 2);
    if (trial % 3 == 0) {
      // Heavy ties: quantized values.
      for (auto& v : x) v = std::round(v * 2.0) / 2.0;
      for (auto& v : w) v = std::round(v);
    }
    CAPTURE(d);
    CAPTURE(k);
    const double expected = brute_truncated(w, x, k);
    CHECK(truncated_inner_product(w, x, TruncationParam(k)) == expected);
    std::vector<std::uint32_t> dropped(2 * k);
    CHECK(kernel.dot(w.data(), x.data(), d, k, dropped.data()) == expected);
    CHECK(survivor_mask(w, x, TruncationParam(k)).indices() == brute_survivors(w, x, k));
    CHECK(std::is_sorted(dropped.begin(), dropped.end()));
  }
}

TEST_CASE("kernel above the full-sort threshold") {
  SplitMix64 rng(12);
  for (std::size_t k : {1, 7, 40, 300}) {
    const std::size_t d = 5000;
    auto w = uniform_vector(rng, d, -1, 1);
    auto x = uniform_vector(rng, d, -1, 1);
    CHECK(truncated_inner_product(w, x, TruncationParam(k)) == brute_truncated(w, x, k));
  }
}

TEST_CASE("k = 0 is the plain index-ordered dot product, bitwise") {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 100;
    auto w = uniform_vector(rng, d, -5, 5);
    auto x = uniform_vector(rng, d, -5, 5);
    CHECK(truncated_inner_product(w, x, TruncationParam(0)) == plain_dot(w, x));
  }
}

TEST_CASE("permutation invariance and scaling") {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 5 + rng() % 60;
    const std::size_t k = rng() % ((d - 1) / 2 + 1);
    auto w = uniform_vector(rng, d, -3, 3);
    auto x = uniform_vector(rng, d, -3, 3);
    const double base = truncated_inner_product(w, x, TruncationParam(k));

    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pw(d), px(d);
    for (std::size_t i = 0; i < d; ++i) {
      pw[i] = w[perm[i]];
      px[i] = x[perm[i]];
    }
    // Continuous draws have no ties, so the kept multiset is the same and only
    // the summation order differs.
    CHECK(truncated_inner_product(pw, px, TruncationParam(k)) ==
          doctest::Approx(base).epsilon(1e-12));

    for (double c : {-2.5, -1.0, 0.0, 0.5, 3.0}) {
      std::vector<double> cw(d);
      for (std::size_t i = 0; i < d; ++i) cw[i] = c * w[i];
      CHECK(truncated_inner_product(cw, x, TruncationParam(k)) ==
            doctest::Approx(c * base).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("mask consistency") {
  SplitMix64 rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 3 + rng() % 80;
    const std::size_t k = rng() % ((d - 1) / 2 + 1);
    auto w = uniform_vector(rng, d, -1, 1);
    auto x = uniform_vector(rng, d, -1, 1);
    const SurvivorMask mask = survivor_mask(w, x, TruncationParam(k));
    REQUIRE(mask.size() == d - 2 * k);
    double s = 0.0;
    for (std::size_t i : mask.indices()) s += w[i] * x[i];
    CHECK(s == truncated_inner_product(w, x, TruncationParam(k)));
    for (std::size_t i : mask.indices()) CHECK(mask.contains(i));
  }
}

TEST_CASE("deviation bound under k changed coordinates") {
  SplitMix64 rng(16);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = 5 + rng() % 120;
    const std::size_t k = rng() % ((d - 1) / 2 + 1);
    auto w = uniform_vector(rng, d, -1, 1);
    auto x = uniform_vector(rng, d, -1, 1);
    auto xp = x;
    for (std::size_t j = 0; j < k; ++j) xp[rng() % d] = (rng.uniform() - 0.5) * 1e6;
    double inf = 0.0;
    for (std::size_t i = 0; i < d; ++i) inf = std::max(inf, std::abs(w[i] * x[i]));
    const double dev = std::abs(truncated_inner_product(w, xp, TruncationParam(k)) - plain_dot(w, x));
    CHECK(dev <= 8.0 * static_cast<double>(k) * inf + 1e-12);
  }
}
