#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "core/gmm.hpp"
#include "core/oracle_adversary.hpp"
#include "core/special.hpp"
#include "core/verification.hpp"
#include "support.hpp"

using namespace l0trunc;

namespace {

std::vector<std::size_t> all_coords(std::size_t d) {
  std::vector<std::size_t> v(d);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TEST_CASE("keep probability") {
  CHECK(erasure_keep_prob(1.0, 1, 1.0, 1.0) == doctest::Approx(0.1353352832366127).epsilon(1e-15));
  CHECK(erasure_keep_prob(-1.0, -1, 1.0, 1.0) == doctest::Approx(0.1353352832366127));
  CHECK(erasure_keep_prob(50.0, 1, 1.0, 1.0) < 1e-40);
  // Products y mu x <= 0 sit on the likelier side of the opposite class and are kept.
  CHECK(erasure_keep_prob(-0.3, 1, 1.0, 1.0) == 1.0);
  CHECK(erasure_keep_prob(0.3, -1, 1.0, 1.0) == 1.0);
  CHECK(erasure_keep_prob(0.0, 1, 1.0, 1.0) == 1.0);
  CHECK(erasure_keep_prob(2.0, 1, 0.0, 1.0) == 1.0);
  // sigma enters squared.
  CHECK(erasure_keep_prob(1.0, 1, 1.0, 2.0) == doctest::Approx(std::exp(-0.5)));
  for (double x = -3; x <= 3; x += 0.25) {
    const double p = erasure_keep_prob(x, 1, 0.7, 1.3);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK_ERROR(erasure_keep_prob(1.0, 1, 1.0, 0.0), ErrorCode::kInvalidArgument);
  CHECK_ERROR(erasure_keep_prob(1.0, 1, 1.0, -1.0), ErrorCode::kInvalidArgument);
  CHECK_ERROR(erasure_keep_prob(1.0, 0, 1.0, 1.0), ErrorCode::kInvalidArgument);
}

TEST_CASE("change probability bound and exact value") {
  CHECK(change_prob_bound(0.0) == 0.0);
  CHECK(change_prob_bound(1.0) == doctest::Approx(0.7978845608028654).epsilon(1e-15));
  CHECK(change_prob_bound(-1.0) == change_prob_bound(1.0));
  CHECK(change_prob_bound(std::sqrt(std::numbers::pi / 2)) == doctest::Approx(1.0));
  CHECK(change_prob_bound(2.0) == 1.0);
  for (double v = 0.0; v < 4.0; v += 0.05) CHECK(change_prob_exact(v) <= change_prob_bound(v));
  CHECK(change_prob_exact(1.0) == doctest::Approx(0.6826894921370859).epsilon(1e-14));
}

TEST_CASE("change probability Monte Carlo") {
  const GaussianMixture m({1.0, 0.0, 0.4}, {1.0, 1.0, 2.0});
  const std::size_t n = 1000000;
  const McEstimate e = change_prob_mc(m, 0, n, 3);
  CHECK(e.value <= 0.7979 + 0.0012);
  CHECK(std::abs(e.value - change_prob_exact(1.0)) <= 3 * e.std_error);

  const McEstimate z = change_prob_mc(m, 1, 100000, 3);
  CHECK(z.value <= 3 * z.std_error);

  // Independent of the label.
  const McEstimate pos = change_prob_mc(m, 2, 200000, 4, 1);
  const McEstimate neg = change_prob_mc(m, 2, 200000, 5, -1);
  const double se = std::hypot(pos.std_error, neg.std_error);
  CHECK(std::abs(pos.value - neg.value) <= 3 * se);
  CHECK(std::abs(pos.value - change_prob_exact(0.2)) <= 3 * pos.std_error);
}

TEST_CASE("perturb") {
  const GaussianMixture m = normalize(GaussianMixture({1, -2, 0.5, 3, 0.1}, {1, 1, 2, 1.5, 0.7}));
  const std::vector<double> x{0.3, -0.2, 0.9, 1.1, -0.4};

  const AdvConfig none(m, {});
  CHECK(none.budget() == 0.0);
  for (std::uint64_t s = 0; s < 50; ++s) CHECK(perturb(x, 1, none, s).x == x);

  // mu = 0 on A: every keep probability is 1.
  const GaussianMixture flat({0, 0, 1}, {1, 1, 1});
  const AdvConfig never(flat, {0, 1});
  const std::vector<double> xf{0.5, -0.5, 1};
  for (std::uint64_t s = 0; s < 50; ++s) CHECK(perturb(xf, 1, never, s).x == xf);

  const AdvConfig sub(m, {3, 1});
  CHECK(sub.coords() == std::vector<std::size_t>{1, 3});
  const PerturbResult a = perturb(x, 1, sub, 77);
  const PerturbResult b = perturb(x, 1, sub, 77);
  CHECK(a.x == b.x);
  for (std::uint64_t s = 0; s < 500; ++s) {
    const PerturbResult r = perturb(x, 1, sub, s);
    CHECK(r.x[0] == x[0]);
    CHECK(r.x[2] == x[2]);
    CHECK(r.x[4] == x[4]);
    CHECK(static_cast<double>(r.changed) <= sub.budget());
    for (double v : r.x) CHECK(std::isfinite(v));
  }

  CHECK_ERROR(AdvConfig(m, {5}), ErrorCode::kInvalidArgument);
  CHECK_ERROR(AdvConfig(m, {1, 1}), ErrorCode::kInvalidArgument);
  CHECK_ERROR(perturb(std::vector<double>{1, 2}, 1, sub, 0), ErrorCode::kDimensionMismatch);
}

TEST_CASE("soundness at d = 100") {
  const GaussianMixture m = random_normalized_model(100, 8);
  const AdvConfig cfg(m, all_coords(100));
  const std::size_t n = 100000;
  const AdversaryStats s = adversary_soundness(cfg, n, 9);
  CHECK(s.budget_violations == 0);
  CHECK(s.complement_violations == 0);
  CHECK(static_cast<double>(s.max_changed) <= cfg.budget());
  const double fb = static_cast<double>(s.fallbacks) / n;
  CHECK(fb <= 1 / std::log(100.0) + 3 * std::sqrt(fb * (1 - fb) / n));
  const SnrVector nu = snr_vector(m);
  for (std::size_t i = 0; i < 100; ++i) {
    const double p = static_cast<double>(s.changed_per_coord[i]) / n;
    CHECK(p <= change_prob_bound(nu.values()[i]) + 3 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST_CASE("erased marginal does not depend on the label") {
  // Two-sample Kolmogorov-Smirnov on the single coordinate of A, alpha = 0.01.
  // The budget 0.8 log 10 covers one erasure, so the fallback never fires and
  // the output is the erased vector itself.
  std::vector<double> mu(10, 0.2);
  mu[0] = 0.8;
  const GaussianMixture m(mu, std::vector<double>(10, 1.0));
  const AdvConfig cfg(m, {0});
  REQUIRE(cfg.budget() >= 1.0);
  const GmmSampler sampler(m, 12);
  const std::size_t n = 20000;
  std::vector<double> pos, neg;
  std::vector<double> x(10);
  for (std::size_t t = 0; t < n; ++t) {
    sampler.draw_given(t, 1, x);
    const PerturbResult a = perturb(x, 1, cfg, mix_seed(100, t));
    sampler.draw_given(n + t, -1, x);
    const PerturbResult b = perturb(x, -1, cfg, mix_seed(200, t));
    REQUIRE_FALSE(a.fell_back);
    REQUIRE_FALSE(b.fell_back);
    pos.push_back(a.x[0]);
    neg.push_back(b.x[0]);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < n) {
    const double v = std::min(pos[i], neg[j]);
    while (i < n && pos[i] <= v) ++i;
    while (j < n && neg[j] <= v) ++j;
    ks = std::max(ks, std::abs(double(i) - double(j)) / n);
  }
  CHECK(ks < 1.628 * std::sqrt(2.0 / n));
}

TEST_CASE("erased density") {
  const GaussianMixture m = normalize(GaussianMixture({0.9, 0.2}, {1.5, 0.8}));
  const AdvConfig one(m, {0});
  const double alpha = change_prob_exact(snr_vector(m).values()[0]);
  const std::vector<double> al{alpha};
  // Symmetric in z.
  for (double z : {0.1, 0.7, 1.5, 3.0}) {
    CHECK(erased_density(std::vector<double>{z}, one, al) ==
          doctest::Approx(erased_density(std::vector<double>{-z}, one, al)).epsilon(1e-15));
  }
  // Integrates to one (composite Simpson on [-12, 12]).
  const double lo = -12.0, hi = 12.0;
  auto f = [&](double z) { return erased_density(std::vector<double>{z}, one, al); };
  // Integrate the smooth pieces separately so the jumps at |z| = 1 are exact.
  auto simpson = [&](double a, double b, int n) {
    const double hh = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += f(a + k * hh) * (k % 2 ? 4 : 2);
    return s * hh / 3;
  };
  const double below = std::nextafter(-1.0, -2.0);
  const double above = std::nextafter(1.0, 2.0);
  const double integral = simpson(lo, below, 44000) + simpson(-1.0, 0.0, 20000) +
                          simpson(0.0, 1.0, 20000) + simpson(above, hi, 44000);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));

  // alpha = 1 adds a flat 1/2 on [-1, 1].
  const std::vector<double> full{1.0};
  const double inside = erased_density(std::vector<double>{0.5}, one, full);
  const double gauss = erased_density(std::vector<double>{0.5}, one, std::vector<double>{0.0});
  CHECK(inside - gauss == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(erased_density(std::vector<double>{1.5}, one, full) ==
        erased_density(std::vector<double>{1.5}, one, std::vector<double>{0.0}));
  CHECK_ERROR(erased_density(std::vector<double>{0.5}, one, std::vector<double>{1.5}),
              ErrorCode::kInvalidArgument);
  CHECK_ERROR(erased_density(std::vector<double>{0.5, 1}, one, al), ErrorCode::kDimensionMismatch);
}

TEST_CASE("MAP error estimates") {
  const GaussianMixture m = random_normalized_model(100, 31);
  const SnrVector nu = snr_vector(m);
  const double L = std::log(100.0);
  const std::size_t n = 20000;

  const McEstimate empty = map_error_lower_mc(AdvConfig(m, {}), n, 1);
  CHECK(std::abs(empty.value - phi_bar(1.0)) <= 3 * empty.std_error);

  const McEstimate full = map_error_lower_mc(AdvConfig(m, all_coords(100)), n, 2);
  CHECK(full.value >= 0.5 - 0.5 / L - 3 * full.std_error);

  std::vector<std::size_t> half(nu.order().begin(), nu.order().begin() + 30);
  const McEstimate part = map_error_lower_mc(AdvConfig(m, half), n, 3);
  CHECK(part.value >= lower_bound(nu, half).error.raw - 3 * part.std_error);

  // Deterministic per seed.
  CHECK(map_error_lower_mc(AdvConfig(m, half), 1000, 9).value ==
        map_error_lower_mc(AdvConfig(m, half), 1000, 9).value);
}

TEST_CASE("gmm-verify report") {
  const VerifyReport r = gmm_verify(100, 20000, 4);
  CHECK(r.all_pass());
  CHECK(r.checks.size() == 6);
  const VerifyReport again = gmm_verify(100, 20000, 4);
  for (std::size_t i = 0; i < r.checks.size(); ++i) {
    CHECK(r.checks[i].measured == again.checks[i].measured);
    CHECK(r.checks[i].margin == again.checks[i].margin);
  }
  // Small d: the bounds are trivial and flagged, not failed.
  const VerifyReport tiny = gmm_verify(2, 5000, 4);
  CHECK(tiny.all_pass());
  CHECK(std::any_of(tiny.checks.begin(), tiny.checks.end(),
                    [](const CheckLine& c) { return c.vacuous; }));
}
