#include "verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "error.hpp"
#include "linear_model.hpp"
#include "oracle_adversary.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace l0trunc {

namespace {

double binomial_se(double p, std::size_t n) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

CheckLine at_least(std::string name, double measured, double se, double bound) {
  CheckLine c;
  c.name = std::move(name);
  c.measured = measured;
  c.bound = bound;
  c.margin = measured + 3.0 * se - bound;
  c.vacuous = bound <= 0.0;
  c.pass = c.vacuous || c.margin >= 0.0;
  return c;
}

CheckLine at_most(std::string name, double measured, double se, double bound) {
  CheckLine c;
  c.name = std::move(name);
  c.measured = measured;
  c.bound = bound;
  c.margin = bound + 3.0 * se - measured;
  c.vacuous = bound >= 1.0;
  c.pass = c.vacuous || c.margin >= 0.0;
  return c;
}

}  // namespace

GaussianMixture random_normalized_model(std::size_t d, std::uint64_t seed) {
  require(d >= 1, ErrorCode::kInvalidArgument, "model dimension must be >= 1");
  SplitMix64 rng = stream_rng(tagged_seed(seed, StreamTag::kProfile), d);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> spread(0.5, 2.0);
  std::vector<double> mu(d), sigma(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double nu = normal(rng);
    sigma[i] = spread(rng);
    mu[i] = nu * sigma[i];
  }
  return normalize(GaussianMixture(std::move(mu), std::move(sigma)));
}

std::vector<std::size_t> matched_coordinate_set(const SnrVector& nu) {
  const std::size_t d = nu.size();
  const double L = std::log(static_cast<double>(d));
  std::vector<std::size_t> coords;
  double l1 = 0.0;
  for (std::size_t r = 0; r < d && coords.size() + 1 <= d / 4; ++r) {
    const double next = l1 + nu.sorted_abs()[r];
    if (2.0 * std::floor(next * L) >= static_cast<double>(d)) break;
    l1 = next;
    coords.push_back(nu.order()[r]);
  }
  std::sort(coords.begin(), coords.end());
  return coords;
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckLine& c) { return c.pass; });
}

VerifyReport gmm_verify(std::size_t d, std::size_t trials, std::uint64_t seed) {
  require(d >= 2, ErrorCode::kInvalidArgument, "gmm-verify needs d >= 2");
  require(trials >= 1, ErrorCode::kInvalidArgument, "gmm-verify needs trials >= 1");
  VerifyReport rep;
  rep.d = d;
  rep.trials = trials;
  rep.seed = seed;
  const GaussianMixture model = random_normalized_model(d, seed);
  const SnrVector nu = snr_vector(model);
  const double L = std::log(static_cast<double>(d));
  const double n = static_cast<double>(trials);

  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const AdvConfig full(model, all);

  const AdversaryStats stats = adversary_soundness(full, trials, mix_seed(seed, 1));
  {
    CheckLine c;
    c.name = "budget_soundness";
    c.measured = static_cast<double>(stats.max_changed);
    c.bound = full.budget();
    c.margin = c.bound - c.measured;
    c.pass = stats.budget_violations == 0 && stats.complement_violations == 0;
    rep.checks.push_back(c);
  }
  {
    const double p = static_cast<double>(stats.fallbacks) / n;
    rep.checks.push_back(at_most("fallback_rate", p, binomial_se(p, trials), 1.0 / L));
  }
  {
    // Worst coordinate, measured against its own cap.
    CheckLine worst;
    worst.name = "change_rate";
    worst.margin = std::numeric_limits<double>::infinity();
    worst.pass = true;
    for (std::size_t i = 0; i < d; ++i) {
      const double p = static_cast<double>(stats.changed_per_coord[i]) / n;
      const CheckLine c =
          at_most("change_rate", p, binomial_se(p, trials), change_prob_bound(nu.values()[i]));
      if (c.bound >= 1.0) continue;
      if (c.margin < worst.margin) worst = c;
    }
    if (!std::isfinite(worst.margin)) worst.vacuous = true, worst.margin = 0.0;
    rep.checks.push_back(worst);
  }
  {
    const McEstimate e = map_error_lower_mc(full, trials, mix_seed(seed, 2));
    rep.checks.push_back(at_least("map_lower_full", e.value, e.std_error, 0.5 - 0.5 / L));
  }
  {
    std::vector<std::size_t> half(nu.order().begin(),
                                  nu.order().begin() + static_cast<std::ptrdiff_t>(d / 2));
    std::sort(half.begin(), half.end());
    const AdvConfig cfg(model, half);
    const McEstimate e = map_error_lower_mc(cfg, trials, mix_seed(seed, 3));
    const LowerBound lb = lower_bound(nu, half);
    rep.checks.push_back(at_least("map_lower_subset", e.value, e.std_error, lb.error.raw));
  }
  {
    const double eps = 0.5 * (phi_bar(1.0) + 0.5);
    const std::vector<double> w_tilde = candidate_weights(nu, eps);
    std::vector<double> w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = w_tilde[i] / model.sigma()[i];
    const AdvConfig cfg(model, matched_coordinate_set(nu));
    const TruncationParam k(static_cast<std::size_t>(std::floor(cfg.budget())));
    const TruncatedLinearClassifier clf(w, k);
    const McEstimate e = adversary_error_mc(
        cfg, [&](std::span<const double> x) { return clf.predict(x); }, trials, mix_seed(seed, 4));
    const Bound ub = upper_bound_diag(w_tilde, nu, k, static_cast<double>(d));
    rep.checks.push_back(at_most("upper_domination", e.value, e.std_error, ub.raw));
  }
  return rep;
}

std::vector<TheoryRow> theory_curve(const SnrVector& nu, const std::vector<double>& eps_grid,
                                    double d) {
  require(!eps_grid.empty(), ErrorCode::kInvalidArgument, "eps grid is empty");
  const double L = std::log(d);
  std::vector<TheoryRow> rows;
  for (double eps : eps_grid) {
    TheoryRow row;
    row.bounds = budget_bounds(nu, eps, d);
    row.sandwich = sandwich(nu, eps, d);
    if (row.bounds.c_defined) {
      const double a = std::sqrt(1.0 - row.bounds.c * row.bounds.c) / (16.0 * L);
      row.loss_bound = loss_bound_at_budget(nu, eps, a, d);
    } else {
      row.loss_bound.value = row.loss_bound.raw = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace l0trunc
