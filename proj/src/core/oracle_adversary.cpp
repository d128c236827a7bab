#include "oracle_adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "error.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace l0trunc {

namespace {

McEstimate bernoulli_estimate(double sum, double sum_sq, std::size_t n) {
  McEstimate e;
  e.trials = n;
  e.value = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - e.value * e.value);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  return e;
}

double log_gaussian(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

std::vector<double> exact_alphas(const AdvConfig& cfg) {
  std::vector<double> alpha;
  alpha.reserve(cfg.coords().size());
  const auto& mu = cfg.model().mu();
  const auto& sigma = cfg.model().sigma();
  for (std::size_t i : cfg.coords()) alpha.push_back(change_prob_exact(mu[i] / sigma[i]));
  return alpha;
}

}  // namespace

AdvConfig::AdvConfig(GaussianMixture model, std::vector<std::size_t> coords)
    : model_(std::move(model)), coords_(std::move(coords)) {
  const std::size_t d = model_.dim();
  require(d >= 2, ErrorCode::kInvalidArgument, "Adv(A) needs d >= 2");
  in_set_.assign(d, 0);
  std::sort(coords_.begin(), coords_.end());
  for (std::size_t i : coords_) {
    require(i < d, ErrorCode::kInvalidArgument,
            "coordinate " + std::to_string(i) + " out of range for d=" + std::to_string(d));
    require(!in_set_[i], ErrorCode::kInvalidArgument, "duplicate coordinate in A");
    in_set_[i] = 1;
  }
  double l1 = 0.0;
  for (std::size_t i : coords_) l1 += std::abs(model_.mu()[i] / model_.sigma()[i]);
  budget_ = l1 * std::log(static_cast<double>(d));
}

double erasure_keep_prob(double x_i, int y, double mu_i, double sigma_i) {
  require(sigma_i > 0.0, ErrorCode::kInvalidArgument, "sigma_i must be positive");
  require(y == 1 || y == -1, ErrorCode::kInvalidArgument, "label must be +1 or -1");
  // log of N(x; -y mu, s^2) / N(x; y mu, s^2)
  const double log_ratio = -2.0 * y * mu_i * x_i / (sigma_i * sigma_i);
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

PerturbResult perturb(std::span<const double> x, int y, const AdvConfig& cfg, std::uint64_t seed) {
  const auto& model = cfg.model();
  require(x.size() == model.dim(), ErrorCode::kDimensionMismatch,
          "perturb: input dimension does not match the model");
  SplitMix64 rng(mix_seed(seed, 0));
  PerturbResult r;
  r.x.assign(x.begin(), x.end());
  for (std::size_t i : cfg.coords()) {
    const double keep = erasure_keep_prob(x[i], y, model.mu()[i], model.sigma()[i]);
    if (rng.uniform() >= keep) {
      ++r.erased;
      r.x[i] = 2.0 * rng.uniform() - 1.0;
    }
  }
  if (static_cast<double>(r.erased) > cfg.budget()) {
    r.fell_back = true;
    r.x.assign(x.begin(), x.end());
  }
  for (std::size_t i : cfg.coords()) r.changed += r.x[i] != x[i];
  require(static_cast<double>(r.changed) <= cfg.budget(), ErrorCode::kInvariant,
          "Adv(A) exceeded its budget");
  return r;
}

double change_prob_bound(double nu_i) {
  require(std::isfinite(nu_i), ErrorCode::kNonFinite, "non-finite nu_i");
  return std::min(std::sqrt(2.0 / std::numbers::pi) * std::abs(nu_i), 1.0);
}

double change_prob_exact(double nu_i) {
  require(std::isfinite(nu_i), ErrorCode::kNonFinite, "non-finite nu_i");
  return std::erf(std::abs(nu_i) / std::numbers::sqrt2);
}

McEstimate change_prob_mc(const GaussianMixture& model, std::size_t i, std::size_t trials,
                          std::uint64_t seed, int label) {
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  require(i < model.dim(), ErrorCode::kInvalidArgument, "coordinate out of range");
  require(label == 0 || label == 1 || label == -1, ErrorCode::kInvalidArgument,
          "label must be 0 (uniform) or +-1");
  SplitMix64 rng(mix_seed(tagged_seed(seed, StreamTag::kAdversary), i));
  std::normal_distribution<double> normal;
  const double mu = model.mu()[i];
  const double sigma = model.sigma()[i];
  double hits = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const int y = label != 0 ? label : ((rng() >> 63) ? 1 : -1);
    const double x = y * mu + sigma * normal(rng);
    if (rng.uniform() >= erasure_keep_prob(x, y, mu, sigma)) hits += 1.0;
  }
  return bernoulli_estimate(hits, hits, trials);
}

double erased_log_density(std::span<const double> z_a, const AdvConfig& cfg,
                          std::span<const double> alpha) {
  const auto& coords = cfg.coords();
  require(z_a.size() == coords.size() && alpha.size() == coords.size(),
          ErrorCode::kDimensionMismatch, "erased_density: |z_A| and |alpha| must equal |A|");
  double total = 0.0;
  for (std::size_t m = 0; m < coords.size(); ++m) {
    require(alpha[m] >= 0.0 && alpha[m] <= 1.0, ErrorCode::kInvalidArgument,
            "alpha must lie in [0, 1]");
    const double mu = std::abs(cfg.model().mu()[coords[m]]);
    const double sigma = cfg.model().sigma()[coords[m]];
    const double lg = log_gaussian(std::abs(z_a[m]) + mu, 0.0, sigma);
    if (std::abs(z_a[m]) <= 1.0 && alpha[m] > 0.0) {
      total += std::log(std::exp(lg) + 0.5 * alpha[m]);
    } else {
      total += lg;
    }
  }
  return total;
}

double erased_density(std::span<const double> z_a, const AdvConfig& cfg,
                      std::span<const double> alpha) {
  return std::exp(erased_log_density(z_a, cfg, alpha));
}

McEstimate map_error_lower_mc(const AdvConfig& cfg, std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  const auto& model = cfg.model();
  const std::size_t d = model.dim();
  const auto alpha = exact_alphas(cfg);
  GmmSampler sampler(model, seed);
  const std::uint64_t adv_seed = tagged_seed(seed, StreamTag::kAdversary);

  std::vector<double> x(d), z_a(cfg.coords().size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    sampler.draw_given(t, 1, x);
    const auto pr = perturb(x, 1, cfg, mix_seed(adv_seed, t));
    for (std::size_t m = 0; m < z_a.size(); ++m) z_a[m] = pr.x[cfg.coords()[m]];
    const double shared = erased_log_density(z_a, cfg, alpha);
    double log_pos = shared, log_neg = shared;
    for (std::size_t i = 0; i < d; ++i) {
      if (cfg.in_set(i)) continue;
      log_pos += log_gaussian(pr.x[i], model.mu()[i], model.sigma()[i]);
      log_neg += log_gaussian(pr.x[i], -model.mu()[i], model.sigma()[i]);
    }
    const double loss = log_neg > log_pos ? 1.0 : (log_neg == log_pos ? 0.5 : 0.0);
    sum += loss;
    sum_sq += loss * loss;
  }
  return bernoulli_estimate(sum, sum_sq, trials);
}

McEstimate adversary_error_mc(const AdvConfig& cfg,
                              const std::function<int(std::span<const double>)>& predict,
                              std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  GmmSampler sampler(cfg.model(), seed);
  const std::uint64_t adv_seed = tagged_seed(seed, StreamTag::kAdversary);
  std::vector<double> x(cfg.model().dim());
  double errors = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const int y = sampler.draw(t, x);
    const auto pr = perturb(x, y, cfg, mix_seed(adv_seed, t));
    if (predict(pr.x) != y) errors += 1.0;
  }
  return bernoulli_estimate(errors, errors, trials);
}

AdversaryStats adversary_soundness(const AdvConfig& cfg, std::size_t trials, std::uint64_t seed) {
  const std::size_t d = cfg.model().dim();
  GmmSampler sampler(cfg.model(), seed);
  const std::uint64_t adv_seed = tagged_seed(seed, StreamTag::kAdversary);
  AdversaryStats s;
  s.trials = trials;
  s.changed_per_coord.assign(d, 0);
  std::vector<double> x(d);
  for (std::size_t t = 0; t < trials; ++t) {
    const int y = sampler.draw(t, x);
    const auto pr = perturb(x, y, cfg, mix_seed(adv_seed, t));
    std::size_t changed = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (pr.x[i] == x[i]) continue;
      ++changed;
      ++s.changed_per_coord[i];
      if (!cfg.in_set(i)) ++s.complement_violations;
    }
    s.max_changed = std::max(s.max_changed, changed);
    if (static_cast<double>(changed) > cfg.budget()) ++s.budget_violations;
    if (pr.fell_back) ++s.fallbacks;
  }
  return s;
}

}  // namespace l0trunc
