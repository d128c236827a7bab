#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gmm.hpp"

namespace l0trunc {

/// Randomized erasure adversary restricted to coordinate set A, with budget
/// k(A) = ||nu_A||_1 log d.
class AdvConfig {
 public:
  AdvConfig(GaussianMixture model, std::vector<std::size_t> coords);

  const GaussianMixture& model() const { return model_; }
  const std::vector<std::size_t>& coords() const { return coords_; }
  bool in_set(std::size_t i) const { return in_set_[i] != 0; }
  double budget() const { return budget_; }

 private:
  GaussianMixture model_;
  std::vector<std::size_t> coords_;
  std::vector<char> in_set_;
  double budget_ = 0.0;
};

/// Probability of keeping x_i. The kept mass equals
/// min(f(x_i | y), f(x_i | -y)), which makes the surviving density the same
/// for both labels: exp(-2 y mu_i x_i / sigma_i^2) clipped at 1.
double erasure_keep_prob(double x_i, int y, double mu_i, double sigma_i);

struct PerturbResult {
  std::vector<double> x;
  std::size_t erased = 0;      // sum of I_i over A
  bool fell_back = false;      // erased > k(A), so x was returned unchanged
  std::size_t changed = 0;     // ||x' - x||_0
};

PerturbResult perturb(std::span<const double> x, int y, const AdvConfig& cfg, std::uint64_t seed);

/// min(sqrt(2/pi) |nu_i|, 1).
double change_prob_bound(double nu_i);

/// Erf(|nu_i| / sqrt(2)), the exact erasure probability under the keep rule above.
double change_prob_exact(double nu_i);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

/// Monte-Carlo estimate of P(I_i = 1). `label` 0 draws y uniformly, +-1 conditions on it.
McEstimate change_prob_mc(const GaussianMixture& model, std::size_t i, std::size_t trials,
                          std::uint64_t seed, int label = 0);

/// prod_{i in A} [ N(|z_i| + |mu_i|; 0, sigma_i^2) + alpha_i/2 * 1{|z_i| <= 1} ].
/// `z_a` and `alpha` are indexed like cfg.coords().
double erased_density(std::span<const double> z_a, const AdvConfig& cfg,
                      std::span<const double> alpha);
double erased_log_density(std::span<const double> z_a, const AdvConfig& cfg,
                          std::span<const double> alpha);

/// Monte-Carlo estimate of the MAP error (1/2) P(tie) + P(f(x'|-1) > f(x'|1) | y=1)
/// against Adv(A), with exact class-conditional densities.
McEstimate map_error_lower_mc(const AdvConfig& cfg, std::size_t trials, std::uint64_t seed);

/// Error rate of `predict` (returns -1, 0 or +1) on x' = Adv(A)(x, y).
McEstimate adversary_error_mc(const AdvConfig& cfg,
                              const std::function<int(std::span<const double>)>& predict,
                              std::size_t trials, std::uint64_t seed);

struct AdversaryStats {
  std::size_t trials = 0;
  std::size_t max_changed = 0;
  std::size_t fallbacks = 0;
  std::vector<std::size_t> changed_per_coord;
  std::size_t budget_violations = 0;
  std::size_t complement_violations = 0;  // coordinates outside A that moved
};

/// Runs perturb on fresh samples and tallies the soundness invariants.
AdversaryStats adversary_soundness(const AdvConfig& cfg, std::size_t trials, std::uint64_t seed);

}  // namespace l0trunc
