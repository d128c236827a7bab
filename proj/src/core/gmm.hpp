#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dataset.hpp"

namespace l0trunc {

/// x = y * mu + z with y uniform on {-1, +1} and z ~ N(0, diag(sigma^2)).
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> mu, std::vector<double> sigma);

  std::size_t dim() const { return mu_.size(); }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& sigma() const { return sigma_; }

  /// ||Sigma^{-1/2} mu||_2 == 1 within 1e-12.
  bool normalized() const;

 private:
  std::vector<double> mu_;
  std::vector<double> sigma_;
};

/// nu_i = mu_i / sigma_i, plus the permutation ordering |nu| descending
/// (ties by ascending index).
class SnrVector {
 public:
  explicit SnrVector(std::vector<double> nu);

  std::size_t size() const { return nu_.size(); }
  const std::vector<double>& values() const { return nu_; }
  const std::vector<std::size_t>& order() const { return order_; }
  /// |nu| sorted descending.
  const std::vector<double>& sorted_abs() const { return sorted_abs_; }
  double norm2() const;

 private:
  std::vector<double> nu_;
  std::vector<std::size_t> order_;
  std::vector<double> sorted_abs_;
};

struct LabeledSample {
  std::vector<double> x;
  int y = 1;
};

/// Counter-based sampler: draw(i) depends only on (model, seed, i).
class GmmSampler {
 public:
  GmmSampler(const GaussianMixture& model, std::uint64_t seed);

  int draw(std::uint64_t index, std::span<double> x) const;
  /// Draw conditioned on the label.
  void draw_given(std::uint64_t index, int y, std::span<double> x) const;

 private:
  const GaussianMixture* model_;
  std::uint64_t seed_;
};

std::vector<LabeledSample> sample(const GaussianMixture& model, std::size_t n, std::uint64_t seed);
LabeledDataset sample_dataset(const GaussianMixture& model, std::size_t n, std::uint64_t seed);

SnrVector snr_vector(const GaussianMixture& model);

/// Rescales mu so that ||nu||_2 = 1; sigma is left unchanged.
GaussianMixture normalize(const GaussianMixture& model);

/// Sigma^{-1} mu.
std::vector<double> bayes_weights(const GaussianMixture& model);

/// Phi_bar(||nu||_2), the error of the Bayes classifier without an adversary.
double standard_error(const GaussianMixture& model);

}  // namespace l0trunc
