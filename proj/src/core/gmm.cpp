#include "gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "error.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace l0trunc {

namespace {

double snr_norm(const std::vector<double>& mu, const std::vector<double>& sigma) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double r = mu[i] / sigma[i];
    s += r * r;
  }
  return std::sqrt(s);
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> mu, std::vector<double> sigma)
    : mu_(std::move(mu)), sigma_(std::move(sigma)) {
  require(!mu_.empty(), ErrorCode::kInvalidArgument, "gaussian mixture needs d >= 1");
  require(mu_.size() == sigma_.size(), ErrorCode::kDimensionMismatch,
          "mu and sigma dimensions differ (" + std::to_string(mu_.size()) + " vs " +
              std::to_string(sigma_.size()) + ")");
  for (std::size_t i = 0; i < mu_.size(); ++i) {
    require(std::isfinite(mu_[i]) && std::isfinite(sigma_[i]), ErrorCode::kNonFinite,
            "non-finite model parameter at coordinate " + std::to_string(i));
    require(sigma_[i] > 0.0, ErrorCode::kInvalidArgument,
            "sigma must be strictly positive (coordinate " + std::to_string(i) + ")");
  }
}

bool GaussianMixture::normalized() const {
  return std::abs(snr_norm(mu_, sigma_) - 1.0) <= 1e-12;
}

SnrVector::SnrVector(std::vector<double> nu) : nu_(std::move(nu)) {
  for (double v : nu_) require(std::isfinite(v), ErrorCode::kNonFinite, "non-finite SNR entry");
  order_.resize(nu_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
    return std::abs(nu_[a]) > std::abs(nu_[b]);
  });
  sorted_abs_.resize(nu_.size());
  for (std::size_t i = 0; i < nu_.size(); ++i) sorted_abs_[i] = std::abs(nu_[order_[i]]);
}

double SnrVector::norm2() const {
  double s = 0.0;
  for (double v : nu_) s += v * v;
  return std::sqrt(s);
}

GmmSampler::GmmSampler(const GaussianMixture& model, std::uint64_t seed)
    : model_(&model), seed_(tagged_seed(seed, StreamTag::kSampling)) {}

int GmmSampler::draw(std::uint64_t index, std::span<double> x) const {
  SplitMix64 rng = stream_rng(seed_, index);
  const int y = (rng() >> 63) ? 1 : -1;
  std::normal_distribution<double> normal;
  const auto& mu = model_->mu();
  const auto& sigma = model_->sigma();
  for (std::size_t i = 0; i < mu.size(); ++i) x[i] = y * mu[i] + sigma[i] * normal(rng);
  return y;
}

void GmmSampler::draw_given(std::uint64_t index, int y, std::span<double> x) const {
  SplitMix64 rng = stream_rng(seed_ ^ 0x5bd1e995u, index);
  std::normal_distribution<double> normal;
  const auto& mu = model_->mu();
  const auto& sigma = model_->sigma();
  for (std::size_t i = 0; i < mu.size(); ++i) x[i] = y * mu[i] + sigma[i] * normal(rng);
}

std::vector<LabeledSample> sample(const GaussianMixture& model, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  GmmSampler sampler(model, seed);
  std::vector<LabeledSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].x.resize(model.dim());
    out[i].y = sampler.draw(i, out[i].x);
  }
  return out;
}

LabeledDataset sample_dataset(const GaussianMixture& model, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  GmmSampler sampler(model, seed);
  LabeledDataset data(model.dim(), 1.0, "gmm");
  data.reserve(n);
  std::vector<double> x(model.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const int y = sampler.draw(i, x);
    data.add(x, y);
  }
  return data;
}

SnrVector snr_vector(const GaussianMixture& model) {
  std::vector<double> nu(model.dim());
  for (std::size_t i = 0; i < nu.size(); ++i) nu[i] = model.mu()[i] / model.sigma()[i];
  return SnrVector(std::move(nu));
}

GaussianMixture normalize(const GaussianMixture& model) {
  const double norm = snr_norm(model.mu(), model.sigma());
  require(norm > 0.0, ErrorCode::kInvalidArgument, "cannot normalize a zero mean vector");
  std::vector<double> mu = model.mu();
  for (double& m : mu) m /= norm;
  return GaussianMixture(std::move(mu), model.sigma());
}

std::vector<double> bayes_weights(const GaussianMixture& model) {
  std::vector<double> w(model.dim());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = model.mu()[i] / (model.sigma()[i] * model.sigma()[i]);
  }
  return w;
}

double standard_error(const GaussianMixture& model) {
  return phi_bar(snr_norm(model.mu(), model.sigma()));
}

}  // namespace l0trunc
