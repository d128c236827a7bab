#include "linear_model.hpp"

#include <cmath>

#include "error.hpp"

namespace l0trunc {

namespace {

int sign_of(double s) { return s > 0.0 ? 1 : (s < 0.0 ? -1 : 0); }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double truncated_score(const std::vector<double>& w, std::span<const double> x, std::size_t k) {
  require(x.size() == w.size(), ErrorCode::kDimensionMismatch,
          "input has " + std::to_string(x.size()) + " features, classifier expects " +
              std::to_string(w.size()));
  thread_local TruncationKernel kernel;
  return kernel.dot(w.data(), x.data(), w.size(), k);
}

void require_binary(int label) {
  require(label == 1 || label == -1, ErrorCode::kInvalidArgument,
          "linear classifier labels must be -1 or +1");
}

}  // namespace

TruncatedLinearClassifier::TruncatedLinearClassifier(std::vector<double> w, TruncationParam k)
    : w_(std::move(w)), k_(k) {
  check_truncation(w_.size(), k_);
  bool nonzero = false;
  for (double v : w_) {
    require(std::isfinite(v), ErrorCode::kNonFinite, "non-finite classifier weight");
    nonzero = nonzero || v != 0.0;
  }
  require(nonzero, ErrorCode::kInvalidArgument, "classifier weights must not all be zero");
}

double TruncatedLinearClassifier::score(std::span<const double> x) const {
  return truncated_score(w_, x, k_.k);
}

int TruncatedLinearClassifier::predict(std::span<const double> x) const {
  return sign_of(score(x));
}

Evaluation TruncatedLinearClassifier::evaluate(std::span<const double> x, int label) const {
  require_binary(label);
  const double s = score(x);
  return {sign_of(s), label * s};
}

LinearTrainer::LinearTrainer(std::size_t dim, TruncationParam k)
    : w_(dim, 0.0), velocity_(dim, 0.0), grad_(dim, 0.0), dropped_(2 * k.k), k_(k) {
  check_truncation(dim, k);
}

Evaluation LinearTrainer::evaluate(std::span<const double> x, int label) const {
  require_binary(label);
  const double s = truncated_score(w_, x, k_.k);
  return {sign_of(s), label * s};
}

BatchOutput LinearTrainer::train_batch(const SamplePool& pool, std::span<const std::size_t> batch,
                                       const TrainConfig& cfg, std::size_t epoch) {
  require(!batch.empty(), ErrorCode::kInvalidArgument, "empty batch");
  const std::size_t d = w_.size();
  const std::size_t k = k_.k;
  std::fill(grad_.begin(), grad_.end(), 0.0);
  TruncationKernel kernel;
  BatchOutput out;
  out.loss.resize(batch.size());
  out.predicted.resize(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto x = pool.features(batch[b]);
    const int y = pool.label(batch[b]);
    require_binary(y);
    const double s = kernel.dot(w_.data(), x.data(), d, k, dropped_.data());
    out.loss[b] = softplus(-y * s);
    out.predicted[b] = sign_of(s);
    total += out.loss[b];
    // d/ds log(1 + exp(-y s)) = -y / (1 + exp(y s))
    const double g = -y / (1.0 + std::exp(y * s)) * inv_n;
    std::size_t j = 0;
    for (std::size_t m = 0; m < 2 * k; ++m) {
      for (; j < dropped_[m]; ++j) grad_[j] += g * x[j];
      j = dropped_[m] + 1;
    }
    for (; j < d; ++j) grad_[j] += g * x[j];
  }
  out.mean_loss = total * inv_n;

  const double lr = learning_rate(cfg, epoch);
  for (std::size_t j = 0; j < d; ++j) {
    velocity_[j] = cfg.momentum * velocity_[j] - lr * (grad_[j] + cfg.weight_decay * w_[j]);
    w_[j] += velocity_[j];
  }
  return out;
}

TruncatedLinearClassifier fit_truncated_linear(const LabeledDataset& samples, TruncationParam k,
                                               const TrainConfig& cfg,
                                               const std::optional<AttackBudget>& budget,
                                               TrainHistory* history) {
  require(!samples.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  for (int y : samples.labels()) require_binary(y);
  LinearTrainer trainer(samples.dim(), k);
  TrainHistory h = adversarial_train(trainer, samples, budget, cfg);
  if (history != nullptr) *history = std::move(h);
  return trainer.classifier();
}

}  // namespace l0trunc
