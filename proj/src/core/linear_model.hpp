#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "adv_training.hpp"
#include "attacks.hpp"
#include "classifier.hpp"
#include "truncation.hpp"

namespace l0trunc {

/// x -> sgn(<w, x>_k) with labels -1/+1. A zero score predicts 0, which is
/// never a valid label, so ties always count as errors.
class TruncatedLinearClassifier final : public Classifier {
 public:
  TruncatedLinearClassifier(std::vector<double> w, TruncationParam k);

  const std::vector<double>& weights() const { return w_; }
  TruncationParam truncation() const { return k_; }

  double score(std::span<const double> x) const;
  int predict(std::span<const double> x) const;

  std::size_t input_dim() const override { return w_.size(); }
  Evaluation evaluate(std::span<const double> x, int label) const override;

 private:
  std::vector<double> w_;
  TruncationParam k_;
};

/// Logistic-loss SGD on the truncated score. Weights start at zero.
class LinearTrainer final : public TrainableModel {
 public:
  LinearTrainer(std::size_t dim, TruncationParam k);

  std::size_t input_dim() const override { return w_.size(); }
  Evaluation evaluate(std::span<const double> x, int label) const override;
  BatchOutput train_batch(const SamplePool& pool, std::span<const std::size_t> batch,
                          const TrainConfig& cfg, std::size_t epoch) override;

  const std::vector<double>& weights() const { return w_; }
  TruncatedLinearClassifier classifier() const { return {w_, k_}; }

 private:
  std::vector<double> w_;
  std::vector<double> velocity_;
  std::vector<double> grad_;
  std::vector<std::uint32_t> dropped_;
  TruncationParam k_;
};

/// Fits a truncated linear classifier on -1/+1 labels, optionally with
/// adversarial training under `budget`.
TruncatedLinearClassifier fit_truncated_linear(const LabeledDataset& samples, TruncationParam k,
                                               const TrainConfig& cfg,
                                               const std::optional<AttackBudget>& budget = {},
                                               TrainHistory* history = nullptr);

}  // namespace l0trunc
