#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "classifier.hpp"
#include "dataset.hpp"
#include "network.hpp"

namespace l0trunc {

/// Clean samples followed by the current adversarial set, without copying either.
class SamplePool {
 public:
  SamplePool(const LabeledDataset& clean, const LabeledDataset* adv) : clean_(&clean), adv_(adv) {}

  std::size_t size() const { return clean_->size() + (adv_ ? adv_->size() : 0); }
  std::size_t dim() const { return clean_->dim(); }
  bool is_clean(std::size_t i) const { return i < clean_->size(); }
  std::span<const double> features(std::size_t i) const {
    return is_clean(i) ? clean_->features(i) : adv_->features(i - clean_->size());
  }
  int label(std::size_t i) const {
    return is_clean(i) ? clean_->label(i) : adv_->label(i - clean_->size());
  }

 private:
  const LabeledDataset* clean_;
  const LabeledDataset* adv_;
};

class TrainableModel : public Classifier {
 public:
  /// One SGD step on pool[batch]. Reports per-sample loss and prediction as
  /// seen before the update.
  virtual BatchOutput train_batch(const SamplePool& pool, std::span<const std::size_t> batch,
                                  const TrainConfig& cfg, std::size_t epoch) = 0;
};

/// Trains a FeedForwardNet in place; momentum state lives here.
class NetTrainer final : public TrainableModel {
 public:
  explicit NetTrainer(FeedForwardNet& net);

  std::size_t input_dim() const override { return net_->input_dim(); }
  Evaluation evaluate(std::span<const double> x, int label) const override {
    return view_.evaluate(x, label);
  }
  BatchOutput train_batch(const SamplePool& pool, std::span<const std::size_t> batch,
                          const TrainConfig& cfg, std::size_t epoch) override;

 private:
  FeedForwardNet* net_;
  NetClassifier view_;
  Gradients grads_;
  Gradients velocity_;
  Matrix inputs_;
  std::vector<int> labels_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double clean_loss = 0.0;  // running mean over clean samples seen this epoch
  double clean_acc = 0.0;
  std::size_t adv_set_size = 0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  void write_csv(const std::string& path) const;
};

/// At epochs 0, R, 2R, ... the adversarial set is discarded and regenerated
/// against the current model with sparse random search; every epoch trains on
/// shuffled minibatches of the pooled clean and adversarial samples. Without a
/// budget this is plain minibatch training.
TrainHistory adversarial_train(TrainableModel& model, const LabeledDataset& train,
                               const std::optional<AttackBudget>& budget, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace l0trunc
