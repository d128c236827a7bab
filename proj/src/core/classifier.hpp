#pragma once

#include <cstddef>
#include <span>

#include "network.hpp"

namespace l0trunc {

struct Evaluation {
  int predicted = 0;
  /// Positive when the true label wins. For multiclass models this is
  /// logit_y - max_{j != y} logit_j; for sign classifiers it is y * score.
  double margin = 0.0;
};

/// Black-box classifier as seen by the attacks. Implementations must be safe
/// to call concurrently from several threads.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t input_dim() const = 0;
  virtual Evaluation evaluate(std::span<const double> x, int label) const = 0;

  bool misclassifies(std::span<const double> x, int label) const {
    return evaluate(x, label).predicted != label;
  }
};

class NetClassifier final : public Classifier {
 public:
  explicit NetClassifier(const FeedForwardNet& net) : net_(&net) {}

  std::size_t input_dim() const override { return net_->input_dim(); }
  Evaluation evaluate(std::span<const double> x, int label) const override;

 private:
  const FeedForwardNet* net_;
};

}  // namespace l0trunc
