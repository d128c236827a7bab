#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linalg.hpp"
#include "truncation.hpp"

namespace l0trunc {

struct DenseLayer {
  Matrix weights;  // d_out x d_in
  Vector bias;     // d_out
};

/// Fully connected ReLU network with softmax output. When k > 0 the first
/// layer computes <W_1[i], x>_k + b_1[i]; every other layer is a plain affine map.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  /// Zero-initialized network with the given layer widths (input first).
  FeedForwardNet(const std::vector<std::size_t>& dims, TruncationParam k);

  /// Glorot-uniform weights in +-sqrt(6 / (d_in + d_out)), zero biases.
  static FeedForwardNet create(const std::vector<std::size_t>& dims, TruncationParam k,
                               std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t num_classes() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;

  TruncationParam truncation() const { return k_; }
  void set_truncation(TruncationParam k);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vector logits(std::span<const double> x) const;
  /// Softmax probabilities.
  std::vector<double> forward(std::span<const double> x) const;
  /// Argmax of the logits, ties to the lowest class index.
  int predict(std::span<const double> x) const;

  /// Logits for every row of `inputs` (n x d_0).
  Matrix logits_batch(const Matrix& inputs) const;

  void save(const std::string& path) const;
  static FeedForwardNet load(const std::string& path);

 private:
  std::vector<DenseLayer> layers_;
  TruncationParam k_;
};

/// "reference" (784-1568-3136-500-100-10) or "reduced" (784-256-128-10).
std::vector<std::size_t> preset_dims(std::string_view name);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;

  static Gradients zeros_like(const FeedForwardNet& net);
  void set_zero();
};

struct BatchOutput {
  double mean_loss = 0.0;
  std::vector<double> loss;   // per-sample cross-entropy
  std::vector<int> predicted;
};

/// Mean cross-entropy over the rows of `inputs` and its gradient. On the
/// truncated layer the gradient flows only through surviving coordinates.
BatchOutput backward(const FeedForwardNet& net, const Matrix& inputs, std::span<const int> labels,
                     Gradients& grads);

/// Cross-entropy of one sample, computed from log-softmax.
double cross_entropy(const FeedForwardNet& net, std::span<const double> x, int label);

/// d loss / d x for one sample; dropped first-layer coordinates get no gradient.
std::vector<double> input_gradient(const FeedForwardNet& net, std::span<const double> x, int label);

struct TrainConfig {
  std::size_t batch = 256;
  std::size_t epochs = 20;
  std::vector<double> lr_schedule{0.001};
  std::size_t lr_period = 25;  // epochs per schedule entry
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t regen_period = 5;
  std::size_t regen_subset = 0;  // 0 attacks the full training set
  std::size_t jobs = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

double learning_rate(const TrainConfig& cfg, std::size_t epoch);

/// v <- m v - lr (g + wd theta); theta <- theta + v.
void sgd_step(FeedForwardNet& net, const Gradients& grads, Gradients& velocity,
              const TrainConfig& cfg, std::size_t epoch);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // first-layer weights whose perturbation moves a survivor mask
};

/// Central-difference check of backward() over every parameter.
GradCheckResult gradient_check(const FeedForwardNet& net, const Matrix& inputs,
                               std::span<const int> labels, double h = 1e-5);

}  // namespace l0trunc
