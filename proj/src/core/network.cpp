#include "network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace l0trunc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

constexpr char kModelMagic[4] = {'L', '0', 'T', 'N'};
constexpr std::uint32_t kModelVersion = 1;

struct ForwardCache {
  std::vector<Matrix> pre;  // pre-activations per layer, n x d_out
  std::vector<Matrix> act;  // ReLU outputs of hidden layers
  std::vector<std::uint32_t> dropped;  // n x d_1 x 2k, ascending per row
};

void check_inputs(const FeedForwardNet& net, const Matrix& inputs) {
  require(net.num_layers() >= 1, ErrorCode::kInvalidArgument, "network has no layers");
  require(static_cast<std::size_t>(inputs.cols()) == net.input_dim(),
          ErrorCode::kDimensionMismatch,
          "input has " + std::to_string(inputs.cols()) + " features, network expects " +
              std::to_string(net.input_dim()));
  require(inputs.allFinite(), ErrorCode::kNonFinite, "non-finite network input");
}

void run_forward(const FeedForwardNet& net, const Matrix& inputs, ForwardCache& cache,
                 bool keep_masks) {
  const auto& layers = net.layers();
  const std::size_t n = static_cast<std::size_t>(inputs.rows());
  const std::size_t k = net.truncation().k;
  const std::size_t L = layers.size();
  cache.pre.resize(L);
  cache.act.resize(L - 1);

  const DenseLayer& first = layers[0];
  Matrix& z0 = cache.pre[0];
  if (k == 0) {
    z0.noalias() = inputs * first.weights.transpose();
    z0.rowwise() += first.bias.transpose();
  } else {
    thread_local TruncationKernel kernel;
    const std::size_t d_in = net.input_dim();
    const std::size_t d_out = static_cast<std::size_t>(first.weights.rows());
    z0.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_out));
    if (keep_masks) cache.dropped.resize(n * d_out * 2 * k);
    for (std::size_t b = 0; b < n; ++b) {
      const double* x = inputs.row(static_cast<Eigen::Index>(b)).data();
      for (std::size_t i = 0; i < d_out; ++i) {
        std::uint32_t* dr = keep_masks ? cache.dropped.data() + (b * d_out + i) * 2 * k : nullptr;
        z0(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) =
            kernel.dot(first.weights.row(static_cast<Eigen::Index>(i)).data(), x, d_in, k, dr) +
            first.bias[static_cast<Eigen::Index>(i)];
      }
    }
  }
  for (std::size_t l = 1; l < L; ++l) {
    cache.act[l - 1] = cache.pre[l - 1].cwiseMax(0.0);
    cache.pre[l].noalias() = cache.act[l - 1] * layers[l].weights.transpose();
    cache.pre[l].rowwise() += layers[l].bias.transpose();
  }
}

double log_sum_exp(const double* z, std::size_t m) {
  const double top = *std::max_element(z, z + m);
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += std::exp(z[j] - top);
  return top + std::log(s);
}

int argmax(const double* z, std::size_t m) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < m; ++j) {
    if (z[j] > z[best]) best = j;
  }
  return static_cast<int>(best);
}

Matrix row_matrix(std::span<const double> x) {
  Matrix m(1, static_cast<Eigen::Index>(x.size()));
  std::copy(x.begin(), x.end(), m.data());
  return m;
}

// Shared backward pass. `grads` and `input_grad` are optional outputs.
BatchOutput backprop(const FeedForwardNet& net, const Matrix& inputs, std::span<const int> labels,
                     Gradients* grads, Matrix* input_grad) {
  check_inputs(net, inputs);
  const std::size_t n = static_cast<std::size_t>(inputs.rows());
  require(n >= 1, ErrorCode::kInvalidArgument, "backward needs a non-empty batch");
  require(labels.size() == n, ErrorCode::kDimensionMismatch, "label count differs from batch size");
  const std::size_t M = net.num_classes();
  for (int y : labels) {
    require(y >= 0 && static_cast<std::size_t>(y) < M, ErrorCode::kInvalidArgument,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(M) + ")");
  }

  ForwardCache cache;
  run_forward(net, inputs, cache, true);
  const auto& layers = net.layers();
  const std::size_t L = layers.size();
  const std::size_t k = net.truncation().k;

  BatchOutput out;
  out.loss.resize(n);
  out.predicted.resize(n);
  Matrix delta = cache.pre[L - 1];
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    double* z = delta.row(static_cast<Eigen::Index>(b)).data();
    const double lse = log_sum_exp(z, M);
    const int y = labels[b];
    out.loss[b] = lse - z[y];
    out.predicted[b] = argmax(z, M);
    total += out.loss[b];
    for (std::size_t j = 0; j < M; ++j) z[j] = std::exp(z[j] - lse) * inv_n;
    z[y] -= inv_n;
  }
  out.mean_loss = total * inv_n;
  if (grads == nullptr && input_grad == nullptr) return out;

  for (std::size_t l = L; l-- > 0;) {
    const Matrix& a_in = l == 0 ? inputs : cache.act[l - 1];
    if (grads != nullptr) {
      grads->bias[l] = delta.colwise().sum().transpose();
      if (l > 0 || k == 0) {
        grads->weights[l].noalias() = delta.transpose() * a_in;
      } else {
        Matrix& g = grads->weights[0];
        g.setZero();
        const std::size_t d_in = net.input_dim();
        const std::size_t d_out = static_cast<std::size_t>(g.rows());
        for (std::size_t b = 0; b < n; ++b) {
          const double* x = inputs.row(static_cast<Eigen::Index>(b)).data();
          for (std::size_t i = 0; i < d_out; ++i) {
            const double dl = delta(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i));
            if (dl == 0.0) continue;
            double* gi = g.row(static_cast<Eigen::Index>(i)).data();
            const std::uint32_t* dr = cache.dropped.data() + (b * d_out + i) * 2 * k;
            std::size_t j = 0;
            for (std::size_t m = 0; m < 2 * k; ++m) {
              for (; j < dr[m]; ++j) gi[j] += dl * x[j];
              j = dr[m] + 1;
            }
            for (; j < d_in; ++j) gi[j] += dl * x[j];
          }
        }
      }
    }
    if (l > 0) {
      Matrix prev = delta * layers[l].weights;
      delta = prev.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }

  if (input_grad != nullptr) {
    const Matrix& w = layers[0].weights;
    if (k == 0) {
      *input_grad = delta * w;
    } else {
      const std::size_t d_in = net.input_dim();
      const std::size_t d_out = static_cast<std::size_t>(w.rows());
      input_grad->setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_in));
      for (std::size_t b = 0; b < n; ++b) {
        double* gx = input_grad->row(static_cast<Eigen::Index>(b)).data();
        for (std::size_t i = 0; i < d_out; ++i) {
          const double dl = delta(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i));
          if (dl == 0.0) continue;
          const double* wi = w.row(static_cast<Eigen::Index>(i)).data();
          const std::uint32_t* dr = cache.dropped.data() + (b * d_out + i) * 2 * k;
          std::size_t j = 0;
          for (std::size_t m = 0; m < 2 * k; ++m) {
            for (; j < dr[m]; ++j) gx[j] += dl * wi[j];
            j = dr[m] + 1;
          }
          for (; j < d_in; ++j) gx[j] += dl * wi[j];
        }
      }
    }
  }
  return out;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

FeedForwardNet::FeedForwardNet(const std::vector<std::size_t>& dims, TruncationParam k) : k_(k) {
  require(dims.size() >= 2, ErrorCode::kInvalidArgument,
          "network needs an input width and at least one layer");
  for (std::size_t w : dims) {
    require(w >= 1, ErrorCode::kInvalidArgument, "layer widths must be >= 1");
  }
  check_truncation(dims[0], k);
  layers_.resize(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    layers_[l].weights = Matrix::Zero(static_cast<Eigen::Index>(dims[l + 1]),
                                      static_cast<Eigen::Index>(dims[l]));
    layers_[l].bias = Vector::Zero(static_cast<Eigen::Index>(dims[l + 1]));
  }
}

FeedForwardNet FeedForwardNet::create(const std::vector<std::size_t>& dims, TruncationParam k,
                                      std::uint64_t seed) {
  FeedForwardNet net(dims, k);
  const std::uint64_t base = tagged_seed(seed, StreamTag::kInit);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    Matrix& w = net.layers_[l].weights;
    const double r = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    SplitMix64 rng = stream_rng(base, l);
    std::uniform_real_distribution<double> unif(-r, r);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unif(rng);
  }
  return net;
}

std::size_t FeedForwardNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
}

std::size_t FeedForwardNet::num_classes() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weights.rows());
}

std::vector<std::size_t> FeedForwardNet::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& layer : layers_) d.push_back(static_cast<std::size_t>(layer.weights.rows()));
  return d;
}

std::size_t FeedForwardNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

void FeedForwardNet::set_truncation(TruncationParam k) {
  check_truncation(input_dim(), k);
  k_ = k;
}

Matrix FeedForwardNet::logits_batch(const Matrix& inputs) const {
  check_inputs(*this, inputs);
  ForwardCache cache;
  run_forward(*this, inputs, cache, false);
  return std::move(cache.pre.back());
}

Vector FeedForwardNet::logits(std::span<const double> x) const {
  require(x.size() == input_dim(), ErrorCode::kDimensionMismatch,
          "input has " + std::to_string(x.size()) + " features, network expects " +
              std::to_string(input_dim()));
  const Matrix z = logits_batch(row_matrix(x));
  return z.row(0).transpose();
}

std::vector<double> FeedForwardNet::forward(std::span<const double> x) const {
  const Vector z = logits(x);
  const double lse = log_sum_exp(z.data(), static_cast<std::size_t>(z.size()));
  std::vector<double> p(static_cast<std::size_t>(z.size()));
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::exp(z[static_cast<Eigen::Index>(j)] - lse);
  return p;
}

int FeedForwardNet::predict(std::span<const double> x) const {
  const Vector z = logits(x);
  return argmax(z.data(), static_cast<std::size_t>(z.size()));
}

void FeedForwardNet::save(const std::string& path) const {
  require(!layers_.empty(), ErrorCode::kInvalidArgument, "cannot save an empty network");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write file: " + path);
  out.write(kModelMagic, 4);
  write_pod(out, kModelVersion);
  write_pod(out, static_cast<std::uint32_t>(layers_.size()));
  for (std::size_t d : dims()) write_pod(out, static_cast<std::uint64_t>(d));
  write_pod(out, static_cast<std::uint64_t>(k_.k));
  for (const auto& layer : layers_) {
    out.write(reinterpret_cast<const char*>(layer.weights.data()),
              static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(layer.bias.data()),
              static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
  }
  require(out.good(), ErrorCode::kIo, "failed writing " + path);
}

FeedForwardNet FeedForwardNet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open model file: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kModelMagic, 4) == 0, ErrorCode::kFormat,
          "not a model file (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in);
  require(version == kModelVersion, ErrorCode::kFormat,
          "unsupported model version " + std::to_string(version) + " in " + path);
  const auto count = read_pod<std::uint32_t>(in);
  require(in.good() && count >= 1 && count < 1024, ErrorCode::kFormat,
          "implausible layer count in " + path);
  std::vector<std::size_t> dims(count + 1);
  for (auto& d : dims) {
    const auto v = read_pod<std::uint64_t>(in);
    require(v >= 1 && v < (1ULL << 24), ErrorCode::kFormat, "implausible layer width in " + path);
    d = static_cast<std::size_t>(v);
  }
  const auto k = read_pod<std::uint64_t>(in);
  require(in.good(), ErrorCode::kFormat, "truncated model header: " + path);
  FeedForwardNet net(dims, TruncationParam(static_cast<std::size_t>(k)));
  for (auto& layer : net.layers_) {
    in.read(reinterpret_cast<char*>(layer.weights.data()),
            static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(layer.bias.data()),
            static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
  }
  require(in.good(), ErrorCode::kFormat, "truncated model parameters: " + path);
  return net;
}

std::vector<std::size_t> preset_dims(std::string_view name) {
  if (name == "reference") return {784, 1568, 3136, 500, 100, 10};
  if (name == "reduced") return {784, 256, 128, 10};
  fail(ErrorCode::kInvalidArgument,
       "unknown preset '" + std::string(name) + "' (expected reference or reduced)");
}

Gradients Gradients::zeros_like(const FeedForwardNet& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    g.bias.push_back(Vector::Zero(layer.bias.size()));
  }
  return g;
}

void Gradients::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : bias) b.setZero();
}

BatchOutput backward(const FeedForwardNet& net, const Matrix& inputs, std::span<const int> labels,
                     Gradients& grads) {
  require(grads.weights.size() == net.num_layers(), ErrorCode::kDimensionMismatch,
          "gradient structure does not match the network");
  return backprop(net, inputs, labels, &grads, nullptr);
}

double cross_entropy(const FeedForwardNet& net, std::span<const double> x, int label) {
  const int labels[1] = {label};
  return backprop(net, row_matrix(x), labels, nullptr, nullptr).mean_loss;
}

std::vector<double> input_gradient(const FeedForwardNet& net, std::span<const double> x,
                                   int label) {
  const int labels[1] = {label};
  Matrix g;
  backprop(net, row_matrix(x), labels, nullptr, &g);
  return {g.data(), g.data() + g.size()};
}

void TrainConfig::validate() const {
  require(batch >= 1, ErrorCode::kInvalidArgument, "batch size must be >= 1");
  require(epochs >= 1, ErrorCode::kInvalidArgument, "epoch count must be >= 1");
  require(!lr_schedule.empty(), ErrorCode::kInvalidArgument, "learning-rate schedule is empty");
  for (double lr : lr_schedule) {
    require(std::isfinite(lr) && lr > 0.0, ErrorCode::kInvalidArgument,
            "learning rates must be positive");
  }
  require(lr_period >= 1, ErrorCode::kInvalidArgument, "learning-rate period must be >= 1");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument,
          "momentum must lie in [0, 1)");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, ErrorCode::kInvalidArgument,
          "weight decay must be >= 0");
  require(regen_period >= 1, ErrorCode::kInvalidArgument, "regeneration period must be >= 1");
  require(jobs >= 1, ErrorCode::kInvalidArgument, "jobs must be >= 1");
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  const std::size_t slot = std::min(epoch / cfg.lr_period, cfg.lr_schedule.size() - 1);
  return cfg.lr_schedule[slot];
}

void sgd_step(FeedForwardNet& net, const Gradients& grads, Gradients& velocity,
              const TrainConfig& cfg, std::size_t epoch) {
  require(grads.weights.size() == net.num_layers() && velocity.weights.size() == net.num_layers(),
          ErrorCode::kDimensionMismatch, "gradient structure does not match the network");
  const double lr = learning_rate(cfg, epoch);
  const double m = cfg.momentum;
  const double wd = cfg.weight_decay;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    DenseLayer& layer = net.layers()[l];
    require(grads.weights[l].rows() == layer.weights.rows() &&
                grads.weights[l].cols() == layer.weights.cols() &&
                grads.bias[l].size() == layer.bias.size(),
            ErrorCode::kDimensionMismatch, "gradient shape mismatch at layer " + std::to_string(l));
    velocity.weights[l] = m * velocity.weights[l] - lr * (grads.weights[l] + wd * layer.weights);
    velocity.bias[l] = m * velocity.bias[l] - lr * (grads.bias[l] + wd * layer.bias);
    layer.weights += velocity.weights[l];
    layer.bias += velocity.bias[l];
  }
}

GradCheckResult gradient_check(const FeedForwardNet& net, const Matrix& inputs,
                               std::span<const int> labels, double h) {
  require(h > 0.0, ErrorCode::kInvalidArgument, "step must be positive");
  Gradients g = Gradients::zeros_like(net);
  backward(net, inputs, labels, g);

  FeedForwardNet probe = net;
  auto mean_loss = [&]() { return backprop(probe, inputs, labels, nullptr, nullptr).mean_loss; };
  const std::size_t k = net.truncation().k;
  const std::size_t n = static_cast<std::size_t>(inputs.rows());
  const std::size_t d_in = net.input_dim();
  TruncationKernel kernel;
  std::vector<double> u(d_in);
  std::vector<std::uint32_t> base(2 * k), moved(2 * k);

  // True when nudging W_1[i][j] leaves row i's dropped set unchanged for every sample.
  auto mask_stable = [&](std::size_t i, std::size_t j) {
    if (k == 0) return true;
    const Matrix& w = net.layers()[0].weights;
    for (std::size_t b = 0; b < n; ++b) {
      const double* x = inputs.row(static_cast<Eigen::Index>(b)).data();
      for (std::size_t c = 0; c < d_in; ++c) {
        u[c] = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) * x[c];
      }
      kernel.select_dropped(u.data(), d_in, k, base.data());
      for (double s : {h, -h}) {
        const double saved = u[j];
        u[j] = (w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + s) * x[j];
        kernel.select_dropped(u.data(), d_in, k, moved.data());
        u[j] = saved;
        if (moved != base) return false;
      }
    }
    return true;
  };

  GradCheckResult result;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = mean_loss();
    param = saved - h;
    const double down = mean_loss();
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / scale);
    ++result.checked;
  };

  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    DenseLayer& layer = probe.layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        if (l == 0 && !mask_stable(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
          ++result.skipped;
          continue;
        }
        check(layer.weights(i, j), g.weights[l](i, j));
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias[i], g.bias[l][i]);
  }
  return result;
}

}  // namespace l0trunc
