#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace l0trunc {

class GaussianMixture;

/// Dense row-major feature matrix with integer labels. Features live in
/// [-a, a] for image data; Gaussian-mixture data uses labels -1/+1 and is not
/// range-bounded.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::size_t dim, double half_range, std::string provenance = {});

  void add(std::span<const double> x, int label);
  void reserve(std::size_t n);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return labels_.empty(); }
  double half_range() const { return half_range_; }
  const std::string& provenance() const { return provenance_; }

  std::span<const double> features(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<double>& feature_data() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  LabeledDataset subset(std::span<const std::size_t> indices) const;
  LabeledDataset head(std::size_t n) const;

 private:
  std::size_t dim_ = 0;
  double half_range_ = 1.0;
  std::string provenance_;
  std::vector<double> features_;
  std::vector<int> labels_;
};

/// v -> a * (v / 127.5 - 1); 0 maps to -a and 255 to a exactly.
std::vector<double> normalize_pixels(std::span<const std::uint8_t> raw, double half_range);

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

/// Disjoint, seed-deterministic, label-stratified split. Fractions sum to 1.
DatasetSplit split(const LabeledDataset& data, std::array<double, 3> fractions,
                   std::uint64_t seed);

struct MnistData {
  LabeledDataset train;
  LabeledDataset test;
};

/// Loads the canonical 60k/10k IDX files from `dir`.
MnistData load_mnist(const std::string& dir, double half_range = 1.0);

/// Synthetic persistence: little-endian header (u64 d, u64 n) followed by n
/// records of d doubles and one signed label byte. A text sidecar
/// `<path>.meta` records mu, sigma and the seed.
void save_synthetic(const std::string& path, const LabeledDataset& data,
                    const GaussianMixture& model, std::uint64_t seed);
LabeledDataset load_synthetic(const std::string& path);

struct SyntheticMeta {
  std::vector<double> mu;
  std::vector<double> sigma;
  std::uint64_t seed = 0;
};
SyntheticMeta load_synthetic_meta(const std::string& path);

/// Features then label, one row per sample.
void write_csv(const std::string& path, const LabeledDataset& data);

}  // namespace l0trunc
