#include "dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "error.hpp"
#include "gmm.hpp"
#include "idx.hpp"
#include "rng.hpp"

namespace l0trunc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "synthetic dataset I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_vector_line(std::ostream& out, const char* key, const std::vector<double>& v) {
  out << key << " =";
  out.precision(17);
  for (double x : v) out << ' ' << x;
  out << '\n';
}

std::vector<double> parse_doubles(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  return v;
}

}  // namespace

LabeledDataset::LabeledDataset(std::size_t dim, double half_range, std::string provenance)
    : dim_(dim), half_range_(half_range), provenance_(std::move(provenance)) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "dataset dimension must be >= 1");
  require(half_range > 0.0, ErrorCode::kInvalidArgument, "half range must be positive");
}

void LabeledDataset::add(std::span<const double> x, int label) {
  require(x.size() == dim_, ErrorCode::kDimensionMismatch,
          "sample has " + std::to_string(x.size()) + " features, dataset expects " +
              std::to_string(dim_));
  features_.insert(features_.end(), x.begin(), x.end());
  labels_.push_back(label);
}

void LabeledDataset::reserve(std::size_t n) {
  features_.reserve(n * dim_);
  labels_.reserve(n);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out(dim_, half_range_, provenance_);
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < size(), ErrorCode::kInvalidArgument, "subset index out of range");
    out.add(features(i), labels_[i]);
  }
  return out;
}

LabeledDataset LabeledDataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

std::vector<double> normalize_pixels(std::span<const std::uint8_t> raw, double half_range) {
  require(half_range > 0.0, ErrorCode::kInvalidArgument, "half range must be positive");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = half_range * (static_cast<double>(raw[i]) / 127.5 - 1.0);
  }
  return out;
}

DatasetSplit split(const LabeledDataset& data, std::array<double, 3> fractions,
                   std::uint64_t seed) {
  for (double f : fractions) {
    require(f >= 0.0 && f <= 1.0, ErrorCode::kInvalidArgument, "split fractions must be in [0,1]");
  }
  require(std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) < 1e-9,
          ErrorCode::kInvalidArgument, "split fractions must sum to 1");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.label(i)].push_back(i);

  std::vector<std::size_t> parts[3];
  SplitMix64 rng(tagged_seed(seed, StreamTag::kSplit));
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    // Cumulative rounding keeps every split within one sample of its share.
    const auto c1 = static_cast<std::size_t>(std::llround(n * fractions[0]));
    const auto c2 = static_cast<std::size_t>(std::llround(n * (fractions[0] + fractions[1])));
    const std::size_t cut1 = std::min(c1, idx.size());
    const std::size_t cut2 = std::min(std::max(c2, cut1), idx.size());
    parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut1));
    parts[1].insert(parts[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(cut1),
                    idx.begin() + static_cast<std::ptrdiff_t>(cut2));
    parts[2].insert(parts[2].end(), idx.begin() + static_cast<std::ptrdiff_t>(cut2), idx.end());
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return {data.subset(parts[0]), data.subset(parts[1]), data.subset(parts[2])};
}

namespace {

LabeledDataset assemble(const IdxTensor& images, const IdxTensor& labels, double half_range,
                        const std::string& provenance) {
  require(images.count() == labels.count(), ErrorCode::kFormat,
          "image/label count mismatch: " + std::to_string(images.count()) + " images, " +
              std::to_string(labels.count()) + " labels");
  const std::size_t d = images.item_size();
  LabeledDataset data(d, half_range, provenance);
  data.reserve(images.count());
  for (std::size_t i = 0; i < images.count(); ++i) {
    const auto px = normalize_pixels(
        std::span<const std::uint8_t>(images.data.data() + i * d, d), half_range);
    data.add(px, labels.data[i]);
  }
  return data;
}

}  // namespace

MnistData load_mnist(const std::string& dir, double half_range) {
  const std::string base = dir.empty() || dir.back() == '/' ? dir : dir + "/";
  MnistData out;
  out.train = assemble(load_idx_images(base + "train-images-idx3-ubyte"),
                       load_idx_labels(base + "train-labels-idx1-ubyte"), half_range,
                       "mnist-train");
  out.test = assemble(load_idx_images(base + "t10k-images-idx3-ubyte"),
                      load_idx_labels(base + "t10k-labels-idx1-ubyte"), half_range, "mnist-test");
  return out;
}

void save_synthetic(const std::string& path, const LabeledDataset& data,
                    const GaussianMixture& model, std::uint64_t seed) {
  require(data.dim() == model.dim(), ErrorCode::kDimensionMismatch,
          "dataset and model dimensions differ");
  {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::kIo, "cannot write file: " + path);
    write_u64(out, data.dim());
    write_u64(out, data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto x = data.features(i);
      out.write(reinterpret_cast<const char*>(x.data()),
                static_cast<std::streamsize>(x.size() * sizeof(double)));
      const auto label = static_cast<std::int8_t>(data.label(i));
      out.write(reinterpret_cast<const char*>(&label), 1);
    }
    require(out.good(), ErrorCode::kIo, "failed writing " + path);
  }
  std::ofstream meta(path + ".meta");
  require(meta.good(), ErrorCode::kIo, "cannot write file: " + path + ".meta");
  write_vector_line(meta, "mu", model.mu());
  write_vector_line(meta, "sigma", model.sigma());
  meta << "seed = " << seed << '\n';
}

LabeledDataset load_synthetic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open file: " + path);
  const std::uint64_t d = read_u64(in);
  const std::uint64_t n = read_u64(in);
  require(in.good(), ErrorCode::kFormat, "truncated synthetic dataset header: " + path);
  require(d >= 1 && d < (1ULL << 32) && n < (1ULL << 40), ErrorCode::kFormat,
          "implausible synthetic dataset dimensions in " + path);
  LabeledDataset data(d, 1.0, "synthetic");
  data.reserve(n);
  std::vector<double> x(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(d * sizeof(double)));
    std::int8_t label = 0;
    in.read(reinterpret_cast<char*>(&label), 1);
    require(in.good(), ErrorCode::kFormat, "truncated synthetic dataset: " + path);
    data.add(x, label);
  }
  return data;
}

SyntheticMeta load_synthetic_meta(const std::string& path) {
  std::ifstream in(path + ".meta");
  require(in.good(), ErrorCode::kIo, "cannot open file: " + path + ".meta");
  SyntheticMeta meta;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    const std::string value = line.substr(eq + 1);
    if (key == "mu") meta.mu = parse_doubles(value);
    else if (key == "sigma") meta.sigma = parse_doubles(value);
    else if (key == "seed") meta.seed = std::stoull(value);
  }
  return meta;
}

void write_csv(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write file: " + path);
  out.precision(17);
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features(i)) out << v << ',';
    out << data.label(i) << '\n';
  }
}

}  // namespace l0trunc
