#include "adv_training.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace l0trunc {

namespace {

constexpr std::uint64_t kRegenStream = 1ULL << 32;

}  // namespace

NetTrainer::NetTrainer(FeedForwardNet& net)
    : net_(&net),
      view_(net),
      grads_(Gradients::zeros_like(net)),
      velocity_(Gradients::zeros_like(net)) {}

BatchOutput NetTrainer::train_batch(const SamplePool& pool, std::span<const std::size_t> batch,
                                    const TrainConfig& cfg, std::size_t epoch) {
  const auto d = static_cast<Eigen::Index>(pool.dim());
  inputs_.resize(static_cast<Eigen::Index>(batch.size()), d);
  labels_.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto x = pool.features(batch[b]);
    std::copy(x.begin(), x.end(), inputs_.row(static_cast<Eigen::Index>(b)).data());
    labels_[b] = pool.label(batch[b]);
  }
  BatchOutput out = backward(*net_, inputs_, labels_, grads_);
  sgd_step(*net_, grads_, velocity_, cfg, epoch);
  return out;
}

void TrainHistory::write_csv(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write file: " + path);
  out.precision(10);
  out << "epoch,clean_loss,clean_acc,adv_set_size,lr\n";
  for (const auto& r : epochs) {
    out << r.epoch << ',' << r.clean_loss << ',' << r.clean_acc << ',' << r.adv_set_size << ','
        << r.lr << '\n';
  }
  require(out.good(), ErrorCode::kIo, "failed writing " + path);
}

TrainHistory adversarial_train(TrainableModel& model, const LabeledDataset& train,
                               const std::optional<AttackBudget>& budget, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  require(!train.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  require(train.dim() == model.input_dim(), ErrorCode::kDimensionMismatch,
          "training data dimension does not match the model");
  if (budget) {
    require(budget->k < train.dim(), ErrorCode::kInvalidArgument,
            "attack budget k must be below the input dimension");
    require(cfg.regen_period <= cfg.epochs, ErrorCode::kInvalidArgument,
            "regeneration period exceeds the epoch count");
  }

  const std::uint64_t shuffle_seed = tagged_seed(cfg.seed, StreamTag::kShuffle);
  const std::uint64_t attack_base = tagged_seed(cfg.seed, StreamTag::kAttack);
  LabeledDataset adv(train.dim(), train.half_range(), "adv");
  TrainHistory history;
  std::vector<std::size_t> order;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (budget && epoch % cfg.regen_period == 0) {
      const std::uint64_t regen = epoch / cfg.regen_period;
      const SparseRandomSearch attack(*budget);
      if (cfg.regen_subset > 0 && cfg.regen_subset < train.size()) {
        std::vector<std::size_t> idx(train.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        SplitMix64 rng = stream_rng(shuffle_seed, kRegenStream + regen);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(cfg.regen_subset);
        std::sort(idx.begin(), idx.end());
        adv = generate_adv_set(train.subset(idx), model, attack, mix_seed(attack_base, regen),
                               cfg.jobs);
      } else {
        adv = generate_adv_set(train, model, attack, mix_seed(attack_base, regen), cfg.jobs);
      }
    }

    const SamplePool pool(train, budget ? &adv : nullptr);
    order.resize(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng = stream_rng(shuffle_seed, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const BatchOutput out = model.train_batch(pool, batch, cfg, epoch);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        if (!pool.is_clean(batch[b])) continue;
        loss_sum += out.loss[b];
        correct += out.predicted[b] == pool.label(batch[b]);
        ++seen;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.clean_loss = loss_sum / static_cast<double>(seen);
    rec.clean_acc = static_cast<double>(correct) / static_cast<double>(seen);
    rec.adv_set_size = budget ? adv.size() : 0;
    rec.lr = learning_rate(cfg, epoch);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

}  // namespace l0trunc
