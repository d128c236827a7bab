#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "classifier.hpp"
#include "dataset.hpp"

namespace l0trunc {

/// k coordinates, t forward passes, perturbed values inside [-beta a, beta a].
struct AttackBudget {
  std::size_t k = 1;
  std::size_t t = 1;
  double beta = 1.0;
  double a = 1.0;

  AttackBudget(std::size_t k, std::size_t t, double beta, double a);
  double box() const { return beta * a; }
};

struct AttackResult {
  bool success = false;
  std::vector<double> x_adv;  // empty when the attack failed
  std::size_t queries_used = 0;
  std::size_t l0_magnitude = 0;
};

/// Line-delimited JSON records (sample, iteration, queries, margin, magnitude).
class TranscriptSink {
 public:
  explicit TranscriptSink(std::ostream& out) : out_(&out) {}
  void record(std::size_t sample, std::size_t iteration, std::size_t queries, double margin,
              std::size_t magnitude);

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

class Attack {
 public:
  virtual ~Attack() = default;
  virtual std::string name() const = 0;
  virtual AttackResult run(const Classifier& f, std::span<const double> x, int y,
                           std::uint64_t seed, std::size_t sample_id = 0) const = 0;

  void set_transcript(TranscriptSink* sink) { transcript_ = sink; }

 protected:
  TranscriptSink* transcript_ = nullptr;
};

/// Random search over sets of at most k coordinates pinned to +-beta a. Each
/// step re-draws a geometrically shrinking subset of the current set and keeps
/// the candidate only if the true-class margin strictly drops.
class SparseRandomSearch final : public Attack {
 public:
  explicit SparseRandomSearch(AttackBudget budget) : budget_(budget) {}

  std::string name() const override { return "sparse-random-search"; }
  AttackResult run(const Classifier& f, std::span<const double> x, int y, std::uint64_t seed,
                   std::size_t sample_id = 0) const override;
  const AttackBudget& budget() const { return budget_; }

 private:
  AttackBudget budget_;
};

/// Salt-and-pepper escalation followed by greedy resets, best of `restarts`.
/// Unbudgeted in k and t.
class PointwiseAttack final : public Attack {
 public:
  PointwiseAttack(std::size_t restarts, double beta, double a);

  std::string name() const override { return "pointwise"; }
  AttackResult run(const Classifier& f, std::span<const double> x, int y, std::uint64_t seed,
                   std::size_t sample_id = 0) const override;

 private:
  std::size_t restarts_;
  double value_;
};

/// Never perturbs: succeeds exactly on clean misclassifications.
class NullAttack final : public Attack {
 public:
  std::string name() const override { return "none"; }
  AttackResult run(const Classifier& f, std::span<const double> x, int y, std::uint64_t seed,
                   std::size_t sample_id = 0) const override;
};

/// Runs fn(i) for i in [0, n) on `jobs` threads. Callers write results into
/// slot i, so output order never depends on scheduling.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Per-sample attack seed derived from the run seed.
std::uint64_t attack_seed(std::uint64_t seed, std::size_t sample);

struct RobustReport {
  std::size_t samples = 0;
  std::size_t clean_correct = 0;
  std::size_t robust = 0;
  std::size_t total_queries = 0;
  double clean_accuracy() const;
  double robust_accuracy() const;
};

/// A sample counts as robust only if it is classified correctly and the
/// attack fails; clean mistakes are attacked trivially.
RobustReport robust_accuracy(const Classifier& f, const LabeledDataset& data, const Attack& attack,
                             std::uint64_t seed, std::size_t jobs = 1);

struct MagnitudeReport {
  double median = 0.0;  // over successful samples; NaN if none succeeded
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::vector<std::size_t> magnitudes;  // per sample, SIZE_MAX for failures
};

MagnitudeReport median_adv_magnitude(const Classifier& f, const LabeledDataset& data,
                                     std::size_t restarts, double beta, std::uint64_t seed,
                                     std::size_t jobs = 1);

/// Successful adversarial examples of `data` under `attack`, with clean labels.
/// Every member is re-verified before it is returned.
LabeledDataset generate_adv_set(const LabeledDataset& data, const Classifier& f,
                                const Attack& attack, std::uint64_t seed, std::size_t jobs = 1);

}  // namespace l0trunc
