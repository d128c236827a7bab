#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/attacks.hpp"
#include "core/gmm.hpp"
#include "core/linear_model.hpp"
#include "core/network.hpp"
#include "support.hpp"

using namespace l0trunc;

namespace {

// Ignores its input.
class ConstantClassifier final : public Classifier {
 public:
  ConstantClassifier(std::size_t d, int label) : d_(d), label_(label) {}
  std::size_t input_dim() const override { return d_; }
  Evaluation evaluate(std::span<const double>, int label) const override {
    return {label_, label == label_ ? 1.0 : -1.0};
  }

 private:
  std::size_t d_;
  int label_;
};

LabeledDataset mixture_data(std::size_t d, std::size_t n, std::uint64_t seed) {
  std::vector<double> mu(d, 1.0), sigma(d, 1.0);
  return sample_dataset(normalize(GaussianMixture(mu, sigma)), n, seed);
}

}  // namespace

TEST_CASE("attack budget validation") {
  CHECK_ERROR(AttackBudget(0, 10, 1, 1), ErrorCode::kInvalidArgument);
  CHECK_ERROR(AttackBudget(1, 0, 1, 1), ErrorCode::kInvalidArgument);
  CHECK_ERROR(AttackBudget(1, 10, 0.5, 1), ErrorCode::kInvalidArgument);
  CHECK_ERROR(AttackBudget(1, 10, 1, 0), ErrorCode::kInvalidArgument);
  CHECK(AttackBudget(3, 10, 100, 1).box() == 100.0);
  const TruncatedLinearClassifier f(std::vector<double>{1, 0}, TruncationParam(0));
  const SparseRandomSearch too_big(AttackBudget(2, 10, 1, 1));
  CHECK_ERROR(too_big.run(f, std::vector<double>{1, 0}, 1, 0), ErrorCode::kInvalidArgument);
}

TEST_CASE("sparse random search") {
  const TruncatedLinearClassifier first(std::vector<double>{1, 0}, TruncationParam(0));
  const std::vector<double> x{1, 0};

  SUBCASE("already misclassified") {
    const SparseRandomSearch atk(AttackBudget(1, 50, 1, 1));
    const AttackResult r = atk.run(first, x, -1, 3);
    CHECK(r.success);
    CHECK(r.l0_magnitude == 0);
    CHECK(r.queries_used == 1);
    CHECK(r.x_adv == x);
  }
  SUBCASE("single decisive coordinate") {
    const SparseRandomSearch atk(AttackBudget(1, 20, 100, 1));
    const AttackResult r = atk.run(first, x, 1, 4);
    CHECK(r.success);
    CHECK(r.queries_used <= 20);
    CHECK(r.l0_magnitude == 1);
    CHECK(r.x_adv[0] == -100.0);
  }
  SUBCASE("constant classifier exhausts the query budget") {
    const ConstantClassifier c(5, 1);
    const SparseRandomSearch atk(AttackBudget(2, 37, 10, 1));
    const AttackResult r = atk.run(c, std::vector<double>(5, 0.1), 1, 5);
    CHECK_FALSE(r.success);
    CHECK(r.queries_used == 37);
    CHECK(r.x_adv.empty());
  }
}

TEST_CASE("attack results respect the budget and are reproducible") {
  const FeedForwardNet net = FeedForwardNet::create({30, 12, 3}, TruncationParam(2), 1);
  const NetClassifier f(net);
  SplitMix64 rng(41);
  const AttackBudget budget(4, 60, 3, 1);
  const SparseRandomSearch atk(budget);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = test::uniform_vector(rng, 30, -1, 1);
    const int y = static_cast<int>(rng() % 3);
    const AttackResult r = atk.run(f, x, y, trial);
    CHECK(r.queries_used <= budget.t);
    if (!r.success) continue;
    CHECK(f.misclassifies(r.x_adv, y));
    std::size_t changed = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      if (r.x_adv[i] == x[i]) continue;
      ++changed;
      CHECK(std::abs(r.x_adv[i]) <= budget.box());
    }
    CHECK(changed == r.l0_magnitude);
    CHECK(changed <= budget.k);
    const AttackResult again = atk.run(f, x, y, trial);
    CHECK(again.x_adv == r.x_adv);
    CHECK(again.queries_used == r.queries_used);
  }
}

TEST_CASE("success rate does not fall with more queries") {
  const std::size_t d = 40;
  const LabeledDataset data = mixture_data(d, 600, 7);
  const TruncatedLinearClassifier f(std::vector<double>(d, 1.0), TruncationParam(3));
  double prev = 0.0;
  for (std::size_t t : {2, 10, 50, 200}) {
    const SparseRandomSearch atk(AttackBudget(3, t, 2, 1));
    const RobustReport r = robust_accuracy(f, data, atk, 11);
    const double success = 1.0 - r.robust_accuracy();
    const double se = std::sqrt(std::max(success * (1 - success), 0.25 / 600) / 600.0);
    CHECK(success >= prev - 3 * se);
    prev = success;
  }
}

TEST_CASE("pointwise attack") {
  const TruncatedLinearClassifier sum(std::vector<double>{1, 1}, TruncationParam(0));
  const std::vector<double> x{1, 1};
  const PointwiseAttack atk(1, 1.0, 1.0);
  const AttackResult r = atk.run(sum, x, 1, 2);
  CHECK(r.success);
  CHECK(r.l0_magnitude == 1);

  CHECK(atk.run(sum, x, -1, 2).l0_magnitude == 0);

  const FeedForwardNet net = FeedForwardNet::create({50, 16, 4}, TruncationParam(3), 2);
  const NetClassifier f(net);
  SplitMix64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const auto xs = test::uniform_vector(rng, 50, -1, 1);
    const int y = net.predict(xs);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (std::size_t restarts : {1, 3, 6}) {
      const AttackResult p = PointwiseAttack(restarts, 10, 1).run(f, xs, y, trial);
      if (!p.success) continue;
      CHECK(p.l0_magnitude <= prev);
      CHECK(f.misclassifies(p.x_adv, y));
      prev = p.l0_magnitude;
    }
  }
  CHECK_ERROR(PointwiseAttack(0, 1, 1), ErrorCode::kInvalidArgument);
}

TEST_CASE("robust accuracy") {
  LabeledDataset data(4, 1.0);
  for (int i = 0; i < 10; ++i) data.add(std::vector<double>(4, 0.1 * i), i < 7 ? 2 : 1);
  const ConstantClassifier c(4, 2);
  const SparseRandomSearch atk(AttackBudget(2, 30, 100, 1));
  const RobustReport r = robust_accuracy(c, data, atk, 0);
  CHECK(r.robust_accuracy() == doctest::Approx(0.7));
  CHECK(r.clean_accuracy() == doctest::Approx(0.7));

  const LabeledDataset mix = mixture_data(20, 300, 3);
  const TruncatedLinearClassifier lin(std::vector<double>(20, 1.0), TruncationParam(2));
  const RobustReport none = robust_accuracy(lin, mix, NullAttack(), 0);
  CHECK(none.robust_accuracy() == none.clean_accuracy());

  const SparseRandomSearch strong(AttackBudget(2, 80, 5, 1));
  const RobustReport serial = robust_accuracy(lin, mix, strong, 9, 1);
  const RobustReport parallel = robust_accuracy(lin, mix, strong, 9, 4);
  CHECK(serial.robust == parallel.robust);
  CHECK(serial.total_queries == parallel.total_queries);
  CHECK(serial.robust <= serial.clean_correct);

  CHECK_ERROR(robust_accuracy(lin, LabeledDataset(20, 1.0), strong, 0), ErrorCode::kInvalidArgument);
}

TEST_CASE("median magnitude") {
  LabeledDataset data(6, 1.0);
  for (int i = 0; i < 9; ++i) data.add(std::vector<double>(6, 0.5), i < 5 ? 0 : 1);
  const ConstantClassifier wrong(6, 1);
  const MagnitudeReport m = median_adv_magnitude(wrong, data, 2, 1, 0);
  CHECK(m.median == 0.0);
  CHECK(m.successes == 5);
  CHECK(m.failures == 4);
  CHECK(m.magnitudes[0] == 0);
  CHECK(m.magnitudes[8] == std::numeric_limits<std::size_t>::max());

  const LabeledDataset mix = mixture_data(30, 60, 4);
  const TruncatedLinearClassifier lin(std::vector<double>(30, 1.0), TruncationParam(3));
  const MagnitudeReport a = median_adv_magnitude(lin, mix, 3, 10, 5, 1);
  const MagnitudeReport b = median_adv_magnitude(lin, mix, 3, 10, 5, 3);
  CHECK(a.magnitudes == b.magnitudes);
  CHECK(a.median >= 1.0);
}

TEST_CASE("adversarial set generation") {
  LabeledDataset data(5, 1.0);
  data.add(std::vector<double>{0.2, 0.1, 0.3, 0.1, 0.2}, 1);
  data.add(std::vector<double>{-0.2, -0.1, -0.3, -0.1, -0.2}, 1);
  const ConstantClassifier robust(5, 1);
  const SparseRandomSearch atk(AttackBudget(2, 40, 10, 1));
  CHECK(generate_adv_set(data, robust, atk, 0).empty());

  const TruncatedLinearClassifier lin(std::vector<double>{1, 1, 1, 1, 1}, TruncationParam(0));
  const LabeledDataset adv = generate_adv_set(data, lin, atk, 0);
  REQUIRE(adv.size() >= 1);
  // The clean mistake enters unchanged.
  bool found_clean = false;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    CHECK(adv.label(i) == 1);
    CHECK(lin.misclassifies(adv.features(i), adv.label(i)));
    const auto f = adv.features(i);
    found_clean |= std::vector<double>(f.begin(), f.end()) ==
                   std::vector<double>{-0.2, -0.1, -0.3, -0.1, -0.2};
  }
  CHECK(found_clean);
  CHECK(adv.size() <= data.size());
}

TEST_CASE("transcript records") {
  std::ostringstream out;
  TranscriptSink sink(out);
  SparseRandomSearch atk(AttackBudget(2, 15, 3, 1));
  atk.set_transcript(&sink);
  const ConstantClassifier c(8, 0);
  atk.run(c, std::vector<double>(8, 0.0), 0, 1, 42);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("sample") == 42);
    CHECK(j.at("queries").get<std::size_t>() == lines + 2);
    CHECK(j.at("magnitude").get<std::size_t>() <= 2);
    CHECK(j.contains("margin"));
    CHECK(j.contains("iteration"));
    ++lines;
  }
  CHECK(lines == 14);
}
