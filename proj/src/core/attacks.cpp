#include "attacks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace l0trunc {

Evaluation NetClassifier::evaluate(std::span<const double> x, int label) const {
  const std::size_t M = net_->num_classes();
  require(label >= 0 && static_cast<std::size_t>(label) < M, ErrorCode::kInvalidArgument,
          "label " + std::to_string(label) + " outside [0, " + std::to_string(M) + ")");
  const Vector z = net_->logits(x);
  Evaluation e;
  std::size_t best = 0;
  for (std::size_t j = 1; j < M; ++j) {
    if (z[static_cast<Eigen::Index>(j)] > z[static_cast<Eigen::Index>(best)]) best = j;
  }
  e.predicted = static_cast<int>(best);
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < M; ++j) {
    if (static_cast<int>(j) != label) other = std::max(other, z[static_cast<Eigen::Index>(j)]);
  }
  e.margin = z[label] - other;
  return e;
}

AttackBudget::AttackBudget(std::size_t k_, std::size_t t_, double beta_, double a_)
    : k(k_), t(t_), beta(beta_), a(a_) {
  require(k >= 1, ErrorCode::kInvalidArgument, "attack budget needs k >= 1");
  require(t >= 1, ErrorCode::kInvalidArgument, "attack budget needs t >= 1 queries");
  require(std::isfinite(beta) && beta >= 1.0, ErrorCode::kInvalidArgument, "beta must be >= 1");
  require(std::isfinite(a) && a > 0.0, ErrorCode::kInvalidArgument, "half range a must be > 0");
}

void TranscriptSink::record(std::size_t sample, std::size_t iteration, std::size_t queries,
                            double margin, std::size_t magnitude) {
  std::lock_guard lock(mutex_);
  *out_ << "{\"sample\":" << sample << ",\"iteration\":" << iteration
        << ",\"queries\":" << queries << ",\"margin\":" << margin
        << ",\"magnitude\":" << magnitude << "}\n";
}

namespace {

std::size_t count_changed(std::span<const double> a, std::span<const double> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

std::size_t uniform_index(SplitMix64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
}

void check_input(const Classifier& f, std::span<const double> x) {
  require(x.size() == f.input_dim(), ErrorCode::kDimensionMismatch,
          "attack input has " + std::to_string(x.size()) + " features, classifier expects " +
              std::to_string(f.input_dim()));
}

// Uncounted confirmation pass plus the box and l0 contract.
void verify_success(const Classifier& f, std::span<const double> x, int y,
                    const AttackResult& r, std::size_t max_changed, double box) {
  require(f.misclassifies(r.x_adv, y), ErrorCode::kInvariant,
          "attack reported success but the example is classified correctly");
  require(r.l0_magnitude <= max_changed, ErrorCode::kInvariant, "attack exceeded its l0 budget");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(r.x_adv[i] == x[i] || std::abs(r.x_adv[i]) <= box, ErrorCode::kInvariant,
            "attack left the l_inf box");
  }
}

AttackResult clean_success(std::span<const double> x, std::size_t queries) {
  AttackResult r;
  r.success = true;
  r.x_adv.assign(x.begin(), x.end());
  r.queries_used = queries;
  return r;
}

}  // namespace

AttackResult SparseRandomSearch::run(const Classifier& f, std::span<const double> x, int y,
                                     std::uint64_t seed, std::size_t sample_id) const {
  check_input(f, x);
  const std::size_t d = x.size();
  const std::size_t k = budget_.k;
  require(k < d, ErrorCode::kInvalidArgument,
          "attack budget k=" + std::to_string(k) + " must be below d=" + std::to_string(d));
  const double box = budget_.box();

  Evaluation ev = f.evaluate(x, y);
  if (ev.predicted != y) {
    AttackResult r = clean_success(x, 1);
    verify_success(f, x, y, r, 0, box);
    return r;
  }

  SplitMix64 rng(seed);
  std::vector<std::size_t> cur, cand;
  std::vector<double> cur_val, cand_val;
  std::vector<char> member(d, 0);
  std::vector<double> xc(x.begin(), x.end());
  double cur_margin = ev.margin;
  const std::size_t halving = std::max<std::size_t>(1, budget_.t / 10);

  AttackResult r;
  r.queries_used = 1;
  for (std::size_t it = 0; r.queries_used < budget_.t; ++it) {
    cand = cur;
    cand_val = cur_val;
    for (std::size_t j : cand) member[j] = 1;
    auto draw_coord = [&]() {
      std::size_t j;
      do j = uniform_index(rng, d);
      while (member[j]);
      member[j] = 1;
      return j;
    };
    auto draw_value = [&]() { return (rng() >> 63) ? box : -box; };

    if (cand.empty()) {
      for (std::size_t m = 0; m < k; ++m) {
        cand.push_back(draw_coord());
        cand_val.push_back(draw_value());
      }
    } else {
      const std::size_t shift = std::min<std::size_t>(it / halving, 63);
      const std::size_t m = std::max<std::size_t>(1, k >> shift);
      // Partial Fisher-Yates picks m distinct positions of the set.
      std::vector<std::size_t> pos(cand.size());
      std::iota(pos.begin(), pos.end(), std::size_t{0});
      for (std::size_t s = 0; s < m; ++s) {
        std::swap(pos[s], pos[s + uniform_index(rng, pos.size() - s)]);
        const std::size_t p = pos[s];
        member[cand[p]] = 0;  // the replacement may land on the same coordinate
        cand[p] = draw_coord();
        cand_val[p] = draw_value();
      }
    }
    for (std::size_t j : cand) member[j] = 0;

    std::copy(x.begin(), x.end(), xc.begin());
    for (std::size_t m = 0; m < cand.size(); ++m) xc[cand[m]] = cand_val[m];
    ev = f.evaluate(xc, y);
    ++r.queries_used;
    const std::size_t changed = count_changed(xc, x);
    if (transcript_ != nullptr) {
      transcript_->record(sample_id, it, r.queries_used, ev.margin, changed);
    }
    if (ev.predicted != y) {
      r.success = true;
      r.x_adv = xc;
      r.l0_magnitude = changed;
      break;
    }
    if (ev.margin < cur_margin) {
      cur.swap(cand);
      cur_val.swap(cand_val);
      cur_margin = ev.margin;
    }
  }
  require(r.queries_used <= budget_.t, ErrorCode::kInvariant, "attack exceeded its query budget");
  if (r.success) verify_success(f, x, y, r, k, box);
  return r;
}

PointwiseAttack::PointwiseAttack(std::size_t restarts, double beta, double a)
    : restarts_(restarts), value_(beta * a) {
  require(restarts >= 1, ErrorCode::kInvalidArgument, "pointwise attack needs >= 1 restart");
  require(std::isfinite(beta) && beta >= 1.0, ErrorCode::kInvalidArgument, "beta must be >= 1");
  require(std::isfinite(a) && a > 0.0, ErrorCode::kInvalidArgument, "half range a must be > 0");
}

AttackResult PointwiseAttack::run(const Classifier& f, std::span<const double> x, int y,
                                  std::uint64_t seed, std::size_t sample_id) const {
  check_input(f, x);
  const std::size_t d = x.size();
  if (f.misclassifies(x, y)) {
    AttackResult r = clean_success(x, 1);
    verify_success(f, x, y, r, 0, value_);
    return r;
  }

  AttackResult best;
  best.queries_used = 1;
  std::vector<std::size_t> perm(d);
  std::vector<double> xa(d);
  const std::size_t start = std::max<std::size_t>(1, (d + 99) / 100);

  for (std::size_t restart = 0; restart < restarts_; ++restart) {
    SplitMix64 rng = stream_rng(seed, restart);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::copy(x.begin(), x.end(), xa.begin());

    // Escalate over nested prefixes of one random order.
    std::size_t applied = 0, n = start;
    bool fooled = false;
    while (true) {
      for (; applied < n; ++applied) xa[perm[applied]] = (rng() >> 63) ? value_ : -value_;
      ++best.queries_used;
      if (f.misclassifies(xa, y)) {
        fooled = true;
        break;
      }
      if (n == d) break;
      n = std::min(d, std::max(n + 1, static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(n)))));
    }
    if (!fooled) continue;

    std::vector<std::size_t> perturbed;
    for (std::size_t m = 0; m < n; ++m) {
      if (xa[perm[m]] != x[perm[m]]) perturbed.push_back(perm[m]);
    }
    std::size_t sweep = 0;
    for (bool changed = true; changed; ++sweep) {
      changed = false;
      std::shuffle(perturbed.begin(), perturbed.end(), rng);
      std::vector<std::size_t> kept;
      for (std::size_t j : perturbed) {
        const double saved = xa[j];
        xa[j] = x[j];
        ++best.queries_used;
        if (f.misclassifies(xa, y)) {
          changed = true;
        } else {
          xa[j] = saved;
          kept.push_back(j);
        }
      }
      perturbed.swap(kept);
      if (transcript_ != nullptr) {
        transcript_->record(sample_id, restart * 1000 + sweep, best.queries_used, 0.0,
                            perturbed.size());
      }
    }
    if (!best.success || perturbed.size() < best.l0_magnitude) {
      best.success = true;
      best.x_adv = xa;
      best.l0_magnitude = perturbed.size();
    }
    if (best.l0_magnitude <= 1) break;  // a correct clean prediction cannot do better
  }
  if (best.success) verify_success(f, x, y, best, d, value_);
  return best;
}

AttackResult NullAttack::run(const Classifier& f, std::span<const double> x, int y,
                             std::uint64_t, std::size_t) const {
  check_input(f, x);
  AttackResult r;
  r.queries_used = 1;
  if (f.misclassifies(x, y)) r = clean_success(x, 1);
  return r;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t attack_seed(std::uint64_t seed, std::size_t sample) {
  return mix_seed(tagged_seed(seed, StreamTag::kAttack), sample);
}

double RobustReport::clean_accuracy() const {
  return samples == 0 ? 0.0 : static_cast<double>(clean_correct) / static_cast<double>(samples);
}

double RobustReport::robust_accuracy() const {
  return samples == 0 ? 0.0 : static_cast<double>(robust) / static_cast<double>(samples);
}

RobustReport robust_accuracy(const Classifier& f, const LabeledDataset& data, const Attack& attack,
                             std::uint64_t seed, std::size_t jobs) {
  require(!data.empty(), ErrorCode::kInvalidArgument, "robust accuracy needs a non-empty dataset");
  std::vector<char> correct(data.size()), robust(data.size());
  std::vector<std::size_t> queries(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto x = data.features(i);
    const int y = data.label(i);
    correct[i] = !f.misclassifies(x, y);
    const AttackResult r = attack.run(f, x, y, attack_seed(seed, i), i);
    robust[i] = correct[i] && !r.success;
    queries[i] = r.queries_used;
  });
  RobustReport rep;
  rep.samples = data.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    rep.clean_correct += correct[i];
    rep.robust += robust[i];
    rep.total_queries += queries[i];
  }
  return rep;
}

MagnitudeReport median_adv_magnitude(const Classifier& f, const LabeledDataset& data,
                                     std::size_t restarts, double beta, std::uint64_t seed,
                                     std::size_t jobs) {
  require(!data.empty(), ErrorCode::kInvalidArgument, "median magnitude needs a non-empty dataset");
  const PointwiseAttack attack(restarts, beta, data.half_range());
  MagnitudeReport rep;
  rep.magnitudes.assign(data.size(), std::numeric_limits<std::size_t>::max());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const AttackResult r = attack.run(f, data.features(i), data.label(i), attack_seed(seed, i), i);
    if (r.success) rep.magnitudes[i] = r.l0_magnitude;
  });
  std::vector<std::size_t> ok;
  for (std::size_t m : rep.magnitudes) {
    if (m == std::numeric_limits<std::size_t>::max()) ++rep.failures;
    else ok.push_back(m);
  }
  rep.successes = ok.size();
  if (ok.empty()) {
    rep.median = std::numeric_limits<double>::quiet_NaN();
  } else {
    std::sort(ok.begin(), ok.end());
    const std::size_t h = ok.size() / 2;
    rep.median = ok.size() % 2 == 1 ? static_cast<double>(ok[h])
                                    : 0.5 * static_cast<double>(ok[h - 1] + ok[h]);
  }
  return rep;
}

LabeledDataset generate_adv_set(const LabeledDataset& data, const Classifier& f,
                                const Attack& attack, std::uint64_t seed, std::size_t jobs) {
  std::vector<AttackResult> results(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    results[i] = attack.run(f, data.features(i), data.label(i), attack_seed(seed, i), i);
  });
  LabeledDataset out(data.dim(), data.half_range(), data.provenance() + "+adv");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!results[i].success) continue;
    require(f.misclassifies(results[i].x_adv, data.label(i)), ErrorCode::kInvariant,
            "adversarial example " + std::to_string(i) + " is classified correctly");
    out.add(results[i].x_adv, data.label(i));
  }
  return out;
}

}  // namespace l0trunc
