#include "l0trunc/l0trunc.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <random>
#include <string>

#include "core/adv_training.hpp"
#include "core/attacks.hpp"
#include "core/bounds.hpp"
#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/gmm.hpp"
#include "core/network.hpp"
#include "core/rng.hpp"
#include "core/special.hpp"
#include "core/truncation.hpp"
#include "core/verification.hpp"

struct l0t_net {
  l0trunc::FeedForwardNet net;
};

struct l0t_dataset {
  l0trunc::LabeledDataset data;
};

struct l0t_gmm {
  l0trunc::GaussianMixture model;
};

namespace {

using namespace l0trunc;

thread_local std::string g_last_error;

l0t_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return L0T_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch: return L0T_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kInvalidTruncation: return L0T_ERR_INVALID_TRUNCATION;
    case ErrorCode::kNonFinite: return L0T_ERR_NON_FINITE;
    case ErrorCode::kOutOfWindow: return L0T_ERR_OUT_OF_WINDOW;
    case ErrorCode::kIo: return L0T_ERR_IO;
    case ErrorCode::kFormat: return L0T_ERR_FORMAT;
    case ErrorCode::kInvariant: return L0T_ERR_INVARIANT;
  }
  return L0T_ERR_INTERNAL;
}

template <typename Fn>
l0t_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return L0T_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return L0T_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return L0T_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return L0T_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

TrainConfig to_config(const l0t_train_config& c) {
  TrainConfig cfg;
  cfg.batch = c.batch;
  cfg.epochs = c.epochs;
  need(c.lr_schedule, "lr_schedule");
  cfg.lr_schedule.assign(c.lr_schedule, c.lr_schedule + c.lr_count);
  cfg.lr_period = c.lr_period;
  cfg.momentum = c.momentum;
  cfg.weight_decay = c.weight_decay;
  cfg.regen_period = c.regen_period;
  cfg.regen_subset = c.regen_subset;
  cfg.jobs = c.jobs;
  cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

std::vector<std::size_t> to_dims(const size_t* dims, size_t n) {
  need(dims, "dims");
  return {dims, dims + n};
}

const double kDefaultLr[] = {0.001};

}  // namespace

extern "C" {

const char* l0t_last_error(void) { return g_last_error.c_str(); }

const char* l0t_version(void) { return "0.1.0"; }

l0t_status l0t_truncated_dot(const double* w, const double* x, size_t d, size_t k, double* out) {
  return guarded([&] {
    need(w, "w");
    need(x, "x");
    need(out, "out");
    *out = truncated_inner_product({w, d}, {x, d}, TruncationParam(k));
  });
}

l0t_status l0t_truncated_matvec(const double* w, size_t rows, size_t cols, const double* x,
                                size_t k, const double* bias, double* out) {
  return guarded([&] {
    need(w, "w");
    need(x, "x");
    need(bias, "bias");
    need(out, "out");
    const Eigen::Map<const Matrix> m(w, static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(cols));
    const auto u = truncated_matvec(m, {x, cols}, TruncationParam(k), {bias, rows});
    std::copy(u.begin(), u.end(), out);
  });
}

l0t_status l0t_survivor_mask(const double* w, const double* x, size_t d, size_t k, size_t* out) {
  return guarded([&] {
    need(w, "w");
    need(x, "x");
    need(out, "out");
    const SurvivorMask m = survivor_mask({w, d}, {x, d}, TruncationParam(k));
    std::copy(m.indices().begin(), m.indices().end(), out);
  });
}

l0t_status l0t_phi_bar(double t, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = phi_bar(t);
  });
}

l0t_status l0t_gmm_create(const double* mu, const double* sigma, size_t d, l0t_gmm** out) {
  return guarded([&] {
    need(mu, "mu");
    need(sigma, "sigma");
    need(out, "out");
    *out = new l0t_gmm{GaussianMixture({mu, mu + d}, {sigma, sigma + d})};
  });
}

l0t_status l0t_gmm_random(size_t d, uint64_t seed, l0t_gmm** out) {
  return guarded([&] {
    need(out, "out");
    *out = new l0t_gmm{random_normalized_model(d, seed)};
  });
}

l0t_status l0t_gmm_load(const char* dataset_path, l0t_gmm** out) {
  return guarded([&] {
    need(dataset_path, "dataset_path");
    need(out, "out");
    SyntheticMeta meta = load_synthetic_meta(dataset_path);
    *out = new l0t_gmm{GaussianMixture(std::move(meta.mu), std::move(meta.sigma))};
  });
}

void l0t_gmm_free(l0t_gmm* g) { delete g; }

size_t l0t_gmm_dim(const l0t_gmm* g) { return g ? g->model.dim() : 0; }

l0t_status l0t_gmm_normalize(l0t_gmm* g) {
  return guarded([&] {
    need(g, "gmm");
    g->model = normalize(g->model);
  });
}

l0t_status l0t_gmm_snr(const l0t_gmm* g, double* out) {
  return guarded([&] {
    need(g, "gmm");
    need(out, "out");
    const SnrVector nu = snr_vector(g->model);
    std::copy(nu.values().begin(), nu.values().end(), out);
  });
}

l0t_status l0t_gmm_standard_error(const l0t_gmm* g, double* out) {
  return guarded([&] {
    need(g, "gmm");
    need(out, "out");
    *out = standard_error(g->model);
  });
}

l0t_status l0t_gmm_sample(const l0t_gmm* g, size_t n, uint64_t seed, l0t_dataset** out) {
  return guarded([&] {
    need(g, "gmm");
    need(out, "out");
    *out = new l0t_dataset{sample_dataset(g->model, n, seed)};
  });
}

l0t_status l0t_gmm_save_dataset(const l0t_gmm* g, const l0t_dataset* data, uint64_t seed,
                                const char* path) {
  return guarded([&] {
    need(g, "gmm");
    need(data, "dataset");
    need(path, "path");
    save_synthetic(path, data->data, g->model, seed);
  });
}

l0t_status l0t_theory_row_eval(const double* nu, size_t n, double eps, double d,
                               l0t_theory_row* out) {
  return guarded([&] {
    need(nu, "nu");
    need(out, "out");
    const SnrVector v({nu, nu + n});
    const TheoryRow row = theory_curve(v, {eps}, d).front();
    const BudgetBounds& b = row.bounds;
    *out = l0t_theory_row{};
    out->eps = b.eps;
    out->c = b.c;
    out->lambda = b.lambda;
    out->k_trunc_lb = b.k_trunc_lb;
    out->k_star_ub = b.k_star_ub;
    out->alpha_trunc_lb = b.alpha_trunc_lb;
    out->alpha_star_ub = b.alpha_star_ub;
    out->c1 = b.c1;
    out->c2 = b.c2;
    out->loss_bound = row.loss_bound.value;
    out->c_defined = b.c_defined;
    out->k_trunc_defined = b.k_trunc_defined;
    out->k_star_defined = b.k_star_defined;
    out->constants_defined = b.constants_defined;
    out->loss_bound_clamped = row.loss_bound.clamped;
    out->sandwich_applicable = row.sandwich.applicable;
    out->sandwich_holds = row.sandwich.holds;
  });
}

l0t_status l0t_gmm_verify(size_t d, size_t trials, uint64_t seed, l0t_check* checks,
                          size_t capacity, size_t* count) {
  return guarded([&] {
    need(count, "count");
    const VerifyReport rep = gmm_verify(d, trials, seed);
    *count = rep.checks.size();
    for (size_t i = 0; i < rep.checks.size() && i < capacity; ++i) {
      const CheckLine& c = rep.checks[i];
      l0t_check& o = checks[i];
      o = l0t_check{};
      std::strncpy(o.name, c.name.c_str(), sizeof(o.name) - 1);
      o.pass = c.pass;
      o.vacuous = c.vacuous;
      o.measured = c.measured;
      o.bound = c.bound;
      o.margin = c.margin;
    }
  });
}

l0t_status l0t_dataset_create(size_t dim, double half_range, l0t_dataset** out) {
  return guarded([&] {
    need(out, "out");
    *out = new l0t_dataset{LabeledDataset(dim, half_range, "user")};
  });
}

l0t_status l0t_dataset_add(l0t_dataset* data, const double* x, int label) {
  return guarded([&] {
    need(data, "dataset");
    need(x, "x");
    data->data.add({x, data->data.dim()}, label);
  });
}

l0t_status l0t_dataset_load_mnist(const char* dir, double half_range, l0t_dataset** train,
                                  l0t_dataset** test) {
  return guarded([&] {
    need(dir, "dir");
    need(train, "train");
    need(test, "test");
    MnistData m = load_mnist(dir, half_range);
    auto tr = std::make_unique<l0t_dataset>(l0t_dataset{std::move(m.train)});
    *test = new l0t_dataset{std::move(m.test)};
    *train = tr.release();
  });
}

l0t_status l0t_dataset_load_synthetic(const char* path, l0t_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new l0t_dataset{load_synthetic(path)};
  });
}

l0t_status l0t_dataset_head(const l0t_dataset* data, size_t n, l0t_dataset** out) {
  return guarded([&] {
    need(data, "dataset");
    need(out, "out");
    *out = new l0t_dataset{data->data.head(n)};
  });
}

void l0t_dataset_free(l0t_dataset* data) { delete data; }

size_t l0t_dataset_size(const l0t_dataset* data) { return data ? data->data.size() : 0; }

size_t l0t_dataset_dim(const l0t_dataset* data) { return data ? data->data.dim() : 0; }

double l0t_dataset_half_range(const l0t_dataset* data) {
  return data ? data->data.half_range() : 0.0;
}

l0t_status l0t_dataset_get(const l0t_dataset* data, size_t i, double* x, int* label) {
  return guarded([&] {
    need(data, "dataset");
    require(i < data->data.size(), ErrorCode::kInvalidArgument, "sample index out of range");
    if (x != nullptr) {
      const auto f = data->data.features(i);
      std::copy(f.begin(), f.end(), x);
    }
    if (label != nullptr) *label = data->data.label(i);
  });
}

l0t_status l0t_net_create(const size_t* dims, size_t n_dims, size_t k, uint64_t seed,
                          l0t_net** out) {
  return guarded([&] {
    need(out, "out");
    *out = new l0t_net{FeedForwardNet::create(to_dims(dims, n_dims), TruncationParam(k), seed)};
  });
}

l0t_status l0t_net_preset(const char* name, size_t k, uint64_t seed, l0t_net** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = new l0t_net{FeedForwardNet::create(preset_dims(name), TruncationParam(k), seed)};
  });
}

l0t_status l0t_net_load(const char* path, l0t_net** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new l0t_net{FeedForwardNet::load(path)};
  });
}

l0t_status l0t_net_save(const l0t_net* net, const char* path) {
  return guarded([&] {
    need(net, "net");
    need(path, "path");
    net->net.save(path);
  });
}

void l0t_net_free(l0t_net* net) { delete net; }

size_t l0t_net_input_dim(const l0t_net* net) { return net ? net->net.input_dim() : 0; }

size_t l0t_net_num_classes(const l0t_net* net) { return net ? net->net.num_classes() : 0; }

size_t l0t_net_truncation(const l0t_net* net) { return net ? net->net.truncation().k : 0; }

l0t_status l0t_net_logits(const l0t_net* net, const double* x, size_t d, double* out) {
  return guarded([&] {
    need(net, "net");
    need(x, "x");
    need(out, "out");
    const Vector z = net->net.logits({x, d});
    std::copy(z.data(), z.data() + z.size(), out);
  });
}

l0t_status l0t_net_predict(const l0t_net* net, const double* x, size_t d, int* out) {
  return guarded([&] {
    need(net, "net");
    need(x, "x");
    need(out, "out");
    *out = net->net.predict({x, d});
  });
}

void l0t_train_config_default(l0t_train_config* cfg) {
  if (cfg == nullptr) return;
  const TrainConfig d;
  cfg->batch = d.batch;
  cfg->epochs = d.epochs;
  cfg->lr_schedule = kDefaultLr;
  cfg->lr_count = 1;
  cfg->lr_period = d.lr_period;
  cfg->momentum = d.momentum;
  cfg->weight_decay = d.weight_decay;
  cfg->regen_period = d.regen_period;
  cfg->regen_subset = d.regen_subset;
  cfg->jobs = d.jobs;
  cfg->seed = d.seed;
}

l0t_status l0t_net_train(l0t_net* net, const l0t_dataset* train, const l0t_train_config* cfg,
                         const l0t_attack_budget* budget, const char* history_csv,
                         l0t_epoch_callback callback, void* user) {
  return guarded([&] {
    need(net, "net");
    need(train, "train");
    need(cfg, "cfg");
    const TrainConfig config = to_config(*cfg);
    std::optional<AttackBudget> b;
    if (budget != nullptr) {
      b.emplace(budget->k, budget->t, budget->beta, train->data.half_range());
    }
    NetTrainer trainer(net->net);
    const TrainHistory h =
        adversarial_train(trainer, train->data, b, config, [&](const EpochRecord& r) {
          if (callback == nullptr) return;
          const l0t_epoch_record rec{r.epoch, r.clean_loss, r.clean_acc, r.adv_set_size, r.lr};
          callback(&rec, user);
        });
    if (history_csv != nullptr) h.write_csv(history_csv);
  });
}

l0t_status l0t_robust_accuracy(const l0t_net* net, const l0t_dataset* data,
                               const l0t_attack_budget* budget, uint64_t seed, size_t jobs,
                               const char* transcript_path, l0t_robust_report* out) {
  return guarded([&] {
    need(net, "net");
    need(data, "dataset");
    need(budget, "budget");
    need(out, "out");
    SparseRandomSearch attack(
        AttackBudget(budget->k, budget->t, budget->beta, data->data.half_range()));
    std::ofstream log;
    std::unique_ptr<TranscriptSink> sink;
    if (transcript_path != nullptr) {
      log.open(transcript_path);
      require(log.good(), ErrorCode::kIo, std::string("cannot write file: ") + transcript_path);
      sink = std::make_unique<TranscriptSink>(log);
      attack.set_transcript(sink.get());
    }
    const NetClassifier f(net->net);
    const RobustReport r = robust_accuracy(f, data->data, attack, seed, jobs);
    *out = l0t_robust_report{r.samples,          r.clean_correct,    r.robust,
                             r.total_queries,    r.clean_accuracy(), r.robust_accuracy()};
  });
}

l0t_status l0t_median_magnitude(const l0t_net* net, const l0t_dataset* data, size_t restarts,
                                double beta, uint64_t seed, size_t jobs, l0t_magnitude_report* out,
                                size_t* per_sample) {
  return guarded([&] {
    need(net, "net");
    need(data, "dataset");
    need(out, "out");
    const NetClassifier f(net->net);
    const MagnitudeReport r = median_adv_magnitude(f, data->data, restarts, beta, seed, jobs);
    *out = l0t_magnitude_report{r.median, r.successes, r.failures};
    if (per_sample != nullptr) std::copy(r.magnitudes.begin(), r.magnitudes.end(), per_sample);
  });
}

l0t_status l0t_grad_check(const size_t* dims, size_t n_dims, size_t k, size_t batch,
                          uint64_t seed, double h, l0t_grad_check_result* out) {
  return guarded([&] {
    need(out, "out");
    require(batch >= 1, ErrorCode::kInvalidArgument, "batch must be >= 1");
    const FeedForwardNet net = FeedForwardNet::create(to_dims(dims, n_dims), TruncationParam(k), seed);
    SplitMix64 rng = stream_rng(tagged_seed(seed, StreamTag::kSampling), 0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix inputs(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(net.input_dim()));
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = unif(rng);
    std::vector<int> labels(batch);
    for (int& y : labels) {
      y = static_cast<int>(rng() % net.num_classes());
    }
    const GradCheckResult r = gradient_check(net, inputs, labels, h);
    *out = l0t_grad_check_result{r.max_rel_error, r.checked, r.skipped};
  });
}

}  // extern "C"
