// Batch front end over the l0trunc C API.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "l0trunc/l0trunc.h"

#ifndef L0TRUNC_DEFAULT_MNIST_DIR
#define L0TRUNC_DEFAULT_MNIST_DIR "data/mnist"
#endif

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Thrown to unwind with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

void check(l0t_status s, const std::string& context) {
  if (s == L0T_OK) return;
  const int code = (s == L0T_ERR_IO || s == L0T_ERR_FORMAT) ? kExitIo
                   : s == L0T_ERR_INVARIANT                 ? kExitInvariant
                                                            : kExitUsage;
  throw Exit{code, context + ": " + l0t_last_error()};
}

struct NetDeleter {
  void operator()(l0t_net* p) const { l0t_net_free(p); }
};
struct DatasetDeleter {
  void operator()(l0t_dataset* p) const { l0t_dataset_free(p); }
};
struct GmmDeleter {
  void operator()(l0t_gmm* p) const { l0t_gmm_free(p); }
};
using NetPtr = std::unique_ptr<l0t_net, NetDeleter>;
using DatasetPtr = std::unique_ptr<l0t_dataset, DatasetDeleter>;
using GmmPtr = std::unique_ptr<l0t_gmm, GmmDeleter>;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out_dir = "out";
};

struct DataOptions {
  std::string data = L0TRUNC_DEFAULT_MNIST_DIR;
  std::string format = "mnist";
  double half_range = 1.0;
  std::size_t limit = 0;  // 0 keeps every sample
};

struct TrainOptions {
  DataOptions data;
  std::string preset = "reduced";
  std::vector<std::size_t> dims;
  std::size_t k = 0;
  std::size_t epochs = 20;
  std::size_t batch = 256;
  std::vector<double> lr{0.001};
  std::size_t lr_period = 25;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::string model_out;
  // adversarial training only
  std::size_t k_adv = 10;
  std::size_t queries = 100;
  double beta = 100.0;
  std::size_t regen_period = 5;
  std::size_t regen_subset = 0;
};

struct AttackOptions {
  DataOptions data;
  std::vector<std::string> models;
  std::vector<std::size_t> k_adv{3};
  std::vector<std::size_t> queries{300};
  std::vector<double> beta{100.0};
  std::size_t restarts = 10;
  std::string transcript;
};

struct TheoryOptions {
  std::vector<double> nu;
  std::string gmm;
  std::string profile = "random";
  std::size_t n = 100;
  double d = 0.0;  // 0 uses the profile length
  std::vector<double> eps;
  double eps_min = 0.16;
  double eps_max = 0.499;
  std::size_t eps_steps = 20;
};

struct VerifyOptions {
  std::size_t d = 100;
  std::size_t trials = 100000;
};

struct GradOptions {
  std::vector<std::size_t> dims{20, 8, 3};
  std::size_t k = 3;
  std::size_t batch = 4;
  double h = 1e-5;
  double tolerance = 1e-4;
};

fs::path prepare_out_dir(const Globals& g) {
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) throw Exit{kExitIo, "cannot create output directory " + g.out_dir + ": " + ec.message()};
  return fs::path(g.out_dir);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Exit{kExitIo, "cannot write " + p.string()};
  out.precision(12);
  return out;
}

void write_snapshot(const CLI::App& app, const fs::path& dir, const std::string& command) {
  auto out = open_out(dir / (command + ".resolved.ini"));
  out << app.config_to_str(true, false);
}

// Synthetic -1/+1 labels become classes 0/1 so networks can train on them.
DatasetPtr relabel_binary(const l0t_dataset* src) {
  const std::size_t d = l0t_dataset_dim(src);
  l0t_dataset* raw = nullptr;
  check(l0t_dataset_create(d, l0t_dataset_half_range(src), &raw), "dataset");
  DatasetPtr out(raw);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < l0t_dataset_size(src); ++i) {
    int y = 0;
    check(l0t_dataset_get(src, i, x.data(), &y), "dataset");
    check(l0t_dataset_add(out.get(), x.data(), y > 0 ? 1 : 0), "dataset");
  }
  return out;
}

DatasetPtr limit(DatasetPtr data, std::size_t n) {
  if (n == 0 || n >= l0t_dataset_size(data.get())) return data;
  l0t_dataset* raw = nullptr;
  check(l0t_dataset_head(data.get(), n, &raw), "dataset");
  return DatasetPtr(raw);
}

// MNIST yields the canonical train or test split; a synthetic file is used as is.
DatasetPtr load_data(const DataOptions& o, bool want_train) {
  if (o.format == "mnist") {
    l0t_dataset* train = nullptr;
    l0t_dataset* test = nullptr;
    check(l0t_dataset_load_mnist(o.data.c_str(), o.half_range, &train, &test),
          "loading MNIST from " + o.data);
    DatasetPtr tr(train), te(test);
    return limit(want_train ? std::move(tr) : std::move(te), o.limit);
  }
  if (o.format == "synthetic") {
    l0t_dataset* raw = nullptr;
    check(l0t_dataset_load_synthetic(o.data.c_str(), &raw), "loading " + o.data);
    DatasetPtr data(raw);
    return limit(relabel_binary(data.get()), o.limit);
  }
  throw Exit{kExitUsage, "unknown data format '" + o.format + "' (expected mnist or synthetic)"};
}

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.data, "MNIST directory or synthetic dataset file")
      ->capture_default_str();
  cmd->add_option("--format", o.format, "mnist or synthetic")->capture_default_str();
  cmd->add_option("--half-range", o.half_range, "feature range [-a, a]")->capture_default_str();
  cmd->add_option("--limit", o.limit, "use only the first N samples (0 = all)")
      ->capture_default_str();
}

int run_train(const CLI::App& app, const Globals& g, const TrainOptions& o, bool adversarial) {
  const fs::path dir = prepare_out_dir(g);
  const std::string command = adversarial ? "adv-train" : "train";
  write_snapshot(app, dir, command);
  DatasetPtr train = load_data(o.data, true);

  l0t_net* raw = nullptr;
  if (!o.dims.empty()) {
    check(l0t_net_create(o.dims.data(), o.dims.size(), o.k, g.seed, &raw), "creating network");
  } else {
    check(l0t_net_preset(o.preset.c_str(), o.k, g.seed, &raw), "creating network");
  }
  NetPtr net(raw);

  l0t_train_config cfg;
  l0t_train_config_default(&cfg);
  cfg.batch = o.batch;
  cfg.epochs = o.epochs;
  cfg.lr_schedule = o.lr.data();
  cfg.lr_count = o.lr.size();
  cfg.lr_period = o.lr_period;
  cfg.momentum = o.momentum;
  cfg.weight_decay = o.weight_decay;
  cfg.regen_period = o.regen_period;
  cfg.regen_subset = o.regen_subset;
  cfg.jobs = g.jobs;
  cfg.seed = g.seed;
  const l0t_attack_budget budget{o.k_adv, o.queries, o.beta};

  const std::string stem =
      o.model_out.empty() ? command + "-k" + std::to_string(o.k) : o.model_out;
  const fs::path history = dir / (stem + ".history.csv");
  auto progress = [](const l0t_epoch_record* r, void*) {
    std::fprintf(stderr, "epoch %zu  loss %.4f  acc %.4f  adv %zu  lr %g\n", r->epoch,
                 r->clean_loss, r->clean_acc, r->adv_set_size, r->lr);
  };
  check(l0t_net_train(net.get(), train.get(), &cfg, adversarial ? &budget : nullptr,
                      history.string().c_str(), progress, nullptr),
        "training");
  const fs::path model = dir / (stem + ".l0tn");
  check(l0t_net_save(net.get(), model.string().c_str()), "saving model");
  std::cout << "model " << model.string() << "\nhistory " << history.string() << '\n';
  return kExitOk;
}

NetPtr load_net(const std::string& path) {
  l0t_net* raw = nullptr;
  check(l0t_net_load(path.c_str(), &raw), "loading model " + path);
  return NetPtr(raw);
}

int run_attack(const CLI::App& app, const Globals& g, const AttackOptions& o) {
  if (o.models.empty()) throw Exit{kExitUsage, "attack needs at least one --model"};
  for (std::size_t k : o.k_adv)
    if (k == 0) throw Exit{kExitUsage, "--k-adv must be >= 1"};
  for (std::size_t t : o.queries)
    if (t == 0) throw Exit{kExitUsage, "--queries must be >= 1"};
  for (double beta : o.beta)
    if (!(beta >= 1.0)) throw Exit{kExitUsage, "--beta must be >= 1"};
  const fs::path dir = prepare_out_dir(g);
  write_snapshot(app, dir, "attack");
  DatasetPtr test = load_data(o.data, false);
  auto out = open_out(dir / "robust_accuracy.csv");
  out << "model,k_trunc,k_adv,queries,beta,samples,clean_accuracy,robust_accuracy\n";
  for (const auto& path : o.models) {
    NetPtr net = load_net(path);
    for (std::size_t k : o.k_adv) {
      for (std::size_t t : o.queries) {
        for (double beta : o.beta) {
          const l0t_attack_budget b{k, t, beta};
          l0t_robust_report r{};
          const char* transcript = o.transcript.empty() ? nullptr : o.transcript.c_str();
          check(l0t_robust_accuracy(net.get(), test.get(), &b, g.seed, g.jobs, transcript, &r),
                "attacking " + path);
          out << path << ',' << l0t_net_truncation(net.get()) << ',' << k << ',' << t << ','
              << beta << ',' << r.samples << ',' << r.clean_accuracy << ',' << r.robust_accuracy
              << '\n';
          std::cout << path << "  k_adv=" << k << " t=" << t << " beta=" << beta
                    << "  clean " << r.clean_accuracy << "  robust " << r.robust_accuracy << '\n';
        }
      }
    }
  }
  return kExitOk;
}

int run_rho(const CLI::App& app, const Globals& g, const AttackOptions& o) {
  if (o.models.empty()) throw Exit{kExitUsage, "rho needs at least one --model"};
  const fs::path dir = prepare_out_dir(g);
  write_snapshot(app, dir, "rho");
  DatasetPtr test = load_data(o.data, false);
  auto out = open_out(dir / "rho.csv");
  out << "model,k_trunc,beta,restarts,samples,median,successes,failures\n";
  for (const auto& path : o.models) {
    NetPtr net = load_net(path);
    for (double beta : o.beta) {
      l0t_magnitude_report r{};
      check(l0t_median_magnitude(net.get(), test.get(), o.restarts, beta, g.seed, g.jobs, &r,
                                 nullptr),
            "pointwise attack on " + path);
      out << path << ',' << l0t_net_truncation(net.get()) << ',' << beta << ',' << o.restarts
          << ',' << l0t_dataset_size(test.get()) << ',' << r.median << ',' << r.successes << ','
          << r.failures << '\n';
      std::cout << path << "  beta=" << beta << "  rho " << r.median << "  (" << r.failures
                << " failures)\n";
    }
  }
  return kExitOk;
}

std::vector<double> theory_profile(const TheoryOptions& o, std::uint64_t seed) {
  std::vector<double> nu;
  if (!o.nu.empty()) {
    nu = o.nu;
  } else if (!o.gmm.empty()) {
    l0t_gmm* raw = nullptr;
    check(l0t_gmm_load(o.gmm.c_str(), &raw), "loading mixture " + o.gmm);
    GmmPtr g(raw);
    nu.resize(l0t_gmm_dim(g.get()));
    check(l0t_gmm_snr(g.get(), nu.data()), "mixture");
  } else if (o.profile == "spike") {
    nu.assign(o.n, 0.0);
    nu.at(0) = 1.0;
  } else if (o.profile == "uniform") {
    nu.assign(o.n, 1.0);
  } else if (o.profile == "random") {
    l0t_gmm* raw = nullptr;
    check(l0t_gmm_random(o.n, seed, &raw), "random profile");
    GmmPtr g(raw);
    nu.resize(o.n);
    check(l0t_gmm_snr(g.get(), nu.data()), "random profile");
  } else {
    throw Exit{kExitUsage, "unknown profile '" + o.profile + "' (spike, uniform or random)"};
  }
  if (nu.empty()) throw Exit{kExitUsage, "SNR profile is empty"};
  double norm = 0.0;
  for (double v : nu) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw Exit{kExitUsage, "SNR profile is zero"};
  for (double& v : nu) v /= norm;
  return nu;
}

int run_theory(const CLI::App& app, const Globals& g, const TheoryOptions& o) {
  std::vector<double> grid = o.eps;
  if (grid.empty()) {
    if (o.eps_steps == 0) throw Exit{kExitUsage, "eps grid is empty"};
    if (!(o.eps_min <= o.eps_max)) throw Exit{kExitUsage, "--eps-min exceeds --eps-max"};
    for (std::size_t i = 0; i < o.eps_steps; ++i) {
      const double t = o.eps_steps == 1 ? 0.0 : static_cast<double>(i) / (o.eps_steps - 1);
      grid.push_back(o.eps_min + t * (o.eps_max - o.eps_min));
    }
  }
  const std::vector<double> nu = theory_profile(o, g.seed);
  const double d = o.d > 0.0 ? o.d : static_cast<double>(nu.size());
  const fs::path dir = prepare_out_dir(g);
  write_snapshot(app, dir, "theory");
  auto out = open_out(dir / "theory.csv");
  out << "eps,c,lambda_c,k_trunc_lb,k_star_ub,alpha_trunc_lb,alpha_star_ub,c1,c2,loss_bound,"
         "loss_bound_clamped,sandwich\n";
  bool ok = true;
  for (double eps : grid) {
    l0t_theory_row r{};
    check(l0t_theory_row_eval(nu.data(), nu.size(), eps, d, &r), "theory");
    const char* sandwich = !r.sandwich_applicable ? "n/a" : r.sandwich_holds ? "holds" : "FAILS";
    ok = ok && (!r.sandwich_applicable || r.sandwich_holds);
    out << r.eps << ',' << r.c << ',';
    if (r.c_defined) out << r.lambda;
    out << ',' << r.k_trunc_lb << ',' << r.k_star_ub << ',' << r.alpha_trunc_lb << ','
        << r.alpha_star_ub << ',' << r.c1 << ',' << r.c2 << ',' << r.loss_bound << ','
        << r.loss_bound_clamped << ',' << sandwich << '\n';
  }
  std::cout << "wrote " << (dir / "theory.csv").string() << " (" << grid.size() << " rows)\n";
  if (!ok) std::cerr << "sandwich invariant violated\n";
  return ok ? kExitOk : kExitInvariant;
}

int run_verify(const CLI::App& app, const Globals& g, const VerifyOptions& o) {
  const fs::path dir = prepare_out_dir(g);
  write_snapshot(app, dir, "gmm-verify");
  l0t_check checks[16];
  std::size_t count = 0;
  check(l0t_gmm_verify(o.d, o.trials, g.seed, checks, 16, &count), "gmm-verify");
  auto out = open_out(dir / "gmm_verify.csv");
  out << "check,status,measured,bound,margin\n";
  bool ok = true;
  std::cout << "d=" << o.d << " trials=" << o.trials << " seed=" << g.seed << '\n';
  for (std::size_t i = 0; i < count && i < 16; ++i) {
    const l0t_check& c = checks[i];
    const char* status = c.vacuous ? "vacuous" : c.pass ? "pass" : "FAIL";
    ok = ok && c.pass;
    out << c.name << ',' << status << ',' << c.measured << ',' << c.bound << ',' << c.margin
        << '\n';
    std::printf("  %-18s %-8s measured %-12.6g bound %-12.6g margin %.6g\n", c.name, status,
                c.measured, c.bound, c.margin);
  }
  return ok ? kExitOk : kExitInvariant;
}

int run_grad_check(const Globals& g, const GradOptions& o) {
  l0t_grad_check_result r{};
  check(l0t_grad_check(o.dims.data(), o.dims.size(), o.k, o.batch, g.seed, o.h, &r),
        "grad-check");
  const bool ok = r.max_rel_error < o.tolerance;
  std::printf("max relative error %.3e over %zu parameters (%zu skipped for mask changes): %s\n",
              r.max_rel_error, r.checked, r.skipped, ok ? "pass" : "FAIL");
  return ok ? kExitOk : kExitInvariant;
}

void add_train_options(CLI::App* cmd, TrainOptions& o, bool adversarial) {
  add_data_options(cmd, o.data);
  cmd->add_option("--preset", o.preset, "reduced or reference")->capture_default_str();
  cmd->add_option("--dims", o.dims, "explicit layer widths, input first");
  cmd->add_option("--k", o.k, "first-layer truncation")->capture_default_str();
  cmd->add_option("--epochs", o.epochs)->capture_default_str();
  cmd->add_option("--batch", o.batch)->capture_default_str();
  cmd->add_option("--lr", o.lr, "learning-rate schedule")->capture_default_str();
  cmd->add_option("--lr-period", o.lr_period, "epochs per schedule entry")->capture_default_str();
  cmd->add_option("--momentum", o.momentum)->capture_default_str();
  cmd->add_option("--weight-decay", o.weight_decay)->capture_default_str();
  cmd->add_option("--model-out", o.model_out, "output file stem");
  if (adversarial) {
    cmd->add_option("--k-adv", o.k_adv, "attack coordinate budget")->capture_default_str();
    cmd->add_option("--queries", o.queries, "attack query budget")->capture_default_str();
    cmd->add_option("--beta", o.beta, "box relaxation factor")->capture_default_str();
    cmd->add_option("--regen-period", o.regen_period, "epochs between regenerations")
        ->capture_default_str();
    cmd->add_option("--regen-subset", o.regen_subset, "samples attacked per regeneration")
        ->capture_default_str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated-inner-product networks: training, sparse attacks, bound curves"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.set_config("--config", "", "flat key = value file, one [section] per command");
  app.add_option("--seed", g.seed)->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads for per-sample phases")->capture_default_str();
  app.add_option("--out-dir", g.out_dir)->capture_default_str();

  TheoryOptions theory;
  auto* c_theory = app.add_subcommand("theory", "bound curves over an eps grid");
  c_theory->add_option("--nu", theory.nu, "explicit SNR profile (normalized on read)");
  c_theory->add_option("--gmm", theory.gmm, "synthetic dataset whose mixture supplies nu");
  c_theory->add_option("--profile", theory.profile, "spike, uniform or random")
      ->capture_default_str();
  c_theory->add_option("--n", theory.n, "profile length")->capture_default_str();
  c_theory->add_option("--d", theory.d, "dimension entering log d (default: profile length)");
  c_theory->add_option("--eps", theory.eps, "explicit eps values");
  c_theory->add_option("--eps-min", theory.eps_min)->capture_default_str();
  c_theory->add_option("--eps-max", theory.eps_max)->capture_default_str();
  c_theory->add_option("--eps-steps", theory.eps_steps)->capture_default_str();

  VerifyOptions verify;
  auto* c_verify = app.add_subcommand("gmm-verify", "Monte-Carlo checks of the mixture bounds");
  c_verify->add_option("--d", verify.d)->capture_default_str();
  c_verify->add_option("--trials", verify.trials)->capture_default_str();

  TrainOptions train, adv_train;
  auto* c_train = app.add_subcommand("train", "plain training");
  add_train_options(c_train, train, false);
  auto* c_adv = app.add_subcommand("adv-train", "adversarial training with sparse random search");
  add_train_options(c_adv, adv_train, true);

  AttackOptions attack;
  auto* c_attack = app.add_subcommand("attack", "robust accuracy under sparse random search");
  add_data_options(c_attack, attack.data);
  c_attack->add_option("--model", attack.models, "model files")->required();
  c_attack->add_option("--k-adv", attack.k_adv)->capture_default_str();
  c_attack->add_option("--queries", attack.queries)->capture_default_str();
  c_attack->add_option("--beta", attack.beta)->capture_default_str();
  c_attack->add_option("--transcript", attack.transcript, "line-delimited attack log");

  AttackOptions rho;
  auto* c_rho = app.add_subcommand("rho", "median pointwise-attack magnitude");
  add_data_options(c_rho, rho.data);
  c_rho->add_option("--model", rho.models, "model files")->required();
  c_rho->add_option("--restarts", rho.restarts)->capture_default_str();
  c_rho->add_option("--beta", rho.beta)->capture_default_str();

  GradOptions grad;
  auto* c_grad = app.add_subcommand("grad-check", "finite-difference check of backpropagation");
  c_grad->add_option("--dims", grad.dims)->capture_default_str();
  c_grad->add_option("--k", grad.k)->capture_default_str();
  c_grad->add_option("--batch", grad.batch)->capture_default_str();
  c_grad->add_option("--step", grad.h, "finite-difference step")->capture_default_str();
  c_grad->add_option("--tolerance", grad.tolerance)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (g.jobs == 0) throw Exit{kExitUsage, "--jobs must be >= 1"};
    if (*c_theory) return run_theory(app, g, theory);
    if (*c_verify) return run_verify(app, g, verify);
    if (*c_train) return run_train(app, g, train, false);
    if (*c_adv) return run_train(app, g, adv_train, true);
    if (*c_attack) return run_attack(app, g, attack);
    if (*c_rho) return run_rho(app, g, rho);
    if (*c_grad) return run_grad_check(g, grad);
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  }
  return kExitUsage;
}
