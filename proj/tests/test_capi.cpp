#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l0trunc/l0trunc.h"

namespace fs = std::filesystem;

TEST_CASE("kernels") {
  const double w[] = {1, 1, 1, 1, 1};
  const double x[] = {5, -3, 2, 9, 1};
  double out = 0;
  REQUIRE(l0t_truncated_dot(w, x, 5, 1, &out) == L0T_OK);
  CHECK(out == 8.0);
  REQUIRE(l0t_truncated_dot(w, x, 5, 0, &out) == L0T_OK);
  CHECK(out == 14.0);

  size_t kept[3];
  REQUIRE(l0t_survivor_mask(w, x, 5, 1, kept) == L0T_OK);
  CHECK(kept[0] == 0);
  CHECK(kept[1] == 2);
  CHECK(kept[2] == 4);

  CHECK(l0t_truncated_dot(w, x, 5, 3, &out) == L0T_ERR_INVALID_TRUNCATION);
  CHECK(std::string(l0t_last_error()).size() > 0);
  CHECK(l0t_truncated_dot(nullptr, x, 5, 0, &out) == L0T_ERR_INVALID_ARGUMENT);

  const double W[] = {1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  const double b[] = {0.5, -1};
  double y[2];
  REQUIRE(l0t_truncated_matvec(W, 2, 5, x, 1, b, y) == L0T_OK);
  CHECK(y[0] == 8.5);
  CHECK(y[1] == -1.0);

  double p = 0;
  REQUIRE(l0t_phi_bar(1.0, &p) == L0T_OK);
  CHECK(p == doctest::Approx(0.15865525393145705).epsilon(1e-15));
  CHECK(l0t_phi_bar(NAN, &p) == L0T_ERR_NON_FINITE);
  CHECK(std::string(l0t_version()).size() > 0);
}

TEST_CASE("mixtures, bounds and verification") {
  const double mu[] = {3, 4};
  const double sigma[] = {1, 1};
  l0t_gmm* g = nullptr;
  REQUIRE(l0t_gmm_create(mu, sigma, 2, &g) == L0T_OK);
  CHECK(l0t_gmm_dim(g) == 2);
  double se = 0;
  REQUIRE(l0t_gmm_standard_error(g, &se) == L0T_OK);
  CHECK(se == doctest::Approx(0.5 * std::erfc(5 / std::sqrt(2.0))));
  REQUIRE(l0t_gmm_normalize(g) == L0T_OK);
  double nu[2];
  REQUIRE(l0t_gmm_snr(g, nu) == L0T_OK);
  CHECK(nu[0] == doctest::Approx(0.6));
  CHECK(nu[1] == doctest::Approx(0.8));

  l0t_dataset* data = nullptr;
  REQUIRE(l0t_gmm_sample(g, 100, 3, &data) == L0T_OK);
  CHECK(l0t_dataset_size(data) == 100);
  CHECK(l0t_dataset_dim(data) == 2);

  const fs::path dir = fs::temp_directory_path() / "l0trunc_capi";
  fs::create_directories(dir);
  const std::string path = (dir / "gmm.bin").string();
  REQUIRE(l0t_gmm_save_dataset(g, data, 3, path.c_str()) == L0T_OK);
  l0t_dataset* back = nullptr;
  REQUIRE(l0t_dataset_load_synthetic(path.c_str(), &back) == L0T_OK);
  double a[2], b[2];
  int la = 0, lb = 0;
  for (size_t i = 0; i < 100; ++i) {
    l0t_dataset_get(data, i, a, &la);
    l0t_dataset_get(back, i, b, &lb);
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    CHECK(la == lb);
  }
  l0t_gmm* loaded = nullptr;
  REQUIRE(l0t_gmm_load(path.c_str(), &loaded) == L0T_OK);
  CHECK(l0t_gmm_dim(loaded) == 2);
  l0t_gmm_free(loaded);
  l0t_dataset_free(back);
  l0t_dataset_free(data);
  l0t_gmm_free(g);
  CHECK(l0t_dataset_get(nullptr, 0, a, &la) == L0T_ERR_INVALID_ARGUMENT);
  CHECK(l0t_dataset_load_synthetic((dir / "none.bin").string().c_str(), &back) == L0T_ERR_IO);
  fs::remove_all(dir);

  const double spike[] = {1.0};
  l0t_theory_row row{};
  REQUIRE(l0t_theory_row_eval(spike, 1, 0.3, 1e6, &row) == L0T_OK);
  CHECK(row.c_defined == 1);
  CHECK(row.c == doctest::Approx(0.85147172722970897401));
  CHECK(row.lambda == 1);
  // Below the window the row is returned with the budget columns undefined.
  REQUIRE(l0t_theory_row_eval(spike, 1, 0.1, 1e6, &row) == L0T_OK);
  CHECK(row.c_defined == 0);
  CHECK(row.k_star_defined == 0);
  const double unnormalized[] = {2.0};
  CHECK(l0t_theory_row_eval(unnormalized, 1, 0.3, 1e6, &row) != L0T_OK);

  l0t_check checks[8];
  size_t count = 0;
  REQUIRE(l0t_gmm_verify(50, 5000, 1, checks, 8, &count) == L0T_OK);
  CHECK(count == 6);
  for (size_t i = 0; i < count; ++i) CHECK(checks[i].pass == 1);
}

TEST_CASE("networks, training and attacks") {
  const size_t dims[] = {6, 8, 2};
  l0t_net* net = nullptr;
  REQUIRE(l0t_net_create(dims, 3, 1, 5, &net) == L0T_OK);
  CHECK(l0t_net_input_dim(net) == 6);
  CHECK(l0t_net_num_classes(net) == 2);
  CHECK(l0t_net_truncation(net) == 1);
  CHECK(l0t_net_create(dims, 3, 3, 5, &net) == L0T_ERR_INVALID_TRUNCATION);

  l0t_dataset* data = nullptr;
  REQUIRE(l0t_dataset_create(6, 1.0, &data) == L0T_OK);
  for (int i = 0; i < 64; ++i) {
    const double s = (i % 2) ? 0.8 : -0.8;
    const double x[] = {s, s, s, -s, 0.1 * (i % 5), -0.1 * (i % 3)};
    REQUIRE(l0t_dataset_add(data, x, i % 2) == L0T_OK);
  }
  CHECK(l0t_dataset_add(data, nullptr, 0) == L0T_ERR_INVALID_ARGUMENT);

  l0t_train_config cfg;
  l0t_train_config_default(&cfg);
  CHECK(cfg.batch == 256);
  CHECK(cfg.lr_count == 1);
  CHECK(cfg.lr_schedule[0] == 0.001);
  const double lr[] = {0.1};
  cfg.lr_schedule = lr;
  cfg.batch = 8;
  cfg.epochs = 15;
  cfg.regen_period = 5;
  int calls = 0;
  auto cb = [](const l0t_epoch_record*, void* user) { ++*static_cast<int*>(user); };
  REQUIRE(l0t_net_train(net, data, &cfg, nullptr, nullptr, cb, &calls) == L0T_OK);
  CHECK(calls == 15);

  l0t_robust_report rep{};
  const l0t_attack_budget none{1, 1, 1.0};
  REQUIRE(l0t_robust_accuracy(net, data, &none, 0, 1, nullptr, &rep) == L0T_OK);
  CHECK(rep.samples == 64);
  CHECK(rep.clean_accuracy == 1.0);

  const l0t_attack_budget budget{2, 40, 100.0};
  REQUIRE(l0t_robust_accuracy(net, data, &budget, 1, 2, nullptr, &rep) == L0T_OK);
  CHECK(rep.robust <= rep.clean_correct);

  l0t_magnitude_report mag{};
  std::vector<size_t> per(64);
  REQUIRE(l0t_median_magnitude(net, data, 2, 10.0, 0, 1, &mag, per.data()) == L0T_OK);
  CHECK(mag.successes + mag.failures == 64);

  const fs::path path = fs::temp_directory_path() / "l0trunc_capi_net.l0tn";
  REQUIRE(l0t_net_save(net, path.string().c_str()) == L0T_OK);
  l0t_net* copy = nullptr;
  REQUIRE(l0t_net_load(path.string().c_str(), &copy) == L0T_OK);
  double x[6], l1[2], l2[2];
  int label = 0;
  l0t_dataset_get(data, 3, x, &label);
  l0t_net_logits(net, x, 6, l1);
  l0t_net_logits(copy, x, 6, l2);
  CHECK(l1[0] == l2[0]);
  CHECK(l1[1] == l2[1]);
  int pred = -1;
  CHECK(l0t_net_predict(copy, x, 5, &pred) == L0T_ERR_DIMENSION_MISMATCH);
  fs::remove(path);
  CHECK(l0t_net_load(path.string().c_str(), &copy) == L0T_ERR_IO);

  l0t_net* preset = nullptr;
  REQUIRE(l0t_net_preset("reduced", 10, 0, &preset) == L0T_OK);
  CHECK(l0t_net_input_dim(preset) == 784);
  l0t_net_free(preset);
  CHECK(l0t_net_preset("huge", 0, 0, &preset) == L0T_ERR_INVALID_ARGUMENT);

  l0t_net_free(copy);
  l0t_net_free(net);
  l0t_dataset_free(data);
}

TEST_CASE("gradient check") {
  const size_t dims[] = {20, 8, 3};
  l0t_grad_check_result r{};
  REQUIRE(l0t_grad_check(dims, 3, 3, 4, 1, 1e-5, &r) == L0T_OK);
  CHECK(r.max_rel_error <= 1e-4);
  CHECK(r.checked > 0);
}
