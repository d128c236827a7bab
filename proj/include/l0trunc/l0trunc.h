#ifndef L0TRUNC_L0TRUNC_H
#define L0TRUNC_L0TRUNC_H

#include <stddef.h>
#include <stdint.h>

#if defined(L0TRUNC_BUILDING_LIBRARY)
#define L0T_API __attribute__((visibility("default")))
#else
#define L0T_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum l0t_status {
  L0T_OK = 0,
  L0T_ERR_INVALID_ARGUMENT = 1,
  L0T_ERR_DIMENSION_MISMATCH = 2,
  L0T_ERR_INVALID_TRUNCATION = 3,
  L0T_ERR_NON_FINITE = 4,
  L0T_ERR_OUT_OF_WINDOW = 5,
  L0T_ERR_IO = 6,
  L0T_ERR_FORMAT = 7,
  L0T_ERR_INVARIANT = 8,
  L0T_ERR_INTERNAL = 99
} l0t_status;

typedef struct l0t_net l0t_net;
typedef struct l0t_dataset l0t_dataset;
typedef struct l0t_gmm l0t_gmm;

/* Message for the most recent failure on the calling thread. */
L0T_API const char* l0t_last_error(void);
L0T_API const char* l0t_version(void);

/* ---- truncation kernels ---- */

L0T_API l0t_status l0t_truncated_dot(const double* w, const double* x, size_t d, size_t k,
                                     double* out);
/* W is row-major rows x cols; out receives rows values. */
L0T_API l0t_status l0t_truncated_matvec(const double* w, size_t rows, size_t cols,
                                        const double* x, size_t k, const double* bias,
                                        double* out);
/* out receives the d - 2k surviving indices in ascending order. */
L0T_API l0t_status l0t_survivor_mask(const double* w, const double* x, size_t d, size_t k,
                                     size_t* out);
L0T_API l0t_status l0t_phi_bar(double t, double* out);

/* ---- Gaussian mixtures ---- */

L0T_API l0t_status l0t_gmm_create(const double* mu, const double* sigma, size_t d, l0t_gmm** out);
/* Random normalized profile used by gmm-verify. */
L0T_API l0t_status l0t_gmm_random(size_t d, uint64_t seed, l0t_gmm** out);
/* Reads the mu/sigma sidecar written next to a synthetic dataset. */
L0T_API l0t_status l0t_gmm_load(const char* dataset_path, l0t_gmm** out);
L0T_API void l0t_gmm_free(l0t_gmm* g);
L0T_API size_t l0t_gmm_dim(const l0t_gmm* g);
L0T_API l0t_status l0t_gmm_normalize(l0t_gmm* g);
/* out receives d entries mu_i / sigma_i. */
L0T_API l0t_status l0t_gmm_snr(const l0t_gmm* g, double* out);
L0T_API l0t_status l0t_gmm_standard_error(const l0t_gmm* g, double* out);
L0T_API l0t_status l0t_gmm_sample(const l0t_gmm* g, size_t n, uint64_t seed, l0t_dataset** out);
L0T_API l0t_status l0t_gmm_save_dataset(const l0t_gmm* g, const l0t_dataset* data, uint64_t seed,
                                        const char* path);

/* ---- bound curves ---- */

typedef struct l0t_theory_row {
  double eps;
  double c;
  size_t lambda;
  double k_trunc_lb;
  double k_star_ub;
  double alpha_trunc_lb;
  double alpha_star_ub;
  double c1;
  double c2;
  double loss_bound;
  int c_defined;
  int k_trunc_defined;
  int k_star_defined;
  int constants_defined;
  int loss_bound_clamped;
  int sandwich_applicable;
  int sandwich_holds;
} l0t_theory_row;

/* nu must have unit l2 norm; d may exceed n (only log d enters). */
L0T_API l0t_status l0t_theory_row_eval(const double* nu, size_t n, double eps, double d,
                                       l0t_theory_row* out);

typedef struct l0t_check {
  char name[32];
  int pass;
  int vacuous;
  double measured;
  double bound;
  double margin;
} l0t_check;

/* Writes up to `capacity` checks and the total count to *count. */
L0T_API l0t_status l0t_gmm_verify(size_t d, size_t trials, uint64_t seed, l0t_check* checks,
                                  size_t capacity, size_t* count);

/* ---- datasets ---- */

L0T_API l0t_status l0t_dataset_create(size_t dim, double half_range, l0t_dataset** out);
L0T_API l0t_status l0t_dataset_add(l0t_dataset* data, const double* x, int label);
L0T_API l0t_status l0t_dataset_load_mnist(const char* dir, double half_range, l0t_dataset** train,
                                          l0t_dataset** test);
L0T_API l0t_status l0t_dataset_load_synthetic(const char* path, l0t_dataset** out);
L0T_API l0t_status l0t_dataset_head(const l0t_dataset* data, size_t n, l0t_dataset** out);
L0T_API void l0t_dataset_free(l0t_dataset* data);
L0T_API size_t l0t_dataset_size(const l0t_dataset* data);
L0T_API size_t l0t_dataset_dim(const l0t_dataset* data);
L0T_API double l0t_dataset_half_range(const l0t_dataset* data);
/* x receives dim values. */
L0T_API l0t_status l0t_dataset_get(const l0t_dataset* data, size_t i, double* x, int* label);

/* ---- networks ---- */

L0T_API l0t_status l0t_net_create(const size_t* dims, size_t n_dims, size_t k, uint64_t seed,
                                  l0t_net** out);
/* "reference" or "reduced". */
L0T_API l0t_status l0t_net_preset(const char* name, size_t k, uint64_t seed, l0t_net** out);
L0T_API l0t_status l0t_net_load(const char* path, l0t_net** out);
L0T_API l0t_status l0t_net_save(const l0t_net* net, const char* path);
L0T_API void l0t_net_free(l0t_net* net);
L0T_API size_t l0t_net_input_dim(const l0t_net* net);
L0T_API size_t l0t_net_num_classes(const l0t_net* net);
L0T_API size_t l0t_net_truncation(const l0t_net* net);
/* out receives num_classes logits. */
L0T_API l0t_status l0t_net_logits(const l0t_net* net, const double* x, size_t d, double* out);
L0T_API l0t_status l0t_net_predict(const l0t_net* net, const double* x, size_t d, int* out);

/* ---- training ---- */

typedef struct l0t_train_config {
  size_t batch;
  size_t epochs;
  const double* lr_schedule;
  size_t lr_count;
  size_t lr_period;
  double momentum;
  double weight_decay;
  size_t regen_period;
  size_t regen_subset; /* 0 attacks the whole training set */
  size_t jobs;
  uint64_t seed;
} l0t_train_config;

/* Fills defaults; lr_schedule points at static storage holding 0.001. */
L0T_API void l0t_train_config_default(l0t_train_config* cfg);

typedef struct l0t_attack_budget {
  size_t k;
  size_t t;
  double beta;
} l0t_attack_budget;

typedef struct l0t_epoch_record {
  size_t epoch;
  double clean_loss;
  double clean_acc;
  size_t adv_set_size;
  double lr;
} l0t_epoch_record;

typedef void (*l0t_epoch_callback)(const l0t_epoch_record* record, void* user);

/* Plain training when budget is NULL, adversarial training otherwise.
   history_csv and callback are optional. */
L0T_API l0t_status l0t_net_train(l0t_net* net, const l0t_dataset* train,
                                 const l0t_train_config* cfg, const l0t_attack_budget* budget,
                                 const char* history_csv, l0t_epoch_callback callback, void* user);

/* ---- attacks ---- */

typedef struct l0t_robust_report {
  size_t samples;
  size_t clean_correct;
  size_t robust;
  size_t total_queries;
  double clean_accuracy;
  double robust_accuracy;
} l0t_robust_report;

/* Sparse random search at the given budget. transcript_path is optional. */
L0T_API l0t_status l0t_robust_accuracy(const l0t_net* net, const l0t_dataset* data,
                                       const l0t_attack_budget* budget, uint64_t seed, size_t jobs,
                                       const char* transcript_path, l0t_robust_report* out);

typedef struct l0t_magnitude_report {
  double median; /* NaN when no sample was fooled */
  size_t successes;
  size_t failures;
} l0t_magnitude_report;

/* Pointwise attack. per_sample (optional) receives one magnitude per sample,
   SIZE_MAX for failures. */
L0T_API l0t_status l0t_median_magnitude(const l0t_net* net, const l0t_dataset* data,
                                        size_t restarts, double beta, uint64_t seed, size_t jobs,
                                        l0t_magnitude_report* out, size_t* per_sample);

/* ---- diagnostics ---- */

typedef struct l0t_grad_check_result {
  double max_rel_error;
  size_t checked;
  size_t skipped;
} l0t_grad_check_result;

/* Random network and random batch in [-1, 1], central differences with step h. */
L0T_API l0t_status l0t_grad_check(const size_t* dims, size_t n_dims, size_t k, size_t batch,
                                  uint64_t seed, double h, l0t_grad_check_result* out);

#ifdef __cplusplus
}
#endif

#endif
