#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmm.hpp"
#include "linalg.hpp"
#include "special.hpp"
#include "truncation.hpp"

namespace l0trunc {

/// A probability bound. `raw` is the formula's value; `value` is clamped to
/// [0, 1] and `clamped` records whether that changed anything (the bound is
/// vacuous or trivial in that regime).
struct Bound {
  double value = 0.0;
  double raw = 0.0;
  bool clamped = false;
};

Bound clamp_probability(double raw);

/// Unique c in (0, 1) with Phi_bar(sqrt(1 - c^2)) = eps, by bisection.
/// Requires Phi_bar(1) < eps < 1/2.
double c_of_eps(double eps);

/// Smallest prefix length of the |nu|-sorted profile whose l2 norm reaches c.
/// Requires ||nu||_2 = 1 within 1e-9 and 0 < c < 1. Returns a count in [1, d].
std::size_t lambda_c(const SnrVector& nu, double c);

/// Robust-error bound for a k-truncated linear classifier under a general
/// positive-definite covariance.
Bound upper_bound_general(std::span<const double> w, std::span<const double> mu,
                          const Eigen::MatrixXd& sigma, TruncationParam k);

/// Diagonal-covariance form in whitened coordinates w_tilde = Sigma^{1/2} w.
/// `d` only enters through log d and may exceed the stored length.
Bound upper_bound_diag(std::span<const double> w_tilde, const SnrVector& nu, TruncationParam k,
                       double d);

/// Whitened weights that zero the lambda_{c(eps)} - 1 largest-|nu| coordinates
/// and copy nu elsewhere. Returned in the original coordinate order; the
/// classifier weight is w_i = w_tilde_i / sigma_i.
std::vector<double> candidate_weights(const SnrVector& nu, double eps);

struct LowerBound {
  double budget = 0.0;  // ||nu_A||_1 log d
  Bound error;          // Phi_bar(||nu_{A^c}||_2) - 1/log d
};

/// Optimal-robust-error lower bound for coordinate set A (0-based indices).
LowerBound lower_bound(const SnrVector& nu, std::span<const std::size_t> coords);

/// Error bound of the best truncated linear classifier at budget
/// k = a * ||nu_[1:lambda_c(eps)]||_1.
Bound loss_bound_at_budget(const SnrVector& nu, double eps, double a, double d);

/// ||nu_[1:lambda]||_1 for lambda = lambda_{c(eps)} on the sorted profile.
double prefix_l1(const SnrVector& nu, double eps);

/// Upper bound on k*(eps - 1/log d). Window: Phi_bar(1) + 1/log d < eps < 1/2.
double k_star_upper(const SnrVector& nu, double eps, double d);

/// Lower bound on k_Trunc(eps + sqrt(2/log d)).
/// Window: Phi_bar(1) < eps < 1/2 - sqrt(2/log d).
double k_trunc_lower(const SnrVector& nu, double eps, double d);

struct CorrectionConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Window: Phi_bar(1) + 1/log d + sqrt(2/log d) < eps < 1/2.
CorrectionConstants correction_constants(double eps, double d);

/// Closed-open window helpers, used by callers that want to test before calling.
struct Window {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double eps) const { return eps > lo && eps < hi; }
  bool empty() const { return !(lo < hi); }
};
Window c_window();
Window k_star_window(double d);
Window k_trunc_window(double d);
Window correction_window(double d);

/// One row of the bound-curve table. Missing quantities (eps outside their
/// window) are NaN and flagged in `defined`.
struct BudgetBounds {
  double eps = 0.0;
  double c = 0.0;
  std::size_t lambda = 0;
  double k_trunc_lb = 0.0;
  double k_star_ub = 0.0;
  double alpha_trunc_lb = 0.0;
  double alpha_star_ub = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  bool c_defined = false;
  bool k_trunc_defined = false;
  bool k_star_defined = false;
  bool constants_defined = false;
};

BudgetBounds budget_bounds(const SnrVector& nu, double eps, double d);

/// k_trunc_lower(eps) <= k_star_upper(eps + sqrt(2/log d) + 1/log d).
struct SandwichCheck {
  bool applicable = false;  // both sides defined
  bool holds = false;
  double lower = 0.0;
  double upper = 0.0;
};
SandwichCheck sandwich(const SnrVector& nu, double eps, double d);

}  // namespace l0trunc
