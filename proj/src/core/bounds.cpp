#include "bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "error.hpp"

namespace l0trunc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kBisectionIterations = 200;

double log_dim(double d) {
  require(std::isfinite(d) && d > 1.0, ErrorCode::kInvalidArgument,
          "dimension must exceed 1 for log d > 0");
  return std::log(d);
}

void require_normalized(const SnrVector& nu) {
  require(std::abs(nu.norm2() - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
          "SNR vector must be normalized (||nu||_2 = " + std::to_string(nu.norm2()) + ")");
}

void require_window(const Window& w, double eps, const char* what) {
  require(std::isfinite(eps) && w.contains(eps), ErrorCode::kOutOfWindow,
          std::string(what) + ": eps=" + std::to_string(eps) + " outside (" +
              std::to_string(w.lo) + ", " + std::to_string(w.hi) + ")");
}

void require_dim_covers(const SnrVector& nu, double d) {
  require(d + 0.5 >= static_cast<double>(nu.size()), ErrorCode::kInvalidArgument,
          "d must be at least the SNR vector length");
}

double threshold_from_c(double c) { return phi_bar(std::sqrt(1.0 - c * c)); }

}  // namespace

Bound clamp_probability(double raw) {
  Bound b;
  b.raw = raw;
  b.value = std::clamp(raw, 0.0, 1.0);
  b.clamped = b.value != raw;
  return b;
}

Window c_window() { return {phi_bar(1.0), 0.5}; }

Window k_star_window(double d) {
  const double L = log_dim(d);
  return {phi_bar(1.0) + 1.0 / L, 0.5};
}

Window k_trunc_window(double d) {
  const double L = log_dim(d);
  return {phi_bar(1.0), 0.5 - std::sqrt(2.0 / L)};
}

Window correction_window(double d) {
  const double L = log_dim(d);
  return {phi_bar(1.0) + 1.0 / L + std::sqrt(2.0 / L), 0.5};
}

double c_of_eps(double eps) {
  require_window(c_window(), eps, "c(eps)");
  // Phi_bar(sqrt(1 - c^2)) increases with c.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < kBisectionIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (threshold_from_c(mid) < eps) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::size_t lambda_c(const SnrVector& nu, double c) {
  require_normalized(nu);
  require(c > 0.0 && c < 1.0, ErrorCode::kInvalidArgument, "lambda_c needs 0 < c < 1");
  const double target = c * c;
  double acc = 0.0;
  const auto& s = nu.sorted_abs();
  for (std::size_t i = 0; i < s.size(); ++i) {
    acc += s[i] * s[i];
    if (acc >= target) return i + 1;
  }
  return s.size();
}

Bound upper_bound_general(std::span<const double> w, std::span<const double> mu,
                          const Eigen::MatrixXd& sigma, TruncationParam k) {
  const std::size_t d = w.size();
  require(mu.size() == d && static_cast<std::size_t>(sigma.rows()) == d &&
              static_cast<std::size_t>(sigma.cols()) == d,
          ErrorCode::kDimensionMismatch, "upper_bound_general: inconsistent dimensions");
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(d));
  const Eigen::Map<const Eigen::VectorXd> mv(mu.data(), static_cast<Eigen::Index>(d));
  require(wv.allFinite() && mv.allFinite() && sigma.allFinite(), ErrorCode::kNonFinite,
          "upper_bound_general: non-finite input");
  require(wv.cwiseAbs().maxCoeff() > 0.0, ErrorCode::kInvalidArgument,
          "upper_bound_general: zero weight vector");
  require(sigma.isApprox(sigma.transpose(), 1e-12), ErrorCode::kInvalidArgument,
          "covariance must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  require(llt.info() == Eigen::Success, ErrorCode::kInvalidArgument,
          "covariance is not positive definite");

  const double L = log_dim(static_cast<double>(d));
  const double spread = std::sqrt(wv.dot(sigma * wv));
  const double diag_inf = (sigma.diagonal().cwiseSqrt().cwiseProduct(wv)).cwiseAbs().maxCoeff();
  const double arg =
      (wv.dot(mv) - 8.0 * static_cast<double>(k.k) * diag_inf * (1.0 + std::sqrt(2.0 * L))) /
      spread;
  return clamp_probability(1.0 / std::sqrt(2.0 * L) + phi_bar(arg));
}

Bound upper_bound_diag(std::span<const double> w_tilde, const SnrVector& nu, TruncationParam k,
                       double d) {
  require(w_tilde.size() == nu.size(), ErrorCode::kDimensionMismatch,
          "upper_bound_diag: w_tilde and nu lengths differ");
  require_dim_covers(nu, d);
  const double L = log_dim(d);
  double ip = 0.0, sq = 0.0, inf = 0.0;
  for (std::size_t i = 0; i < w_tilde.size(); ++i) {
    require(std::isfinite(w_tilde[i]), ErrorCode::kNonFinite, "upper_bound_diag: non-finite w");
    ip += w_tilde[i] * nu.values()[i];
    sq += w_tilde[i] * w_tilde[i];
    inf = std::max(inf, std::abs(w_tilde[i]));
  }
  require(sq > 0.0, ErrorCode::kInvalidArgument, "upper_bound_diag: zero weight vector");
  const double arg =
      (ip - 8.0 * static_cast<double>(k.k) * inf * (1.0 + std::sqrt(2.0 * L))) / std::sqrt(sq);
  return clamp_probability(1.0 / std::sqrt(2.0 * L) + phi_bar(arg));
}

std::vector<double> candidate_weights(const SnrVector& nu, double eps) {
  const std::size_t lambda = lambda_c(nu, c_of_eps(eps));
  std::vector<double> w(nu.size(), 0.0);
  for (std::size_t r = lambda - 1; r < nu.size(); ++r) {
    const std::size_t i = nu.order()[r];
    w[i] = nu.values()[i];
  }
  return w;
}

LowerBound lower_bound(const SnrVector& nu, std::span<const std::size_t> coords) {
  const std::size_t d = nu.size();
  const double L = log_dim(static_cast<double>(d));
  std::vector<char> in_a(d, 0);
  for (std::size_t i : coords) {
    require(i < d, ErrorCode::kInvalidArgument,
            "coordinate " + std::to_string(i) + " out of range for d=" + std::to_string(d));
    require(!in_a[i], ErrorCode::kInvalidArgument, "duplicate coordinate in A");
    in_a[i] = 1;
  }
  double l1_a = 0.0, sq_rest = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double v = nu.values()[i];
    if (in_a[i]) l1_a += std::abs(v);
    else sq_rest += v * v;
  }
  LowerBound out;
  out.budget = l1_a * L;
  out.error = clamp_probability(phi_bar(std::sqrt(sq_rest)) - 1.0 / L);
  return out;
}

double prefix_l1(const SnrVector& nu, double eps) {
  const std::size_t lambda = lambda_c(nu, c_of_eps(eps));
  double s = 0.0;
  for (std::size_t r = 0; r < lambda; ++r) s += nu.sorted_abs()[r];
  return s;
}

Bound loss_bound_at_budget(const SnrVector& nu, double eps, double a, double d) {
  require(std::isfinite(a) && a >= 0.0, ErrorCode::kInvalidArgument, "a must be >= 0");
  require_dim_covers(nu, d);
  require_normalized(nu);
  const double L = log_dim(d);
  const double c = c_of_eps(eps);
  const double slope =
      8.0 * (1.0 + std::sqrt(2.0 * L)) / (std::sqrt(2.0 * std::numbers::pi) * std::sqrt(1.0 - c * c));
  return clamp_probability(eps + a * slope + 1.0 / std::sqrt(2.0 * L));
}

double k_star_upper(const SnrVector& nu, double eps, double d) {
  require_dim_covers(nu, d);
  require_window(k_star_window(d), eps, "k_star_upper");
  return prefix_l1(nu, eps) * log_dim(d);
}

double k_trunc_lower(const SnrVector& nu, double eps, double d) {
  require_dim_covers(nu, d);
  require_window(k_trunc_window(d), eps, "k_trunc_lower");
  const double c = c_of_eps(eps);
  return std::sqrt(1.0 - c * c) / 16.0 * prefix_l1(nu, eps) / log_dim(d);
}

CorrectionConstants correction_constants(double eps, double d) {
  require_window(correction_window(d), eps, "correction_constants");
  const double L = log_dim(d);
  const double shift = std::sqrt(2.0 / L);
  const double c = c_of_eps(eps - shift);
  CorrectionConstants out;
  out.c1 = 1.0 / L + shift;
  out.c2 = 2.0 * std::log(L) / L - std::log(std::sqrt(1.0 - c * c) / 16.0) / L;
  return out;
}

BudgetBounds budget_bounds(const SnrVector& nu, double eps, double d) {
  require_dim_covers(nu, d);
  require_normalized(nu);
  const double L = log_dim(d);
  BudgetBounds b;
  b.eps = eps;
  b.c = b.k_trunc_lb = b.k_star_ub = b.alpha_trunc_lb = b.alpha_star_ub = b.c1 = b.c2 = kNaN;
  if (c_window().contains(eps)) {
    b.c_defined = true;
    b.c = c_of_eps(eps);
    b.lambda = lambda_c(nu, b.c);
  }
  if (k_trunc_window(d).contains(eps)) {
    b.k_trunc_defined = true;
    b.k_trunc_lb = k_trunc_lower(nu, eps, d);
    b.alpha_trunc_lb = std::log(b.k_trunc_lb) / L;
  }
  if (k_star_window(d).contains(eps)) {
    b.k_star_defined = true;
    b.k_star_ub = k_star_upper(nu, eps, d);
    b.alpha_star_ub = std::log(b.k_star_ub) / L;
  }
  if (correction_window(d).contains(eps)) {
    b.constants_defined = true;
    const auto cc = correction_constants(eps, d);
    b.c1 = cc.c1;
    b.c2 = cc.c2;
  }
  return b;
}

SandwichCheck sandwich(const SnrVector& nu, double eps, double d) {
  const double L = log_dim(d);
  const double shifted = eps + std::sqrt(2.0 / L) + 1.0 / L;
  SandwichCheck s;
  if (!k_trunc_window(d).contains(eps) || !k_star_window(d).contains(shifted)) return s;
  s.applicable = true;
  s.lower = k_trunc_lower(nu, eps, d);
  s.upper = k_star_upper(nu, shifted, d);
  s.holds = s.lower <= s.upper;
  return s;
}

}  // namespace l0trunc
