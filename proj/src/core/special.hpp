#pragma once

#include <cmath>
#include <numbers>

#include "error.hpp"

namespace l0trunc {

/// Complementary standard normal CDF, 1 - Phi(t), via erfc so the upper tail
/// keeps full relative accuracy.
inline double phi_bar(double t) {
  require(std::isfinite(t), ErrorCode::kNonFinite, "phi_bar: non-finite argument");
  return 0.5 * std::erfc(t / std::numbers::sqrt2);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace l0trunc
