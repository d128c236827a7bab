#pragma once

#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace l0trunc::test {

// Runs fn and reports the ErrorCode it threw, or 0 when it returned normally.
inline int error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.code());
  }
  return 0;
}

#define CHECK_ERROR(expr, code) \
  CHECK(::l0trunc::test::error_code_of([&] { (void)(expr); }) == static_cast<int>(code))

inline std::vector<double> uniform_vector(SplitMix64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace l0trunc::test
