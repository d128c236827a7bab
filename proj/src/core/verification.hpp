#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "gmm.hpp"

namespace l0trunc {

/// Normalized diagonal mixture with |nu_i| proportional to |N(0,1)| draws and
/// sigma_i uniform in [0.5, 2].
GaussianMixture random_normalized_model(std::size_t d, std::uint64_t seed);

/// Largest prefix of the |nu|-sorted coordinates whose adversary budget
/// floor(k(A)) still satisfies 2k < d and whose size is at most d/4.
std::vector<std::size_t> matched_coordinate_set(const SnrVector& nu);

struct CheckLine {
  std::string name;
  bool pass = false;
  bool vacuous = false;  // the bound is trivial at this d; reported, never a failure
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // signed slack in the passing direction
};

struct VerifyReport {
  std::size_t d = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<CheckLine> checks;

  bool all_pass() const;
};

/// Monte-Carlo checks of the oracle adversary and both robust-error bounds on
/// a random normalized mixture: budget soundness, fallback rate, per-coordinate
/// change rate, MAP lower bounds for A = [d] and a proper subset, and
/// domination of the candidate-weights classifier by its upper bound.
VerifyReport gmm_verify(std::size_t d, std::size_t trials, std::uint64_t seed);

struct TheoryRow {
  BudgetBounds bounds;
  SandwichCheck sandwich;
  /// loss_bound_at_budget at a = sqrt(1 - c^2) / (16 log d); NaN outside the c window.
  Bound loss_bound;
};

/// Bound curves over an eps grid. `d` may exceed nu's length.
std::vector<TheoryRow> theory_curve(const SnrVector& nu, const std::vector<double>& eps_grid,
                                    double d);

}  // namespace l0trunc
