#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "gcgpn/parameter.hpp"
#include "gcgpn/tape.hpp"

namespace gcgpn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Builds the scalar to differentiate on the given tape.
using ScalarFn = std::function<Var(Tape&)>;

// Compares tape gradients of f against central differences
// (f(p+h) - f(p-h)) / 2h for every entry of every parameter. Relative error
// uses max(|analytic|, |numeric|, 1e-8) as denominator. Parameter gradients
// are overwritten.
GradCheckResult finite_difference_check(const ScalarFn& f, std::span<Parameter* const> params,
                                        double h = 1e-5);

}  // namespace gcgpn
