#include "gcgpn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gcgpn/optim.hpp"

namespace gcgpn {
namespace {

double evaluate(const ScalarFn& f) {
  Tape tape(false);
  return f(tape).value().item();
}

}  // namespace

GradCheckResult finite_difference_check(const ScalarFn& f, std::span<Parameter* const> params,
                                        double h) {
  zero_grad(params);
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    if (p == nullptr || !p->trainable) continue;
    const Matrix analytic = p->gradient;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = evaluate(f);
      p->value[i] = saved - h;
      const double down = evaluate(f);
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace gcgpn
