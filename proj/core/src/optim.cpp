#include "gcgpn/optim.hpp"

#include "gcgpn/errors.hpp"

namespace gcgpn {

void sgd_step(std::span<Parameter* const> params, const SgdOptions& opts) {
  for (Parameter* p : params) {
    if (p == nullptr || !p->trainable) continue;
    if (!p->gradient.same_shape(p->value) || !p->momentum_buffer.same_shape(p->value)) {
      throw ShapeError("parameter '" + p->name + "' has inconsistent buffer shapes");
    }
    auto value = p->value.data();
    auto grad = p->gradient.data();
    auto buf = p->momentum_buffer.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + opts.weight_decay * value[i];
      buf[i] = opts.momentum * buf[i] + g;
      value[i] -= opts.lr * buf[i];
    }
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p != nullptr) p->zero_grad();
  }
}

}  // namespace gcgpn
