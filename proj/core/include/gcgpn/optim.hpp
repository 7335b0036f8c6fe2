#pragma once

#include <span>

#include "gcgpn/parameter.hpp"

namespace gcgpn {

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

// Heavy-ball SGD with L2 weight decay folded into the gradient:
//   g <- grad + wd * value;  buf <- momentum * buf + g;  value <- value - lr * buf
// Non-trainable parameters are left untouched.
void sgd_step(std::span<Parameter* const> params, const SgdOptions& opts);

void zero_grad(std::span<Parameter* const> params);

}  // namespace gcgpn
