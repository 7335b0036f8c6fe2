#pragma once

#include <string>
#include <utility>

#include "gcgpn/matrix.hpp"

namespace gcgpn {

// A learnable tensor together with its gradient accumulator and the SGD
// momentum buffer. All three always share one shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Matrix init, bool trainable_ = true)
      : name(std::move(name_)),
        value(std::move(init)),
        gradient(value.rows(), value.cols()),
        momentum_buffer(value.rows(), value.cols()),
        trainable(trainable_) {}

  void zero_grad() { gradient.fill(0.0); }
  void reset_momentum() { momentum_buffer.fill(0.0); }

  std::string name;
  Matrix value;
  Matrix gradient;
  Matrix momentum_buffer;
  bool trainable = true;
};

}  // namespace gcgpn
