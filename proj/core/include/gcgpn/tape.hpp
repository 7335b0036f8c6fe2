#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include "gcgpn/matrix.hpp"
#include "gcgpn/parameter.hpp"

namespace gcgpn {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Gradient accumulated by the last backward pass (zero-sized if the node
  // was not reached).
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive operations in execution order and replays their
// gradients in reverse. One tape per forward pass; a tape may be backward'ed
// at most once.
class Tape {
 public:
  // Called during backward with the node's accumulated output gradient.
  using BackwardFn = std::function<void(Tape&, const Matrix&)>;

  // With record_gradients = false, backward closures are dropped and only
  // values are kept (evaluation mode).
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf bound to a parameter; backward accumulates into p.gradient when
  // p.trainable is set.
  Var parameter(Parameter& p);
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);

  // Mutable gradient accumulator of v, zero-initialised on first access.
  Matrix& grad_of(Var v);
  bool requires_grad(Var v) const;
  bool recording() const noexcept { return record_; }

  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Node ids in the order the last backward pass visited them.
  const std::vector<std::size_t>& backward_order() const noexcept { return order_; }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  std::vector<std::size_t> order_;
  bool record_;
  bool backward_done_ = false;
};

}  // namespace gcgpn
