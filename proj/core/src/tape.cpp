#include "gcgpn/tape.hpp"

#include "gcgpn/errors.hpp"

namespace gcgpn {

const Matrix& Var::value() const { return tape_->node(*this).value; }
const Matrix& Var::grad() const { return tape_->node(*this).grad; }

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw TapeError("variable does not belong to tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw TapeError("variable does not belong to tape");
  return nodes_[v.id_];
}

Var Tape::constant(Matrix value) {
  if (backward_done_) throw TapeError("tape already consumed by backward");
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (backward_done_) throw TapeError("tape already consumed by backward");
  const bool rg = record_ && p.trainable;
  nodes_.push_back(Node{p.value, {}, {}, rg ? &p : nullptr, rg});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  if (backward_done_) throw TapeError("tape already consumed by backward");
  bool rg = false;
  if (record_) {
    for (const Var& in : inputs) rg = rg || node(in).requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, rg ? std::move(fn) : BackwardFn{}, nullptr, rg});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_of(Var v) {
  Node& n = node(v);
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::backward(Var loss) {
  if (backward_done_) throw TapeError("backward called twice on the same tape");
  if (!record_) throw TapeError("backward on a tape that does not record gradients");
  Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward requires a 1x1 loss, got " + shape_string(root.value));
  }
  backward_done_ = true;
  order_.clear();
  grad_of(loss)(0, 0) = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    order_.push_back(i);
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->gradient += n.grad;
  }
}

}  // namespace gcgpn
