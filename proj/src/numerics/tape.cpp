#include "lunet/tape.hpp"

#include "lunet/error.hpp"

namespace lunet {

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  Node n;
  n.borrowed = &param;
  if (mode_ == Mode::training && param.requires_grad()) {
    n.param = &param;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, bool needs_grad, BackwardFn fn) {
  if (consumed_) throw GraphError("cannot record on a tape after backward");
  Node n;
  n.owned = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.borrowed ? *n.borrowed : n.owned;
}

bool Tape::any_needs_grad(std::initializer_list<Var> vars) const {
  for (auto v : vars)
    if (needs_grad(v)) return true;
  return false;
}

std::span<double> Tape::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.param) return n.param->grad();
  if (n.grad.empty()) n.grad.assign(value(v).numel(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw GraphError("backward called twice on the same tape; re-run forward first");
  if (!loss.valid() || loss.id >= nodes_.size()) throw GraphError("backward on an unknown node");
  if (value(loss).numel() != 1)
    throw GraphError("backward requires a scalar loss, got " + shape_string(value(loss).shape()));
  consumed_ = true;
  if (!nodes_[loss.id].needs_grad) return;
  grad(loss)[0] += 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
    // Interior grads are dead once propagated.
    n.grad = {};
  }
}

}  // namespace lunet
