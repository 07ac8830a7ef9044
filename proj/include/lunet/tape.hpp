#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "lunet/tensor.hpp"

namespace lunet {

// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const { return id != npos; }
};

// Reverse-mode autodiff graph. Nodes are appended in evaluation order, so the
// recording order is already a topological order and backward walks it in
// reverse, visiting each node once. A tape supports a single backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  // Inference tapes never bind parameter gradients or keep backward rules.
  enum class Mode { training, inference };
  explicit Tape(Mode mode = Mode::training) : mode_(mode) {}

  Var constant(Tensor value);
  // Borrowed values must outlive the tape.
  Var constant_ref(const Tensor& value);
  // Gradients flow into param.grad() when param.requires_grad().
  Var parameter(Tensor& param);
  Var record(Tensor value, bool needs_grad, BackwardFn fn);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  bool any_needs_grad(std::initializer_list<Var> vars) const;

  // Gradient buffer of a node, zero-allocated on first access.
  std::span<double> grad(Var v);
  std::span<double> grad(std::size_t id) { return grad(Var{id}); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws GraphError when the loss
  // is not a scalar or the tape was already consumed.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor* param = nullptr;
    std::vector<double> grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
  Mode mode_;
};

}  // namespace lunet
