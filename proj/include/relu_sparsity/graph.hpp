#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "relu_sparsity/tensor.hpp"

namespace relu_sparsity {

// Handle to a value recorded on a graph. Only valid for the graph that issued it.
struct Var {
  std::uint64_t graph_id = 0;
  std::uint32_t index = 0;
};

// Reverse-mode tape. Nodes are appended in execution order, which is a
// topological order, so backward simply walks the tape from the loss down to
// node 0. Gradients accumulate additively when a value feeds several ops.
template <typename T>
class BasicGraph {
 public:
  using TensorT = BasicTensor<T>;
  // Receives the graph and the node being differentiated; reads that node's
  // gradient and accumulates into the gradients of its inputs.
  using BackwardFn = std::function<void(BasicGraph&, Var)>;

  BasicGraph();
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  Var constant(TensorT value);
  Var variable(TensorT value);
  Var record(TensorT value, std::vector<Var> inputs, BackwardFn backward);

  const TensorT& value(Var v) const;
  bool requires_grad(Var v) const;
  bool has_grad(Var v) const;
  // Gradient of v; zeros of v's shape when nothing flowed into it.
  TensorT grad(Var v) const;

  // Gradient buffer of v for accumulation inside backward rules; allocated
  // as zeros on first use. Returns nullptr when v does not require grad.
  TensorT* grad_buffer(Var v);
  void accumulate_grad(Var v, const TensorT& g);

  const std::vector<Var>& inputs(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and runs every backward rule once in reverse
  // tape order. loss must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t id() const noexcept { return id_; }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Var push(Node n);

  std::uint64_t id_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

using Graph = BasicGraph<float>;

extern template class BasicGraph<float>;
extern template class BasicGraph<double>;

}  // namespace relu_sparsity
