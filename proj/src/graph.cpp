#include "relu_sparsity/graph.hpp"

#include <atomic>
#include <limits>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

namespace {

std::atomic<std::uint64_t> next_graph_id{1};

}  // namespace

template <typename T>
BasicGraph<T>::BasicGraph() : id_(next_graph_id.fetch_add(1)) {}

template <typename T>
Var BasicGraph<T>::push(Node n) {
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) throw GraphError("graph is full");
  if (backward_done_) throw GraphError("cannot record onto a graph after backward");
  nodes_.push_back(std::move(n));
  return Var{id_, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var BasicGraph<T>::constant(TensorT value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var BasicGraph<T>::variable(TensorT value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var BasicGraph<T>::record(TensorT value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
const typename BasicGraph<T>::Node& BasicGraph<T>::node(Var v) const {
  if (v.graph_id != id_ || v.index >= nodes_.size()) {
    throw GraphError("variable was not recorded on this graph");
  }
  return nodes_[v.index];
}

template <typename T>
typename BasicGraph<T>::Node& BasicGraph<T>::node(Var v) {
  return const_cast<Node&>(static_cast<const BasicGraph&>(*this).node(v));
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
bool BasicGraph<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
bool BasicGraph<T>::has_grad(Var v) const {
  return node(v).has_grad;
}

template <typename T>
BasicTensor<T> BasicGraph<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return TensorT(n.value.shape());
}

template <typename T>
BasicTensor<T>* BasicGraph<T>::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = TensorT(n.value.shape());
    n.has_grad = true;
  }
  return &n.grad;
}

template <typename T>
void BasicGraph<T>::accumulate_grad(Var v, const TensorT& g) {
  TensorT* buf = grad_buffer(v);
  if (buf == nullptr) return;
  if (buf->size() != g.size()) throw DimensionError("gradient shape does not match value shape");
  T* dst = buf->raw();
  const T* src = g.raw();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

template <typename T>
const std::vector<Var>& BasicGraph<T>::inputs(Var v) const {
  return node(v).inputs;
}

template <typename T>
void BasicGraph<T>::backward(Var loss) {
  Node& root = node(loss);
  if (backward_done_) throw GraphError("backward already ran on this graph");
  if (root.value.size() != 1) throw ArgumentError("backward requires a scalar loss");
  if (!root.requires_grad) throw GraphError("loss does not depend on any variable");
  backward_done_ = true;
  grad_buffer(loss)->fill(T{1});
  for (std::int64_t i = loss.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, Var{id_, static_cast<std::uint32_t>(i)});
  }
}

template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace relu_sparsity
