#pragma once

#include <cstdint>
#include <span>

#include "relu_sparsity/graph.hpp"

namespace relu_sparsity::ops {

// a[m,k] x b[k,n]. Backward: da = dc * b^T, db = a^T * dc.
template <typename T>
Var matmul(BasicGraph<T>& g, Var a, Var b);

// Elementwise sum of two same-shaped tensors.
template <typename T>
Var add(BasicGraph<T>& g, Var a, Var b);

// x[..., n] + bias[n]; the only broadcast the library supports.
template <typename T>
Var add_bias(BasicGraph<T>& g, Var x, Var bias);

// max(0, x). Output entries are exactly +0.0 where x <= 0; the subgradient at 0 is 0.
template <typename T>
Var relu(BasicGraph<T>& g, Var x);

// x[..., n] * keep[n] with keep entries in {0, 1}. Units with keep = 0 are
// exactly zero and pass no gradient.
template <typename T>
Var column_mask(BasicGraph<T>& g, Var x, std::span<const T> keep);

// Normalizes each last-axis row to zero mean / unit variance, then gain * xhat + bias.
template <typename T>
Var layer_norm(BasicGraph<T>& g, Var x, Var gain, Var bias, T eps = T(1e-5));

// Rows of table[v, d] selected by ids -> [ids.size(), d].
template <typename T>
Var embedding(BasicGraph<T>& g, Var table, std::span<const std::int32_t> ids);

// Multi-head causal self-attention over a packed projection qkv[batch*seq, 3*d]
// laid out as [q | k | v]. Returns the concatenated heads [batch*seq, d].
template <typename T>
Var causal_self_attention(BasicGraph<T>& g, Var qkv, std::size_t batch, std::size_t seq,
                          std::size_t heads);

// Mean over rows of -log softmax(logits[row])[targets[row]], max-subtracted.
template <typename T>
Var softmax_cross_entropy(BasicGraph<T>& g, Var logits, std::span<const std::int32_t> targets);

// Sum of all elements -> scalar.
template <typename T>
Var sum(BasicGraph<T>& g, Var x);

}  // namespace relu_sparsity::ops
