#pragma once

#include <cstddef>

#include "relu_sparsity/tensor.hpp"

namespace relu_sparsity {

// Post-ReLU MLP hidden activations of one layer, captured between the two
// dense layers. values has shape (batch, sequence, hidden) and every entry is >= 0.
struct ActivationTap {
  std::size_t layer = 0;
  Tensor values;

  std::size_t batch() const { return values.dim(0); }
  std::size_t sequence() const { return values.dim(1); }
  std::size_t hidden() const { return values.dim(2); }
};

}  // namespace relu_sparsity
