#pragma once

namespace relu_sparsity {

// Training allocates and frees the same large tensors every step. With
// glibc's defaults those go through mmap and are page-faulted in again each
// time; raising the mmap and trim thresholds keeps them on the heap. No-op
// on other C libraries. Call once at program start.
void tune_allocator_for_training();

}  // namespace relu_sparsity
