#include "relu_sparsity/runtime.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace relu_sparsity {

void tune_allocator_for_training() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace relu_sparsity
