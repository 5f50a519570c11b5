#pragma once

#include <filesystem>
#include <string>

#include "relu_sparsity/trainer.hpp"

namespace relu_sparsity {

// Checkpoint container, all integers and floats little-endian:
//
//   "RSCK" u32 version(=1)
//   model:     u64 n_layers d_model n_heads vocab_size seq_len seed, u8 init, u64 d_hidden[n_layers]
//   schedule:  i64 warmup_steps, f64 peak_lr, i64 total_steps, f64 final_lr_fraction
//   adamw:     f64 beta1 beta2 eps weight_decay
//   i64 optimizer step
//   u32 tensor count, then per tensor:
//     u64-length name, u32 rank, u64 dims[rank], f32 value[n], f32 first_moment[n], f32 second_moment[n]
//   u64-length opaque trailer (run bookkeeping owned by the caller)
struct Checkpoint {
  TrainState state;
  std::string trailer;
};

void save_checkpoint(const TrainState& state, const std::string& trailer, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relu_sparsity
