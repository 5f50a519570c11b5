#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relu_sparsity/activation_tap.hpp"

namespace relu_sparsity {

enum class MaskOrigin : std::uint8_t { kAllOnes = 0, kActivity = 1, kRandom = 2 };

std::string_view to_string(MaskOrigin origin);

// Per-layer keep/drop vector over MLP hidden units, applied multiplicatively
// to post-ReLU activations.
struct MaskSpec {
  std::vector<std::vector<bool>> layers;
  MaskOrigin origin = MaskOrigin::kAllOnes;
  std::int64_t created_at_step = 0;
  std::uint64_t seed = 0;

  std::size_t cardinality(std::size_t layer) const;
  std::vector<std::size_t> cardinalities() const;
  // Throws DimensionError unless there is one vector per layer of the given width.
  void check_dims(std::span<const std::size_t> hidden_dims) const;

  bool operator==(const MaskSpec&) const = default;
};

MaskSpec all_ones_mask(std::span<const std::size_t> hidden_dims);

// mask[l][u] = 1 iff unit u of layer l has any strictly positive value in taps[l].
MaskSpec activity_mask(std::span<const ActivationTap> taps, std::int64_t step = 0);

// Union of activity masks over several batches (each entry is one batch's taps).
MaskSpec activity_mask_union(std::span<const std::vector<ActivationTap>> batches, std::int64_t step = 0);

// Uniformly random subset of exactly cardinalities[l] units per layer, fixed by seed.
MaskSpec random_mask(std::span<const std::size_t> cardinalities, std::span<const std::size_t> hidden_dims,
                     std::uint64_t seed, std::int64_t step = 0);

// Versioned binary container: magic "RSMK", u32 version, origin, step, seed,
// then per layer a u32 length and the packed bits (LSB first).
void save_mask(const MaskSpec& mask, const std::filesystem::path& path);
MaskSpec load_mask(const std::filesystem::path& path);

}  // namespace relu_sparsity
