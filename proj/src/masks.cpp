#include "relu_sparsity/masks.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "relu_sparsity/binary_io.hpp"
#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

namespace {

constexpr char kMaskMagic[5] = "RSMK";
constexpr std::uint32_t kMaskVersion = 1;

std::vector<bool> batch_active(const ActivationTap& tap) {
  const std::size_t hidden = tap.hidden();
  std::vector<bool> active(hidden, false);
  const std::size_t rows = tap.values.size() / hidden;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = tap.values.raw() + r * hidden;
    for (std::size_t u = 0; u < hidden; ++u)
      if (row[u] > 0.0f) active[u] = true;
  }
  return active;
}

}  // namespace

std::string_view to_string(MaskOrigin origin) {
  switch (origin) {
    case MaskOrigin::kAllOnes: return "all_ones";
    case MaskOrigin::kActivity: return "activity";
    case MaskOrigin::kRandom: return "random";
  }
  return "unknown";
}

std::size_t MaskSpec::cardinality(std::size_t layer) const {
  const auto& l = layers.at(layer);
  return static_cast<std::size_t>(std::count(l.begin(), l.end(), true));
}

std::vector<std::size_t> MaskSpec::cardinalities() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < layers.size(); ++l) out.push_back(cardinality(l));
  return out;
}

void MaskSpec::check_dims(std::span<const std::size_t> hidden_dims) const {
  if (layers.size() != hidden_dims.size()) {
    throw DimensionError("mask has " + std::to_string(layers.size()) + " layers, model has " +
                         std::to_string(hidden_dims.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].size() != hidden_dims[l]) {
      throw DimensionError("mask layer " + std::to_string(l) + " has " + std::to_string(layers[l].size()) +
                           " units, model has " + std::to_string(hidden_dims[l]));
    }
  }
}

MaskSpec all_ones_mask(std::span<const std::size_t> hidden_dims) {
  MaskSpec m;
  for (std::size_t h : hidden_dims) m.layers.emplace_back(h, true);
  return m;
}

MaskSpec activity_mask(std::span<const ActivationTap> taps, std::int64_t step) {
  MaskSpec m;
  m.origin = MaskOrigin::kActivity;
  m.created_at_step = step;
  for (const auto& tap : taps) m.layers.push_back(batch_active(tap));
  return m;
}

MaskSpec activity_mask_union(std::span<const std::vector<ActivationTap>> batches, std::int64_t step) {
  if (batches.empty()) throw ArgumentError("activity_mask_union needs at least one batch");
  MaskSpec m = activity_mask(batches.front(), step);
  std::vector<std::size_t> dims;
  for (const auto& l : m.layers) dims.push_back(l.size());
  for (std::size_t b = 1; b < batches.size(); ++b) {
    const MaskSpec next = activity_mask(batches[b], step);
    next.check_dims(dims);
    for (std::size_t l = 0; l < m.layers.size(); ++l)
      for (std::size_t u = 0; u < m.layers[l].size(); ++u)
        if (next.layers[l][u]) m.layers[l][u] = true;
  }
  return m;
}

MaskSpec random_mask(std::span<const std::size_t> cardinalities, std::span<const std::size_t> hidden_dims,
                     std::uint64_t seed, std::int64_t step) {
  if (cardinalities.size() != hidden_dims.size()) {
    throw ArgumentError("one cardinality per layer is required");
  }
  MaskSpec m;
  m.origin = MaskOrigin::kRandom;
  m.created_at_step = step;
  m.seed = seed;
  for (std::size_t l = 0; l < hidden_dims.size(); ++l) {
    if (cardinalities[l] > hidden_dims[l]) {
      throw ArgumentError("cardinality " + std::to_string(cardinalities[l]) + " exceeds hidden width " +
                          std::to_string(hidden_dims[l]) + " in layer " + std::to_string(l));
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(l), 0x6d61736bu};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> units(hidden_dims[l]);
    std::iota(units.begin(), units.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (std::size_t i = 0; i < cardinalities[l]; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, units.size() - 1);
      std::swap(units[i], units[pick(rng)]);
    }
    std::vector<bool> keep(hidden_dims[l], false);
    for (std::size_t i = 0; i < cardinalities[l]; ++i) keep[units[i]] = true;
    m.layers.push_back(std::move(keep));
  }
  return m;
}

void save_mask(const MaskSpec& mask, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  binary::write_magic(os, kMaskMagic);
  binary::write_u32(os, kMaskVersion);
  binary::write_u8(os, static_cast<std::uint8_t>(mask.origin));
  binary::write_i64(os, mask.created_at_step);
  binary::write_u64(os, mask.seed);
  binary::write_u32(os, static_cast<std::uint32_t>(mask.layers.size()));
  for (const auto& layer : mask.layers) {
    binary::write_u32(os, static_cast<std::uint32_t>(layer.size()));
    for (std::size_t byte = 0; byte < (layer.size() + 7) / 8; ++byte) {
      std::uint8_t bits = 0;
      for (std::size_t b = 0; b < 8 && byte * 8 + b < layer.size(); ++b)
        if (layer[byte * 8 + b]) bits |= static_cast<std::uint8_t>(1u << b);
      binary::write_u8(os, bits);
    }
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

MaskSpec load_mask(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  binary::expect_magic(is, kMaskMagic);
  const std::uint32_t version = binary::read_u32(is);
  if (version != kMaskVersion) throw FormatError("unsupported mask version " + std::to_string(version));
  MaskSpec m;
  const std::uint8_t origin = binary::read_u8(is);
  if (origin > 2) throw FormatError("unknown mask origin");
  m.origin = static_cast<MaskOrigin>(origin);
  m.created_at_step = binary::read_i64(is);
  m.seed = binary::read_u64(is);
  const std::uint32_t n_layers = binary::read_u32(is);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t n = binary::read_u32(is);
    std::vector<bool> layer(n, false);
    for (std::size_t byte = 0; byte < (n + 7) / 8; ++byte) {
      const std::uint8_t bits = binary::read_u8(is);
      for (std::size_t b = 0; b < 8 && byte * 8 + b < n; ++b) layer[byte * 8 + b] = (bits >> b) & 1u;
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace relu_sparsity
