#include "relu_sparsity/checkpoint.hpp"

#include <fstream>

#include "relu_sparsity/binary_io.hpp"
#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

namespace {

constexpr char kMagic[5] = "RSCK";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& trailer, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open " + tmp.string() + " for writing");
    using namespace binary;
    write_magic(os, kMagic);
    write_u32(os, kVersion);
    const auto& m = state.model;
    for (std::uint64_t v : {m.n_layers, m.d_model, m.n_heads, m.vocab_size, m.seq_len}) write_u64(os, v);
    write_u64(os, m.seed);
    write_u8(os, static_cast<std::uint8_t>(m.init));
    for (std::size_t h : m.d_hidden) write_u64(os, h);
    const auto& s = state.schedule;
    write_i64(os, s.warmup_steps);
    write_f64(os, s.peak_lr);
    write_i64(os, s.total_steps);
    write_f64(os, s.final_lr_fraction);
    const auto& h = state.optimizer.hyper;
    for (double v : {h.beta1, h.beta2, h.eps, h.weight_decay}) write_f64(os, v);
    write_i64(os, state.optimizer.step);
    write_u32(os, static_cast<std::uint32_t>(state.params.tensor_count()));
    std::size_t i = 0;
    state.params.visit([&](const std::string& name, const Tensor& t) {
      write_string(os, name);
      write_u32(os, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) write_u64(os, d);
      write_f32s(os, t.data());
      write_f32s(os, state.optimizer.first_moment[i].data());
      write_f32s(os, state.optimizer.second_moment[i].data());
      ++i;
    });
    write_string(os, trailer);
    if (!os) throw FormatError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  using namespace binary;
  expect_magic(is, kMagic);
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  auto& m = ck.state.model;
  m.n_layers = read_u64(is);
  m.d_model = read_u64(is);
  m.n_heads = read_u64(is);
  m.vocab_size = read_u64(is);
  m.seq_len = read_u64(is);
  m.seed = read_u64(is);
  m.init = static_cast<InitScheme>(read_u8(is));
  if (m.n_layers > 4096) throw FormatError("implausible layer count in checkpoint");
  m.d_hidden.resize(m.n_layers);
  for (auto& h : m.d_hidden) h = read_u64(is);
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid model config: ") + e.what());
  }
  auto& s = ck.state.schedule;
  s.warmup_steps = read_i64(is);
  s.peak_lr = read_f64(is);
  s.total_steps = read_i64(is);
  s.final_lr_fraction = read_f64(is);
  AdamWConfig h;
  h.beta1 = read_f64(is);
  h.beta2 = read_f64(is);
  h.eps = read_f64(is);
  h.weight_decay = read_f64(is);
  const std::int64_t step = read_i64(is);

  // Shapes come from the config; the file must agree tensor by tensor.
  ck.state.params = init_params<float>(m);
  ck.state.optimizer = make_optimizer_state(ck.state.params, h);
  ck.state.optimizer.step = step;
  const std::uint32_t count = read_u32(is);
  if (count != ck.state.params.tensor_count()) throw FormatError("checkpoint tensor count mismatch");
  std::size_t i = 0;
  ck.state.params.visit([&](const std::string& name, Tensor& t) {
    const std::string stored = read_string(is);
    if (stored != name) throw FormatError("checkpoint tensor '" + stored + "' where '" + name + "' expected");
    const std::uint32_t rank = read_u32(is);
    Shape shape(rank);
    for (auto& d : shape) d = read_u64(is);
    if (shape != t.shape()) throw FormatError("checkpoint shape mismatch for " + name);
    read_f32s(is, t.data());
    read_f32s(is, ck.state.optimizer.first_moment[i].data());
    read_f32s(is, ck.state.optimizer.second_moment[i].data());
    ++i;
  });
  ck.trailer = read_string(is);
  return ck;
}

}  // namespace relu_sparsity
