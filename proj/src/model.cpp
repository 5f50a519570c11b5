#include "relu_sparsity/model.hpp"

#include <cmath>
#include <random>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/ops.hpp"

namespace relu_sparsity {

void ModelConfig::validate() const {
  if (n_layers == 0) throw ConfigError("n_layers must be >= 1");
  if (d_model == 0 || n_heads == 0) throw ConfigError("d_model and n_heads must be >= 1");
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (d_hidden.size() != n_layers) {
    throw ConfigError("d_hidden needs one entry per layer (" + std::to_string(n_layers) + "), got " +
                      std::to_string(d_hidden.size()));
  }
  for (std::size_t h : d_hidden)
    if (h == 0) throw ConfigError("every d_hidden entry must be >= 1");
  if (vocab_size == 0) throw ConfigError("vocab_size must be >= 1");
  if (seq_len == 0) throw ConfigError("seq_len must be >= 1");
}

template <typename T>
std::size_t BasicParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const BasicTensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
std::size_t BasicParams<T>::tensor_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const BasicTensor<T>&) { ++n; });
  return n;
}

template struct BasicParams<float>;
template struct BasicParams<double>;

namespace {

template <typename T>
BasicTensor<T> normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  BasicTensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

// LeCun normal: N(0, 1/fan_in) where fan_in is the input extent of the kernel.
template <typename T>
BasicTensor<T> lecun_normal(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return normal_tensor<T>(Shape{fan_in, fan_out}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace

template <typename T>
BasicParams<T> init_params(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t d = config.d_model;
  const bool lecun_all = config.init == InitScheme::kLecunAll;
  auto other_kernel = [&](std::size_t fan_in, std::size_t fan_out) {
    return lecun_all ? lecun_normal<T>(fan_in, fan_out, rng) : normal_tensor<T>(Shape{fan_in, fan_out}, 0.02, rng);
  };
  // Embedding tables map ids to d-dimensional features; their fan_in is d.
  auto embedding_table = [&](std::size_t rows) {
    return normal_tensor<T>(Shape{rows, d}, lecun_all ? 1.0 / std::sqrt(static_cast<double>(d)) : 0.02, rng);
  };

  BasicParams<T> p;
  p.token_embedding = embedding_table(config.vocab_size);
  p.position_embedding = embedding_table(config.seq_len);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::size_t h = config.d_hidden[l];
    BasicLayerParams<T> L;
    L.ln1_gain = BasicTensor<T>(Shape{d}, T{1});
    L.ln1_bias = BasicTensor<T>(Shape{d});
    L.w_qkv = other_kernel(d, 3 * d);
    L.b_qkv = BasicTensor<T>(Shape{3 * d});
    L.w_proj = other_kernel(d, d);
    L.b_proj = BasicTensor<T>(Shape{d});
    L.ln2_gain = BasicTensor<T>(Shape{d}, T{1});
    L.ln2_bias = BasicTensor<T>(Shape{d});
    L.w_in = lecun_normal<T>(d, h, rng);
    L.b_in = BasicTensor<T>(Shape{h});
    L.w_out = lecun_normal<T>(h, d, rng);
    L.b_out = BasicTensor<T>(Shape{d});
    p.layers.push_back(std::move(L));
  }
  p.lnf_gain = BasicTensor<T>(Shape{d}, T{1});
  p.lnf_bias = BasicTensor<T>(Shape{d});
  p.w_unembed = other_kernel(d, config.vocab_size);
  p.b_unembed = BasicTensor<T>(Shape{config.vocab_size});
  return p;
}

template <typename T>
ParamVars bind_params(BasicGraph<T>& g, const BasicParams<T>& params) {
  ParamVars vars;
  params.visit([&](const std::string&, const BasicTensor<T>& t) { vars.all.push_back(g.variable(t)); });
  return vars;
}

namespace {

constexpr std::size_t kPerLayer = 12;
constexpr std::size_t kLeading = 2;

}  // namespace

template <typename T>
ForwardVars<T> forward(BasicGraph<T>& g, const ModelConfig& config, const ParamVars& vars,
                       const TokenBatch& batch, const MaskSpec* mask) {
  const std::size_t expected = kLeading + kPerLayer * config.n_layers + 4;
  if (vars.all.size() != expected) throw DimensionError("parameter set does not match model config");
  if (batch.batch == 0 || batch.seq == 0) throw DimensionError("token batch is empty");
  if (batch.seq > config.seq_len) {
    throw DimensionError("sequence length " + std::to_string(batch.seq) + " exceeds model seq_len " +
                         std::to_string(config.seq_len));
  }
  if (batch.inputs.size() != batch.batch * batch.seq) throw DimensionError("token batch size mismatch");
  if (mask != nullptr) mask->check_dims(config.d_hidden);

  std::vector<std::int32_t> positions(batch.batch * batch.seq);
  for (std::size_t b = 0; b < batch.batch; ++b)
    for (std::size_t t = 0; t < batch.seq; ++t) positions[b * batch.seq + t] = static_cast<std::int32_t>(t);

  auto P = [&](std::size_t i) { return vars.all[i]; };
  Var x = ops::add(g, ops::embedding(g, P(0), std::span<const std::int32_t>(batch.inputs)),
                   ops::embedding(g, P(1), std::span<const std::int32_t>(positions)));

  ForwardVars<T> out;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::size_t o = kLeading + l * kPerLayer;
    Var a = ops::layer_norm(g, x, P(o + 0), P(o + 1));
    a = ops::add_bias(g, ops::matmul(g, a, P(o + 2)), P(o + 3));
    a = ops::causal_self_attention(g, a, batch.batch, batch.seq, config.n_heads);
    a = ops::add_bias(g, ops::matmul(g, a, P(o + 4)), P(o + 5));
    x = ops::add(g, x, a);

    Var m = ops::layer_norm(g, x, P(o + 6), P(o + 7));
    m = ops::relu(g, ops::add_bias(g, ops::matmul(g, m, P(o + 8)), P(o + 9)));
    if (mask != nullptr) {
      std::vector<T> keep(config.d_hidden[l]);
      for (std::size_t u = 0; u < keep.size(); ++u) keep[u] = mask->layers[l][u] ? T{1} : T{0};
      m = ops::column_mask(g, m, std::span<const T>(keep));
    }
    out.hidden.push_back(m);
    m = ops::add_bias(g, ops::matmul(g, m, P(o + 10)), P(o + 11));
    x = ops::add(g, x, m);
  }
  const std::size_t f = kLeading + config.n_layers * kPerLayer;
  Var h = ops::layer_norm(g, x, P(f + 0), P(f + 1));
  out.logits = ops::add_bias(g, ops::matmul(g, h, P(f + 2)), P(f + 3));
  return out;
}

std::vector<ActivationTap> extract_taps(const Graph& g, const ForwardVars<float>& fv, const TokenBatch& batch) {
  std::vector<ActivationTap> taps;
  for (std::size_t l = 0; l < fv.hidden.size(); ++l) {
    const Tensor& v = g.value(fv.hidden[l]);
    taps.push_back(ActivationTap{l, v.reshaped(Shape{batch.batch, batch.seq, v.last_dim()})});
  }
  return taps;
}

ForwardOutput run_forward(const ModelConfig& config, const Params& params, const TokenBatch& batch,
                          const MaskSpec* mask) {
  Graph g;
  ParamVars pv;
  // Constants: no gradient bookkeeping for pure inference.
  params.visit([&](const std::string&, const Tensor& t) { pv.all.push_back(g.constant(t)); });
  auto fv = forward<float>(g, config, pv, batch, mask);
  ForwardOutput out;
  out.logits = g.value(fv.logits);
  out.taps = extract_taps(g, fv, batch);
  return out;
}

template BasicParams<float> init_params<float>(const ModelConfig&);
template BasicParams<double> init_params<double>(const ModelConfig&);
template ParamVars bind_params<float>(Graph&, const Params&);
template ParamVars bind_params<double>(BasicGraph<double>&, const BasicParams<double>&);
template ForwardVars<float> forward<float>(Graph&, const ModelConfig&, const ParamVars&, const TokenBatch&,
                                           const MaskSpec*);
template ForwardVars<double> forward<double>(BasicGraph<double>&, const ModelConfig&, const ParamVars&,
                                             const TokenBatch&, const MaskSpec*);

}  // namespace relu_sparsity
