#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relu_sparsity/activation_tap.hpp"
#include "relu_sparsity/graph.hpp"
#include "relu_sparsity/masks.hpp"
#include "relu_sparsity/tensor.hpp"

namespace relu_sparsity {

enum class InitScheme {
  kLecunAll,      // LeCun normal for every kernel and embedding
  kLecunMlpOnly,  // LeCun normal for MLP kernels, N(0, 0.02^2) elsewhere
};

struct ModelConfig {
  std::size_t n_layers = 6;
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::vector<std::size_t> d_hidden = std::vector<std::size_t>(6, 512);
  std::size_t vocab_size = 256;
  std::size_t seq_len = 128;
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::kLecunAll;

  // Throws ConfigError on a malformed configuration.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct BasicLayerParams {
  BasicTensor<T> ln1_gain, ln1_bias;
  BasicTensor<T> w_qkv, b_qkv;    // [d, 3d], [3d]
  BasicTensor<T> w_proj, b_proj;  // [d, d], [d]
  BasicTensor<T> ln2_gain, ln2_bias;
  BasicTensor<T> w_in, b_in;      // [d, hidden], [hidden]
  BasicTensor<T> w_out, b_out;    // [hidden, d], [d]

  bool operator==(const BasicLayerParams&) const = default;
};

template <typename T>
struct BasicParams {
  BasicTensor<T> token_embedding;     // [vocab, d]
  BasicTensor<T> position_embedding;  // [seq_len, d]
  std::vector<BasicLayerParams<T>> layers;
  BasicTensor<T> lnf_gain, lnf_bias;
  BasicTensor<T> w_unembed, b_unembed;  // [d, vocab], [vocab]

  // Visits every parameter tensor in a fixed order with a stable name.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const;
  std::size_t tensor_count() const;

  bool operator==(const BasicParams&) const = default;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f(std::string("token_embedding"), self.token_embedding);
    f(std::string("position_embedding"), self.position_embedding);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& L = self.layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "ln1_gain", L.ln1_gain);
      f(p + "ln1_bias", L.ln1_bias);
      f(p + "w_qkv", L.w_qkv);
      f(p + "b_qkv", L.b_qkv);
      f(p + "w_proj", L.w_proj);
      f(p + "b_proj", L.b_proj);
      f(p + "ln2_gain", L.ln2_gain);
      f(p + "ln2_bias", L.ln2_bias);
      f(p + "mlp.w_in", L.w_in);
      f(p + "mlp.b_in", L.b_in);
      f(p + "mlp.w_out", L.w_out);
      f(p + "mlp.b_out", L.b_out);
    }
    f(std::string("lnf_gain"), self.lnf_gain);
    f(std::string("lnf_bias"), self.lnf_bias);
    f(std::string("w_unembed"), self.w_unembed);
    f(std::string("b_unembed"), self.b_unembed);
  }
};

using Params = BasicParams<float>;

// Token ids for one step: inputs and next-token targets, both (batch, seq) row-major.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> targets;
};

template <typename T>
BasicParams<T> init_params(const ModelConfig& config);

// Parameters registered as graph variables, same layout as BasicParams.
struct ParamVars {
  std::vector<Var> all;  // in visit() order
};

template <typename T>
ParamVars bind_params(BasicGraph<T>& g, const BasicParams<T>& params);

template <typename T>
struct ForwardVars {
  Var logits;               // [batch*seq, vocab]
  std::vector<Var> hidden;  // per layer, post-ReLU (and post-mask) [batch*seq, hidden]
};

// Pre-norm decoder: x = tok + pos; per block x += attn(ln1(x)); x += mlp(ln2(x));
// logits = ln_f(x) W_u + b_u. The MLP is relu(x W_in + b_in) [* mask] W_out + b_out.
template <typename T>
ForwardVars<T> forward(BasicGraph<T>& g, const ModelConfig& config, const ParamVars& vars,
                       const TokenBatch& batch, const MaskSpec* mask = nullptr);

struct ForwardOutput {
  Tensor logits;
  std::vector<ActivationTap> taps;
};

// Graph-free convenience wrapper (float): logits plus one tap per layer.
ForwardOutput run_forward(const ModelConfig& config, const Params& params, const TokenBatch& batch,
                          const MaskSpec* mask = nullptr);

std::vector<ActivationTap> extract_taps(const Graph& g, const ForwardVars<float>& fv, const TokenBatch& batch);

extern template struct BasicParams<float>;
extern template struct BasicParams<double>;

}  // namespace relu_sparsity
