#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "relu_sparsity/activation_tap.hpp"
#include "relu_sparsity/config.hpp"
#include "relu_sparsity/corpus.hpp"
#include "relu_sparsity/svg_chart.hpp"

namespace relu_sparsity::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("relu_sparsity_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Tap of the given shape; each entry is zero with probability p_zero, else
// uniform in (0, 1] (or exactly 1 when binary).
inline ActivationTap random_tap(std::mt19937_64& rng, std::size_t batch, std::size_t seq, std::size_t hidden,
                                double p_zero, bool binary = false, std::size_t layer = 0) {
  ActivationTap tap;
  tap.layer = layer;
  tap.values = Tensor({batch, seq, hidden});
  std::bernoulli_distribution zero(p_zero);
  std::uniform_real_distribution<float> mag(0.0f, 1.0f);
  for (auto& v : tap.values.data()) {
    if (zero(rng)) {
      v = 0.0f;
    } else {
      v = binary ? 1.0f : std::max(mag(rng), 1e-6f);
    }
  }
  return tap;
}

// Small but complete run config over a synthetic corpus written into dir.
inline ExperimentConfig tiny_config(const std::filesystem::path& dir, std::int64_t total_steps = 20) {
  const auto corpus = dir / "corpus.txt";
  if (!std::filesystem::exists(corpus)) write_text_file(corpus, synthetic_corpus(40000, 7));
  ExperimentConfig c;
  c.model.n_layers = 2;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.d_hidden = {32, 32};
  c.model.seq_len = 16;
  c.model.vocab_size = 0;
  c.batch_size = 4;
  c.total_steps = total_steps;
  c.metric_every = 5;
  c.checkpoint_every = 10;
  c.eval_windows = 8;
  c.corpus.path = corpus.string();
  c.output_dir = (dir / "run").string();
  c.seed = 3;
  return c;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace relu_sparsity::testing
