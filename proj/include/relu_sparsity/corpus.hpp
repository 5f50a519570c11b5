#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "relu_sparsity/model.hpp"

namespace relu_sparsity {

enum class TokenizationMode { kByte, kChar };

std::string_view to_string(TokenizationMode mode);
TokenizationMode parse_tokenization_mode(std::string_view text);  // ConfigError if unknown

// Token ids of a text. Byte mode: one id per byte (vocab 256). Char mode: one
// id per UTF-8 code point, ids are indices into the sorted alphabet of code
// points observed in the text.
struct Tokenized {
  std::vector<std::int32_t> ids;
  std::size_t vocab_size = 0;
  std::vector<char32_t> alphabet;  // char mode only
};

Tokenized tokenize(std::string_view text, TokenizationMode mode);

// Token stream split into a training prefix (first 95%) and a held-out tail,
// both packed into fixed windows of seq_len inputs. A window's targets are
// the next tokens of the stream.
class Corpus {
 public:
  static constexpr std::size_t kTrainPercent = 95;

  Corpus(Tokenized tokens, std::size_t seq_len);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t seq_len() const noexcept { return seq_len_; }
  std::size_t token_count() const noexcept { return ids_.size(); }
  std::size_t train_token_count() const noexcept { return n_train_; }
  std::size_t train_windows() const noexcept { return n_train_ / seq_len_; }
  std::size_t val_windows() const noexcept;
  const std::vector<std::int32_t>& ids() const noexcept { return ids_; }

  // Training batch of step `step`: `batch` windows drawn with replacement from
  // a generator seeded by (seed, step), so data order depends only on those.
  TokenBatch train_batch(std::uint64_t seed, std::int64_t step, std::size_t batch) const;
  // The first min(max_windows, val_windows()) held-out windows in batches of `batch`.
  std::vector<TokenBatch> val_batches(std::size_t max_windows, std::size_t batch) const;

 private:
  TokenBatch windows(std::size_t first_token, std::span<const std::size_t> starts) const;

  std::vector<std::int32_t> ids_;
  std::size_t vocab_size_ = 0;
  std::size_t seq_len_ = 0;
  std::size_t n_train_ = 0;
};

// Reads and tokenizes a plaintext file. IngestionError if it is unreadable,
// empty, or too short for one training and one held-out window.
Corpus ingest_corpus(const std::filesystem::path& path, TokenizationMode mode, std::size_t seq_len);

// Deterministic English-like plaintext (sentences over a Zipf-weighted
// word list with a small part-of-speech grammar), about `bytes` long.
std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed);

}  // namespace relu_sparsity
