#include "relu_sparsity/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

std::string_view to_string(TokenizationMode mode) {
  return mode == TokenizationMode::kByte ? "byte" : "char";
}

TokenizationMode parse_tokenization_mode(std::string_view text) {
  if (text == "byte") return TokenizationMode::kByte;
  if (text == "char") return TokenizationMode::kChar;
  throw ConfigError("unknown tokenization mode '" + std::string(text) + "' (expected byte or char)");
}

namespace {

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw IngestionError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) throw IngestionError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) throw IngestionError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

}  // namespace

Tokenized tokenize(std::string_view text, TokenizationMode mode) {
  Tokenized t;
  if (mode == TokenizationMode::kByte) {
    t.vocab_size = 256;
    t.ids.reserve(text.size());
    for (char c : text) t.ids.push_back(static_cast<std::int32_t>(static_cast<unsigned char>(c)));
    return t;
  }
  const auto cps = decode_utf8(text);
  t.alphabet = cps;
  std::sort(t.alphabet.begin(), t.alphabet.end());
  t.alphabet.erase(std::unique(t.alphabet.begin(), t.alphabet.end()), t.alphabet.end());
  t.vocab_size = t.alphabet.size();
  t.ids.reserve(cps.size());
  for (char32_t cp : cps) {
    const auto it = std::lower_bound(t.alphabet.begin(), t.alphabet.end(), cp);
    t.ids.push_back(static_cast<std::int32_t>(it - t.alphabet.begin()));
  }
  return t;
}

Corpus::Corpus(Tokenized tokens, std::size_t seq_len)
    : ids_(std::move(tokens.ids)), vocab_size_(tokens.vocab_size), seq_len_(seq_len) {
  if (ids_.empty()) throw IngestionError("corpus is empty");
  if (seq_len_ == 0) throw ArgumentError("seq_len must be >= 1");
  n_train_ = ids_.size() * kTrainPercent / 100;
  if (train_windows() == 0) {
    throw IngestionError("corpus of " + std::to_string(ids_.size()) +
                         " tokens is shorter than one training sequence of " + std::to_string(seq_len_));
  }
  if (val_windows() == 0) {
    throw IngestionError("held-out split of " + std::to_string(ids_.size() - n_train_) +
                         " tokens is shorter than one sequence of " + std::to_string(seq_len_));
  }
}

std::size_t Corpus::val_windows() const noexcept {
  const std::size_t held_out = ids_.size() - n_train_;
  return held_out == 0 ? 0 : (held_out - 1) / seq_len_;
}

TokenBatch Corpus::windows(std::size_t first_token, std::span<const std::size_t> starts) const {
  TokenBatch b;
  b.batch = starts.size();
  b.seq = seq_len_;
  b.inputs.reserve(b.batch * b.seq);
  b.targets.reserve(b.batch * b.seq);
  for (std::size_t w : starts) {
    const std::size_t s = first_token + w * seq_len_;
    b.inputs.insert(b.inputs.end(), ids_.begin() + static_cast<std::ptrdiff_t>(s),
                    ids_.begin() + static_cast<std::ptrdiff_t>(s + seq_len_));
    b.targets.insert(b.targets.end(), ids_.begin() + static_cast<std::ptrdiff_t>(s + 1),
                     ids_.begin() + static_cast<std::ptrdiff_t>(s + seq_len_ + 1));
  }
  return b;
}

TokenBatch Corpus::train_batch(std::uint64_t seed, std::int64_t step, std::size_t batch) const {
  if (batch == 0) throw ArgumentError("batch size must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32),
                    0x64617461u};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> starts(batch);
  // Modulo mapping rather than a std distribution: the latter is not
  // specified bit-for-bit across standard libraries.
  for (auto& s : starts) s = static_cast<std::size_t>(rng() % train_windows());
  return windows(0, starts);
}

std::vector<TokenBatch> Corpus::val_batches(std::size_t max_windows, std::size_t batch) const {
  if (batch == 0) throw ArgumentError("batch size must be >= 1");
  const std::size_t n = std::min(max_windows, val_windows());
  std::vector<TokenBatch> out;
  for (std::size_t w0 = 0; w0 < n; w0 += batch) {
    std::vector<std::size_t> starts;
    for (std::size_t w = w0; w < std::min(n, w0 + batch); ++w) starts.push_back(w);
    out.push_back(windows(n_train_, starts));
  }
  return out;
}

Corpus ingest_corpus(const std::filesystem::path& path, TokenizationMode mode, std::size_t seq_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read corpus file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty()) throw IngestionError("corpus file " + path.string() + " is empty");
  return Corpus(tokenize(text, mode), seq_len);
}

namespace {

// Small closed-class lists plus open-class stems; enough structure for a
// byte-level model to learn spelling, agreement-like patterns and punctuation.
constexpr std::array kDeterminers = {"the", "a", "this", "that", "every", "some", "no", "each", "their", "our"};
constexpr std::array kPrepositions = {"in", "on", "under", "over", "near", "with", "without", "from", "into",
                                      "after", "before", "across", "behind", "beside"};
constexpr std::array kConjunctions = {"and", "but", "while", "because", "although", "so", "when", "until"};
constexpr std::array kPronouns = {"she", "he", "they", "we", "it", "you", "someone", "nobody"};
constexpr std::array kNouns = {
    "river", "garden", "teacher", "window", "city", "engine", "letter", "forest", "child", "market",
    "island", "doctor", "bridge", "kitchen", "mountain", "station", "farmer", "painting", "storm", "library",
    "village", "student", "ocean", "machine", "captain", "road", "school", "winter", "song", "harbor",
    "stone", "horse", "table", "mirror", "lantern", "field", "castle", "door", "cloud", "sister",
    "brother", "clock", "bird", "ship", "tower", "candle", "wall", "king", "queen", "friend",
    "neighbor", "morning", "evening", "paper", "circle", "question", "answer", "story", "music", "voice"};
constexpr std::array kVerbs = {
    "watched", "found", "carried", "opened", "followed", "painted", "heard", "built", "lost", "remembered",
    "crossed", "visited", "repaired", "described", "noticed", "pulled", "measured", "wrote", "closed", "moved",
    "touched", "counted", "explained", "answered", "wanted", "needed", "saw", "kept", "left", "brought"};
constexpr std::array kIntransitive = {"slept", "waited", "laughed", "arrived", "vanished", "smiled",
                                      "listened", "trembled", "shouted", "returned", "rested", "wandered"};
constexpr std::array kAdjectives = {
    "old", "quiet", "bright", "small", "heavy", "green", "cold", "strange", "careful", "broken",
    "golden", "narrow", "ancient", "gentle", "empty", "famous", "hidden", "wooden", "silver", "distant"};
constexpr std::array kAdverbs = {"slowly", "quickly", "quietly", "suddenly", "carefully", "again", "often",
                                 "never", "always", "finally"};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  // Zipf(1) over list positions so a few words dominate, as in real text.
  template <std::size_t N>
  const char* zipf(const std::array<const char*, N>& words) {
    static const auto cdf = [] {
      std::array<double, N> c{};
      double total = 0.0;
      for (std::size_t i = 0; i < N; ++i) total += 1.0 / static_cast<double>(i + 1);
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) c[i] = (acc += 1.0 / static_cast<double>(i + 1) / total);
      return c;
    }();
    const double u = uniform();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return words[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), N - 1)];
  }

  void noun_phrase(std::vector<std::string>& w) {
    w.emplace_back(zipf(kDeterminers));
    if (uniform() < 0.4) w.emplace_back(zipf(kAdjectives));
    std::string noun = zipf(kNouns);
    if (uniform() < 0.2) noun += "s";
    w.push_back(std::move(noun));
    if (uniform() < 0.2) {
      w.emplace_back(zipf(kPrepositions));
      w.emplace_back(zipf(kDeterminers));
      w.emplace_back(zipf(kNouns));
    }
  }

  void clause(std::vector<std::string>& w) {
    if (uniform() < 0.3) {
      w.emplace_back(zipf(kPronouns));
    } else {
      noun_phrase(w);
    }
    if (uniform() < 0.15) w.emplace_back(zipf(kAdverbs));
    if (uniform() < 0.3) {
      w.emplace_back(zipf(kIntransitive));
    } else {
      w.emplace_back(zipf(kVerbs));
      noun_phrase(w);
    }
    if (uniform() < 0.35) {
      w.emplace_back(zipf(kPrepositions));
      noun_phrase(w);
    }
  }

  std::string sentence() {
    std::vector<std::string> w;
    clause(w);
    if (uniform() < 0.35) {
      w.back() += ",";
      w.emplace_back(zipf(kConjunctions));
      clause(w);
    }
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i) s += ' ';
      s += w[i];
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    const double u = uniform();
    s += u < 0.85 ? "." : (u < 0.95 ? "?" : "!");
    return s;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed) {
  Generator gen(seed);
  std::string out;
  out.reserve(bytes + 256);
  std::size_t in_paragraph = 0;
  const std::size_t paragraph_len = 3;
  while (out.size() < bytes) {
    out += gen.sentence();
    if (++in_paragraph >= paragraph_len + gen.below(4)) {
      out += "\n\n";
      in_paragraph = 0;
    } else {
      out += ' ';
    }
  }
  out.resize(bytes);
  return out;
}

}  // namespace relu_sparsity
