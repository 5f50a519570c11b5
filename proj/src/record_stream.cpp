#include "relu_sparsity/record_stream.hpp"

#include <cmath>
#include <sstream>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

using nlohmann::json;

namespace {

constexpr const char* kPercentileKeys[] = {"p50", "p65", "p75", "p90"};

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double number_or_nan(const json& j) {
  if (j.is_null()) return std::nan("");
  if (!j.is_number()) throw FormatError("expected a number or null in record");
  return j.get<double>();
}

std::string bits_to_string(const std::vector<bool>& bits) {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) s[i] = '1';
  return s;
}

std::vector<bool> bits_from_string(const std::string& s) {
  std::vector<bool> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw FormatError("bit string must contain only 0 and 1");
    bits[i] = s[i] == '1';
  }
  return bits;
}

}  // namespace

json record_to_json(const SparsityRecord& r, const std::string& config_hash) {
  json j{{"step", r.step},
         {"layer", r.layer},
         {"token_use", r.token_use},
         {"seq_use", r.seq_use},
         {"batch_use", r.batch_use}};
  for (std::size_t i = 0; i < r.percentile_use.size(); ++i) j[kPercentileKeys[i]] = number_or_null(r.percentile_use[i]);
  j["config_hash"] = config_hash;
  return j;
}

SparsityRecord record_from_json(const json& j) {
  try {
    SparsityRecord r;
    r.step = j.at("step").get<std::int64_t>();
    r.layer = j.at("layer").get<std::size_t>();
    r.token_use = j.at("token_use").get<double>();
    r.seq_use = j.at("seq_use").get<double>();
    r.batch_use = j.at("batch_use").get<double>();
    for (std::size_t i = 0; i < r.percentile_use.size(); ++i) r.percentile_use[i] = number_or_nan(j.at(kPercentileKeys[i]));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed metric record: ") + e.what());
  }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool truncate)
    : out_(path, truncate ? std::ios::trunc : std::ios::app) {
  if (!out_) throw FormatError("cannot open " + path.string() + " for writing");
}

void JsonlWriter::write(const json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<json> out;
  std::size_t pos = 0, lineno = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // partial final line from an interrupted write
    ++lineno;
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON line");
    }
  }
  return out;
}

std::vector<SparsityRecord> read_records(const std::filesystem::path& path, std::string* config_hash) {
  std::vector<SparsityRecord> out;
  for (const auto& j : read_jsonl(path)) {
    out.push_back(record_from_json(j));
    if (config_hash != nullptr && j.contains("config_hash")) *config_hash = j["config_hash"].get<std::string>();
  }
  return out;
}

std::vector<LossPoint> read_losses(const std::filesystem::path& path) {
  std::vector<LossPoint> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      out.push_back(LossPoint{j.at("step").get<std::int64_t>(), j.at("loss").get<double>(), j.at("lr").get<double>()});
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed loss record: ") + e.what());
    }
  }
  return out;
}

json lifecycle_to_json(const NeuronLifecycle& lc) {
  json j{{"layer", lc.layer()}, {"hidden", lc.hidden()}, {"observed", lc.observed()}};
  if (lc.observed()) {
    j["first_step"] = lc.first_step();
    j["final_step"] = lc.final_step();
  }
  j["active_first"] = bits_to_string(lc.active_first());
  j["active_final"] = bits_to_string(lc.active_final());
  j["ever_on_after_off"] = bits_to_string(lc.ever_on_after_off());
  j["ever_off_after_on"] = bits_to_string(lc.ever_off_after_on());
  j["counts"] = {{"first", lc.count_first()},
                 {"final", lc.count_final()},
                 {"turned_on", lc.count_turned_on()},
                 {"turned_off", lc.count_turned_off()},
                 {"transient_off", lc.count_transient_off()},
                 {"transient_on", lc.count_transient_on()}};
  return j;
}

NeuronLifecycle lifecycle_from_json(const json& j) {
  try {
    const auto layer = j.at("layer").get<std::size_t>();
    const auto hidden = j.at("hidden").get<std::size_t>();
    if (!j.at("observed").get<bool>()) return NeuronLifecycle(layer, hidden);
    auto first = bits_from_string(j.at("active_first").get<std::string>());
    auto final_ = bits_from_string(j.at("active_final").get<std::string>());
    auto on = bits_from_string(j.at("ever_on_after_off").get<std::string>());
    auto off = bits_from_string(j.at("ever_off_after_on").get<std::string>());
    if (first.size() != hidden || final_.size() != hidden || on.size() != hidden || off.size() != hidden) {
      throw FormatError("lifecycle bit strings do not match hidden width");
    }
    return NeuronLifecycle::restore(layer, j.at("first_step").get<std::int64_t>(),
                                    j.at("final_step").get<std::int64_t>(), std::move(first), std::move(final_),
                                    std::move(on), std::move(off));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed lifecycle: ") + e.what());
  }
}

}  // namespace relu_sparsity
