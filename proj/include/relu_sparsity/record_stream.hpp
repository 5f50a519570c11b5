#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relu_sparsity/lifecycle.hpp"
#include "relu_sparsity/metrics.hpp"

namespace relu_sparsity {

// One line per (step, layer):
//   {"step":..,"layer":..,"token_use":..,"seq_use":..,"batch_use":..,
//    "p50":..,"p65":..,"p75":..,"p90":..,"config_hash":".."}
// Undefined percentiles are written as null. Doubles round-trip exactly.
nlohmann::json record_to_json(const SparsityRecord& record, const std::string& config_hash);
SparsityRecord record_from_json(const nlohmann::json& j);

struct LossPoint {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool operator==(const LossPoint&) const = default;
};

// Appends JSON lines, flushing after every write so a crash keeps every
// completed line.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  // truncate=false appends to an existing file.
  JsonlWriter(const std::filesystem::path& path, bool truncate);
  void write(const nlohmann::json& line);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

// Reads every line of a JSONL file. A trailing partial line (no newline) is
// ignored; any other malformed line throws FormatError.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

std::vector<SparsityRecord> read_records(const std::filesystem::path& path, std::string* config_hash = nullptr);
std::vector<LossPoint> read_losses(const std::filesystem::path& path);

nlohmann::json lifecycle_to_json(const NeuronLifecycle& lifecycle);
NeuronLifecycle lifecycle_from_json(const nlohmann::json& j);

}  // namespace relu_sparsity
