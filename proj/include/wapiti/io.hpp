#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wapiti/core.hpp"

namespace wapiti {

// Checkpoint binary: magic "WAPC", u32 version 1, u32 vocab_size, u32 order,
// then vocab_size^(order+1) little-endian IEEE-754 doubles, row-major.
// Vocab tokens and provenance go to a JSON sidecar at path + ".json".
// Deltas use the same layout with magic "WAPD".
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

void save_delta(const std::string& path, const ParamDelta& d);
ParamDelta load_delta(const std::string& path);

// GenerationRecord JSON-lines. Keys are serialized as decimal strings;
// every line carries the emitting run's config hash.
void save_records(const std::string& path,
                  const std::vector<GenerationRecord>& records,
                  const std::string& config_hash);
std::vector<GenerationRecord> load_records(const std::string& path);

// Config hash of the first record line, empty if the file has none.
std::string records_config_hash(const std::string& path);

// FNV-1a 64 over the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

// CSV with a leading "# config_hash=<hex>" line.
void save_csv(const std::string& path, const std::string& config_hash,
              const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows);

struct CsvFile {
  std::string config_hash;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvFile load_csv(const std::string& path);

// Accepts decimal or 0x-prefixed hex.
uint64_t parse_u64(const std::string& text);

nlohmann::json watermark_to_json(const WatermarkConfig& cfg);
WatermarkConfig watermark_from_json(const nlohmann::json& j);

}  // namespace wapiti
