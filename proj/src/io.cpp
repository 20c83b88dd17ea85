#include "wapiti/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wapiti {

namespace {

using nlohmann::json;

constexpr uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  static_assert(std::endian::native == std::endian::little,
                "serialization assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void save_tensor(const std::string& path, const char magic[4],
                 uint32_t vocab_size, uint32_t order,
                 const std::vector<double>& values, const json& sidecar) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out.write(magic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, vocab_size);
  write_u32(out, order);
  write_doubles(out, values);
  if (!out) throw std::runtime_error("write failed: " + path);
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write sidecar: " + path + ".json");
  side << sidecar.dump(2) << '\n';
}

struct Tensor {
  uint32_t vocab_size = 0;
  uint32_t order = 0;
  std::vector<double> values;
  json sidecar;
};

Tensor load_tensor(const std::string& path, const char magic[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  char m[4];
  in.read(m, 4);
  if (!in || std::memcmp(m, magic, 4) != 0)
    throw ValidationError("bad magic bytes in " + path + ": expected " +
                          std::string(magic, 4));
  uint32_t version = read_u32(in);
  if (version != kFormatVersion)
    throw ValidationError("unsupported format version in " + path);
  Tensor t;
  t.vocab_size = read_u32(in);
  t.order = read_u32(in);
  if (!in) throw ValidationError("truncated header in " + path);
  if (t.vocab_size < 2) throw ValidationError("bad vocab_size in " + path);
  size_t rows = 1;
  for (uint32_t i = 0; i < t.order; ++i) {
    if (rows > (size_t{1} << 33) / t.vocab_size)
      throw ValidationError("tensor dimensions too large in " + path);
    rows *= t.vocab_size;
  }
  size_t n = rows * t.vocab_size;
  auto expected = static_cast<uintmax_t>(16 + n * sizeof(double));
  std::error_code ec;
  uintmax_t actual = std::filesystem::file_size(path, ec);
  if (ec || actual != expected)
    throw ValidationError("file size does not match header in " + path);
  t.values.resize(n);
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ValidationError("truncated tensor data in " + path);
  std::ifstream side(path + ".json");
  if (side) {
    try {
      side >> t.sidecar;
    } catch (const json::exception&) {
      throw ValidationError("malformed sidecar JSON: " + path + ".json");
    }
  }
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  c.validate();
  json side;
  side["vocab"] = c.vocab_tokens;
  side["provenance"] = c.metadata;
  save_tensor(path, "WAPC", c.vocab_size, c.order, c.logits, side);
}

Checkpoint load_checkpoint(const std::string& path) {
  Tensor t = load_tensor(path, "WAPC");
  Checkpoint c;
  c.vocab_size = t.vocab_size;
  c.order = t.order;
  c.logits = std::move(t.values);
  if (t.sidecar.contains("vocab"))
    c.vocab_tokens = t.sidecar["vocab"].get<std::vector<std::string>>();
  if (t.sidecar.contains("provenance"))
    c.metadata = t.sidecar["provenance"].get<std::map<std::string, std::string>>();
  c.validate();
  return c;
}

void save_delta(const std::string& path, const ParamDelta& d) {
  d.validate();
  json side;
  side["provenance"] = {{"base_id", d.base_id},
                        {"watermarked_id", d.watermarked_id}};
  save_tensor(path, "WAPD", d.vocab_size, d.order, d.values, side);
}

ParamDelta load_delta(const std::string& path) {
  Tensor t = load_tensor(path, "WAPD");
  ParamDelta d;
  d.vocab_size = t.vocab_size;
  d.order = t.order;
  d.values = std::move(t.values);
  if (t.sidecar.contains("provenance")) {
    const json& p = t.sidecar["provenance"];
    d.base_id = p.value("base_id", "");
    d.watermarked_id = p.value("watermarked_id", "");
  }
  d.validate();
  return d;
}

nlohmann::json watermark_to_json(const WatermarkConfig& cfg) {
  json j;
  j["scheme"] = scheme_name(cfg.scheme);
  j["k"] = cfg.k;
  if (cfg.scheme == Scheme::KGW) {
    j["gamma"] = cfg.gamma;
    j["delta"] = cfg.delta;
  }
  j["key"] = std::to_string(cfg.key);
  return j;
}

WatermarkConfig watermark_from_json(const nlohmann::json& j) {
  WatermarkConfig cfg;
  cfg.scheme = scheme_from_name(j.at("scheme").get<std::string>());
  cfg.k = j.at("k").get<uint32_t>();
  if (cfg.scheme == Scheme::KGW) {
    cfg.gamma = j.at("gamma").get<double>();
    cfg.delta = j.at("delta").get<double>();
  }
  cfg.key = parse_u64(j.at("key").get<std::string>());
  return cfg;
}

void save_records(const std::string& path,
                  const std::vector<GenerationRecord>& records,
                  const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  for (const GenerationRecord& r : records) {
    json j;
    j["prompt"] = r.prompt;
    j["completion"] = r.completion;
    j["model_id"] = r.model_id;
    j["seed"] = r.seed;
    if (r.watermark) j["watermark"] = watermark_to_json(*r.watermark);
    j["config_hash"] = config_hash;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<GenerationRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<GenerationRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ValidationError("malformed JSON at " + path + ":" +
                            std::to_string(lineno));
    }
    GenerationRecord r;
    try {
      r.prompt = j.at("prompt").get<TokenSeq>();
      r.completion = j.at("completion").get<TokenSeq>();
      r.model_id = j.value("model_id", "");
      r.seed = j.value("seed", uint64_t{0});
      if (j.contains("watermark"))
        r.watermark = watermark_from_json(j["watermark"]);
    } catch (const json::exception& e) {
      throw ValidationError("bad record at " + path + ":" +
                            std::to_string(lineno) + ": " + e.what());
    }
    if (r.completion.empty())
      throw ValidationError("record with empty completion at " + path + ":" +
                            std::to_string(lineno));
    out.push_back(std::move(r));
  }
  return out;
}

std::string records_config_hash(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      return json::parse(line).value("config_hash", "");
    } catch (const json::exception&) {
      throw ValidationError("malformed JSON in " + path);
    }
  }
  return "";
}

std::string config_hash(const nlohmann::json& config) {
  std::string dump = config.dump();
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void save_csv(const std::string& path, const std::string& config_hash,
              const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << "# config_hash=" << config_hash << '\n';
  auto write_row = [&](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  write_row(header);
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw ValidationError("csv row width does not match header");
    write_row(row);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

CsvFile load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  CsvFile f;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config_hash=", 0) == 0) {
      f.config_hash = line.substr(std::strlen("# config_hash="));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      f.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != f.header.size())
        throw ValidationError("csv row width mismatch in " + path);
      f.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw ValidationError("csv file has no header: " + path);
  if (f.config_hash.empty())
    throw ValidationError("csv file has no config_hash line: " + path);
  return f;
}

uint64_t parse_u64(const std::string& text) {
  if (text.empty()) throw ValidationError("empty integer");
  int base = 10;
  size_t start = 0;
  if (text.size() > 2 && (text.compare(0, 2, "0x") == 0 || text.compare(0, 2, "0X") == 0)) {
    base = 16;
    start = 2;
  }
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + text.size(),
                                   value, base);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ValidationError("not a valid integer (decimal or 0x-hex): " + text);
  return value;
}

}  // namespace wapiti
