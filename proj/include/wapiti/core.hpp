#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wapiti {

// Thrown for caller mistakes (bad arguments, malformed files, shape
// mismatches). The CLI maps these to exit code 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using TokenId = uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kBosToken = 0;

struct Vocab {
  std::vector<std::string> tokens;

  uint32_t size() const { return static_cast<uint32_t>(tokens.size()); }
};

// Default vocabulary: "<s>" for the reserved BOS id 0, then w001, w002, ...
Vocab default_vocab(uint32_t size);

enum class Scheme { KGW, AAR };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct WatermarkConfig {
  Scheme scheme = Scheme::KGW;
  uint32_t k = 1;       // context width; KGW allows 0 (fixed lists), AAR needs >= 1
  double gamma = 0.25;  // KGW green fraction
  double delta = 4.0;   // KGW logit boost
  uint64_t key = 0;

  void validate(uint32_t vocab_size) const;
};

// A k-gram logit-table model: one logit row per context, contexts shorter
// than the order are left-padded with BOS.
struct Checkpoint {
  uint32_t vocab_size = 0;
  uint32_t order = 0;
  std::vector<double> logits;  // vocab_size^order rows, vocab_size columns
  std::map<std::string, std::string> metadata;
  std::vector<std::string> vocab_tokens;  // optional, empty or size vocab_size

  size_t rows() const;
  double* row(size_t r) { return logits.data() + r * vocab_size; }
  const double* row(size_t r) const { return logits.data() + r * vocab_size; }
  void validate() const;
};

Checkpoint make_checkpoint(uint32_t vocab_size, uint32_t order,
                           double fill = 0.0);

// Mixed-radix row index for a context of exactly `order` token ids.
size_t context_row(std::span<const TokenId> ctx, uint32_t vocab_size);

// The last `order` tokens of `seq`, left-padded with BOS when it is shorter.
TokenSeq pad_context(std::span<const TokenId> seq, uint32_t order);

std::vector<double> flatten(const Checkpoint& c);
Checkpoint unflatten(std::span<const double> values, uint32_t vocab_size,
                     uint32_t order);

// Parameter-space difference between a watermark-distilled checkpoint and
// the checkpoint it was distilled from; same tensor layout.
struct ParamDelta {
  uint32_t vocab_size = 0;
  uint32_t order = 0;
  std::vector<double> values;
  std::string base_id;
  std::string watermarked_id;

  size_t rows() const;
  void validate() const;
};

struct GenerationRecord {
  TokenSeq prompt;
  TokenSeq completion;
  std::string model_id;
  std::optional<WatermarkConfig> watermark;
  uint64_t seed = 0;
};

struct DetectionResult {
  Scheme scheme = Scheme::KGW;
  double statistic = 0.0;  // green count for KGW, score sum for AAR
  uint32_t scored_tokens = 0;
  double p_value = 1.0;
  double p_value_exact = 1.0;   // exact binomial tail for KGW, = p_value for AAR
  double green_fraction = 0.0;  // KGW only
};

}  // namespace wapiti
