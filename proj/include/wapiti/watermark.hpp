#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wapiti/core.hpp"

namespace wapiti {

struct GreenMask {
  std::vector<uint8_t> green;  // one flag per vocabulary entry
  uint32_t green_count = 0;
};

// Pseudorandom green/red vocabulary split for a KGW step: the first
// floor(gamma * vocab_size) entries of the context-seeded permutation.
GreenMask green_mask(const WatermarkConfig& cfg, std::span<const TokenId> ctx,
                     uint32_t vocab_size);

// softmax(log p + delta * mask): boosts green-token mass, leaves exact
// zeros at zero.
std::vector<double> kgw_transform(std::span<const double> probs,
                                  const GreenMask& mask, double delta);

// Per-step AAR score vector r in (0,1)^V, a pure function of (key, context).
std::vector<double> aar_scores(const WatermarkConfig& cfg,
                               std::span<const TokenId> ctx,
                               uint32_t vocab_size);

// argmax_j log p_j - log(-log r_j), ties broken toward the lowest token id.
TokenId aar_select(std::span<const double> probs, std::span<const double> r);

// Watermarked generation: KGW samples from the transformed distribution,
// AAR picks deterministically via Gumbel-max against the keyed scores.
GenerationRecord generate_watermarked(const Checkpoint& c,
                                      const WatermarkConfig& cfg,
                                      const TokenSeq& prompt, uint32_t length,
                                      double temperature, uint64_t seed);

}  // namespace wapiti
