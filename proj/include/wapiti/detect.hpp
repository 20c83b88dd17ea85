#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "wapiti/core.hpp"

namespace wapiti {

// Number of green tokens among positions k..len-1, each scored against the
// green mask of its k predecessors. Errors when len <= k.
std::pair<uint64_t, uint32_t> kgw_green_count(std::span<const TokenId> text,
                                              const WatermarkConfig& cfg,
                                              uint32_t vocab_size);

// z-score method: z = (count - gamma T) / sqrt(T gamma (1-gamma)),
// p = normal survival, clamped to [0,1].
double kgw_pvalue_z(uint64_t count, uint32_t scored_tokens, double gamma);

// Exact binomial tail P[Binomial(T, gamma) >= count].
double kgw_pvalue_exact(uint64_t count, uint32_t scored_tokens, double gamma);

// Sum over positions k..len-1 of -log(1 - r_t[x_t]) with r recomputed from
// the key and context.
std::pair<double, uint32_t> aar_score_sum(std::span<const TokenId> text,
                                          const WatermarkConfig& cfg,
                                          uint32_t vocab_size);

// P[Gamma(shape=n, scale=1) >= s].
double aar_pvalue(double score_sum, uint32_t scored_tokens);

// Full detection of a completion under the scheme in `cfg`.
DetectionResult detect(std::span<const TokenId> completion,
                       const WatermarkConfig& cfg, uint32_t vocab_size);

}  // namespace wapiti
