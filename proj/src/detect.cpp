#include "wapiti/detect.hpp"

#include <cmath>
#include <unordered_map>

#include "wapiti/prng.hpp"
#include "wapiti/stats.hpp"
#include "wapiti/watermark.hpp"

namespace wapiti {

std::pair<uint64_t, uint32_t> kgw_green_count(std::span<const TokenId> text,
                                              const WatermarkConfig& cfg,
                                              uint32_t vocab_size) {
  if (text.size() <= cfg.k)
    throw ValidationError("text too short to score: length must exceed watermark context width");
  // Masks repeat across positions with equal context; cache by context seed.
  std::unordered_map<uint64_t, GreenMask> cache;
  uint64_t count = 0;
  for (size_t t = cfg.k; t < text.size(); ++t) {
    if (text[t] >= vocab_size) throw ValidationError("token id out of range");
    std::span<const TokenId> ctx = text.subspan(t - cfg.k, cfg.k);
    uint64_t s = context_seed(cfg.key, kKgwSchemeTag, ctx);
    auto it = cache.find(s);
    if (it == cache.end())
      it = cache.emplace(s, green_mask(cfg, ctx, vocab_size)).first;
    if (it->second.green[text[t]]) ++count;
  }
  return {count, static_cast<uint32_t>(text.size() - cfg.k)};
}

double kgw_pvalue_z(uint64_t count, uint32_t scored_tokens, double gamma) {
  if (scored_tokens < 1) throw ValidationError("kgw_pvalue_z needs scored_tokens >= 1");
  if (gamma <= 0.0 || gamma >= 1.0) throw ValidationError("gamma must be in (0,1)");
  double t = scored_tokens;
  double z = (static_cast<double>(count) - gamma * t) /
             std::sqrt(t * gamma * (1.0 - gamma));
  return normal_sf(z);
}

double kgw_pvalue_exact(uint64_t count, uint32_t scored_tokens, double gamma) {
  return binomial_sf(static_cast<int64_t>(count),
                     static_cast<int64_t>(scored_tokens), gamma);
}

std::pair<double, uint32_t> aar_score_sum(std::span<const TokenId> text,
                                          const WatermarkConfig& cfg,
                                          uint32_t vocab_size) {
  if (text.size() <= cfg.k)
    throw ValidationError("text too short to score: length must exceed watermark context width");
  double s = 0.0;
  for (size_t t = cfg.k; t < text.size(); ++t) {
    if (text[t] >= vocab_size) throw ValidationError("token id out of range");
    std::span<const TokenId> ctx = text.subspan(t - cfg.k, cfg.k);
    double r = uniform_at(context_seed(cfg.key, kAarSchemeTag, ctx), text[t]);
    s += -std::log1p(-r);
  }
  return {s, static_cast<uint32_t>(text.size() - cfg.k)};
}

double aar_pvalue(double score_sum, uint32_t scored_tokens) {
  if (scored_tokens < 1) throw ValidationError("aar_pvalue needs scored_tokens >= 1");
  if (score_sum < 0.0) throw ValidationError("aar score sum must be >= 0");
  return gamma_q(static_cast<double>(scored_tokens), score_sum);
}

DetectionResult detect(std::span<const TokenId> completion,
                       const WatermarkConfig& cfg, uint32_t vocab_size) {
  cfg.validate(vocab_size);
  DetectionResult res;
  res.scheme = cfg.scheme;
  if (cfg.scheme == Scheme::KGW) {
    auto [count, scored] = kgw_green_count(completion, cfg, vocab_size);
    res.statistic = static_cast<double>(count);
    res.scored_tokens = scored;
    res.p_value = kgw_pvalue_z(count, scored, cfg.gamma);
    res.p_value_exact = kgw_pvalue_exact(count, scored, cfg.gamma);
    res.green_fraction = static_cast<double>(count) / scored;
  } else {
    auto [s, scored] = aar_score_sum(completion, cfg, vocab_size);
    res.statistic = s;
    res.scored_tokens = scored;
    res.p_value = aar_pvalue(s, scored);
    res.p_value_exact = res.p_value;
    res.green_fraction = 0.0;
  }
  return res;
}

}  // namespace wapiti
