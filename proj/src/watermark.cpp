#include "wapiti/watermark.hpp"

#include <cmath>

#include "wapiti/lm.hpp"
#include "wapiti/prng.hpp"

namespace wapiti {

GreenMask green_mask(const WatermarkConfig& cfg, std::span<const TokenId> ctx,
                     uint32_t vocab_size) {
  auto count = static_cast<uint32_t>(cfg.gamma * vocab_size);
  if (count < 1) throw ValidationError("green list would be empty: gamma * vocab_size < 1");
  GreenMask m;
  m.green.assign(vocab_size, 0);
  m.green_count = count;
  std::vector<uint32_t> perm =
      permutation(context_seed(cfg.key, kKgwSchemeTag, ctx), vocab_size);
  for (uint32_t i = 0; i < count; ++i) m.green[perm[i]] = 1;
  return m;
}

std::vector<double> kgw_transform(std::span<const double> probs,
                                  const GreenMask& mask, double delta) {
  if (delta < 0.0) throw ValidationError("delta must be >= 0");
  if (probs.size() != mask.green.size())
    throw ValidationError("probability vector and green mask sizes differ");
  double boost = std::exp(delta);
  std::vector<double> out(probs.size());
  double s = 0.0;
  for (size_t j = 0; j < probs.size(); ++j) {
    if (!std::isfinite(probs[j]) || probs[j] < 0.0)
      throw ValidationError("kgw_transform needs a finite non-negative probability vector");
    out[j] = mask.green[j] ? probs[j] * boost : probs[j];
    s += out[j];
  }
  if (s <= 0.0) throw ValidationError("kgw_transform input has zero total mass");
  for (double& x : out) x /= s;
  return out;
}

std::vector<double> aar_scores(const WatermarkConfig& cfg,
                               std::span<const TokenId> ctx,
                               uint32_t vocab_size) {
  return uniform_stream(context_seed(cfg.key, kAarSchemeTag, ctx), vocab_size);
}

TokenId aar_select(std::span<const double> probs, std::span<const double> r) {
  if (probs.size() != r.size())
    throw ValidationError("probability and score vector sizes differ");
  double best = -HUGE_VAL;
  TokenId arg = 0;
  bool any = false;
  for (size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    double v = std::log(probs[j]) - std::log(-std::log(r[j]));
    if (v > best) {
      best = v;
      arg = static_cast<TokenId>(j);
      any = true;
    }
  }
  if (!any) throw ValidationError("aar_select needs at least one positive probability");
  return arg;
}

GenerationRecord generate_watermarked(const Checkpoint& c,
                                      const WatermarkConfig& cfg,
                                      const TokenSeq& prompt, uint32_t length,
                                      double temperature, uint64_t seed) {
  if (length == 0) throw ValidationError("generation length must be >= 1");
  cfg.validate(c.vocab_size);
  GenerationRecord rec;
  rec.prompt = prompt;
  rec.seed = seed;
  rec.watermark = cfg;
  TokenSeq seq = prompt;
  seq.reserve(prompt.size() + length);
  for (uint32_t t = 0; t < length; ++t) {
    TokenSeq mctx = pad_context(seq, c.order);
    std::vector<double> p = forward_temp(c, mctx, temperature);
    TokenSeq wctx = pad_context(seq, cfg.k);
    if (cfg.scheme == Scheme::KGW) {
      GreenMask m = green_mask(cfg, wctx, c.vocab_size);
      std::vector<double> q = kgw_transform(p, m, cfg.delta);
      seq.push_back(sample_from(q, uniform_at(seed, t)));
    } else {
      std::vector<double> r = aar_scores(cfg, wctx, c.vocab_size);
      seq.push_back(aar_select(p, r));
    }
  }
  rec.completion.assign(seq.begin() + static_cast<ptrdiff_t>(prompt.size()),
                        seq.end());
  return rec;
}

}  // namespace wapiti
