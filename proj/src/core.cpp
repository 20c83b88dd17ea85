#include "wapiti/core.hpp"

#include <cmath>
#include <cstdio>

namespace wapiti {

namespace {

size_t checked_rows(uint32_t vocab_size, uint32_t order) {
  if (vocab_size < 2) throw ValidationError("vocab_size must be >= 2");
  size_t r = 1;
  for (uint32_t i = 0; i < order; ++i) {
    if (r > (size_t{1} << 33) / vocab_size)
      throw ValidationError("checkpoint too large: vocab_size^order overflows the supported size");
    r *= vocab_size;
  }
  if (r * vocab_size > (size_t{1} << 33))
    throw ValidationError("checkpoint too large: vocab_size^(order+1) exceeds the supported size");
  return r;
}

}  // namespace

Vocab default_vocab(uint32_t size) {
  if (size < 2) throw ValidationError("vocab size must be >= 2");
  Vocab v;
  v.tokens.reserve(size);
  v.tokens.emplace_back("<s>");
  char buf[16];
  for (uint32_t i = 1; i < size; ++i) {
    std::snprintf(buf, sizeof buf, "w%03u", i);
    v.tokens.emplace_back(buf);
  }
  return v;
}

std::string scheme_name(Scheme s) { return s == Scheme::KGW ? "kgw" : "aar"; }

Scheme scheme_from_name(const std::string& name) {
  if (name == "kgw") return Scheme::KGW;
  if (name == "aar") return Scheme::AAR;
  throw ValidationError("unknown watermark scheme: " + name);
}

void WatermarkConfig::validate(uint32_t vocab_size) const {
  if (scheme == Scheme::KGW) {
    if (gamma <= 0.0 || gamma >= 1.0)
      throw ValidationError("gamma must be in (0,1)");
    if (delta < 0.0) throw ValidationError("delta must be >= 0");
    if (static_cast<uint32_t>(gamma * vocab_size) < 1)
      throw ValidationError("gamma * vocab_size must be >= 1");
  } else {
    if (k < 1) throw ValidationError("aar requires context width k >= 1");
  }
}

size_t Checkpoint::rows() const { return checked_rows(vocab_size, order); }

void Checkpoint::validate() const {
  size_t expect = rows() * vocab_size;
  if (logits.size() != expect)
    throw ValidationError("checkpoint logits size does not match vocab_size^(order+1)");
  for (double v : logits)
    if (!std::isfinite(v)) throw ValidationError("checkpoint contains non-finite logits");
  if (!vocab_tokens.empty() && vocab_tokens.size() != vocab_size)
    throw ValidationError("vocab token list does not match vocab_size");
}

Checkpoint make_checkpoint(uint32_t vocab_size, uint32_t order, double fill) {
  Checkpoint c;
  c.vocab_size = vocab_size;
  c.order = order;
  c.logits.assign(checked_rows(vocab_size, order) * vocab_size, fill);
  return c;
}

size_t context_row(std::span<const TokenId> ctx, uint32_t vocab_size) {
  size_t idx = 0;
  for (TokenId t : ctx) {
    if (t >= vocab_size) throw ValidationError("token id out of range");
    idx = idx * vocab_size + t;
  }
  return idx;
}

TokenSeq pad_context(std::span<const TokenId> seq, uint32_t order) {
  TokenSeq ctx(order, kBosToken);
  size_t take = seq.size() < order ? seq.size() : order;
  for (size_t i = 0; i < take; ++i)
    ctx[order - take + i] = seq[seq.size() - take + i];
  return ctx;
}

std::vector<double> flatten(const Checkpoint& c) { return c.logits; }

Checkpoint unflatten(std::span<const double> values, uint32_t vocab_size,
                     uint32_t order) {
  Checkpoint c;
  c.vocab_size = vocab_size;
  c.order = order;
  if (values.size() != checked_rows(vocab_size, order) * vocab_size)
    throw ValidationError("flattened length does not match vocab_size^(order+1)");
  c.logits.assign(values.begin(), values.end());
  return c;
}

size_t ParamDelta::rows() const { return checked_rows(vocab_size, order); }

void ParamDelta::validate() const {
  if (values.size() != rows() * vocab_size)
    throw ValidationError("delta values size does not match vocab_size^(order+1)");
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError("delta contains non-finite values");
}

}  // namespace wapiti
