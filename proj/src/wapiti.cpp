#include "wapiti/wapiti.hpp"

#include <cmath>

#include "wapiti/prng.hpp"
#include "wapiti/watermark.hpp"

namespace wapiti {

namespace {

// Rebase each trained value so that init + (value - init), evaluated in
// doubles, reproduces the value exactly. Keeps the distilled checkpoint
// within 1-2 ulp of the trained one while making parameter arithmetic
// exactly invertible.
void rebase_exact(std::span<const double> init, std::span<double> trained) {
  for (size_t i = 0; i < trained.size(); ++i) {
    double d = trained[i];
    for (int iter = 0; iter < 8; ++iter) {
      double back = init[i] + (d - init[i]);
      if (back == d) break;
      d = back;
    }
    trained[i] = d;
  }
}

constexpr uint32_t kDistillPromptLen = 16;

}  // namespace

Checkpoint distill(const Checkpoint& teacher, const WatermarkConfig& cfg,
                   const Checkpoint& student, uint32_t n_samples,
                   uint32_t seq_len, const TrainConfig& train_cfg) {
  teacher.validate();
  student.validate();
  cfg.validate(teacher.vocab_size);
  if (teacher.vocab_size != student.vocab_size)
    throw ValidationError("teacher and student vocab sizes differ");
  if (student.order < cfg.k)
    throw ValidationError(
        "student order " + std::to_string(student.order) +
        " cannot represent a watermark with context width " +
        std::to_string(cfg.k) + "; increase the student order");
  if (n_samples == 0) return student;

  // Watermarked completions preceded by natural prompts; the student sees
  // the prompt only as context, its loss covers completion tokens alone.
  Corpus data;
  data.reserve(n_samples);
  for (uint32_t i = 0; i < n_samples; ++i) {
    uint64_t ps = derive_seed(train_cfg.seed, 2 * i);
    uint64_t gs = derive_seed(train_cfg.seed, 2 * i + 1);
    TokenSeq seq = sample(teacher, {}, kDistillPromptLen, 1.0, ps).completion;
    GenerationRecord rec =
        generate_watermarked(teacher, cfg, seq, seq_len, 1.0, gs);
    seq.insert(seq.end(), rec.completion.begin(), rec.completion.end());
    data.push_back(std::move(seq));
  }

  Checkpoint out = train_skip_prefix(student, data, kDistillPromptLen, train_cfg);
  rebase_exact(student.logits, out.logits);
  out.metadata = student.metadata;
  out.metadata["parent_id"] =
      student.metadata.count("model_id") ? student.metadata.at("model_id") : "";
  out.metadata["watermark_scheme"] = scheme_name(cfg.scheme);
  out.metadata["watermark_key"] = std::to_string(cfg.key);
  out.metadata["train_seed"] = std::to_string(train_cfg.seed);
  return out;
}

ParamDelta extract_delta(const Checkpoint& base, const Checkpoint& watermarked) {
  if (base.vocab_size != watermarked.vocab_size || base.order != watermarked.order)
    throw ValidationError("checkpoint shapes differ");
  ParamDelta d;
  d.vocab_size = base.vocab_size;
  d.order = base.order;
  d.values.resize(base.logits.size());
  for (size_t i = 0; i < base.logits.size(); ++i)
    d.values[i] = watermarked.logits[i] - base.logits[i];
  auto id_of = [](const Checkpoint& c) {
    auto it = c.metadata.find("model_id");
    return it == c.metadata.end() ? std::string() : it->second;
  };
  d.base_id = id_of(base);
  d.watermarked_id = id_of(watermarked);
  return d;
}

IntegrationResult integrate(const Checkpoint& finetuned, const ParamDelta& delta,
                            double lambda) {
  if (!std::isfinite(lambda)) throw ValidationError("lambda must be finite");
  if (finetuned.vocab_size != delta.vocab_size || finetuned.order != delta.order)
    throw ValidationError("checkpoint and delta shapes differ");
  if (finetuned.logits.size() != delta.values.size())
    throw ValidationError("checkpoint and delta sizes differ");
  IntegrationResult res;
  res.checkpoint = finetuned;
  res.lambda = lambda;
  res.finetuned_id = finetuned.metadata.count("model_id")
                         ? finetuned.metadata.at("model_id")
                         : "";
  res.delta_id = delta.watermarked_id;
  double norm = 0.0;
  for (double v : delta.values) norm += v * v;
  res.delta_norm = std::sqrt(norm);
  if (lambda != 0.0) {
    for (size_t i = 0; i < delta.values.size(); ++i)
      res.checkpoint.logits[i] = finetuned.logits[i] + lambda * delta.values[i];
  }
  return res;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("vector lengths differ");
  if (u.empty()) throw ValidationError("cosine of empty vectors");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0)
    throw ValidationError("cosine undefined for a zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

OrthogonalityReport orthogonality_report(const Checkpoint& base,
                                         const Checkpoint& watermarked,
                                         const Checkpoint& finetuned) {
  ParamDelta wm = extract_delta(base, watermarked);
  ParamDelta ft = extract_delta(base, finetuned);
  OrthogonalityReport rep;
  rep.cosine = cosine_similarity(wm.values, ft.values);
  double a = 0.0, b = 0.0;
  for (double v : wm.values) a += v * v;
  for (double v : ft.values) b += v * v;
  rep.watermark_delta_norm = std::sqrt(a);
  rep.finetune_delta_norm = std::sqrt(b);
  return rep;
}

}  // namespace wapiti
