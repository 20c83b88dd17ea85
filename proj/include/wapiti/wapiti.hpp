#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "wapiti/core.hpp"
#include "wapiti/lm.hpp"

namespace wapiti {

// Sampling-based watermark distillation: generate watermarked sequences
// from the teacher, then train the student on the watermarked completions.
// Prompts are sampled (unwatermarked) from the teacher itself. The returned
// checkpoint is element-wise rebased against the student's initial
// parameters so that extract_delta/integrate round-trips are exact.
Checkpoint distill(const Checkpoint& teacher, const WatermarkConfig& cfg,
                   const Checkpoint& student, uint32_t n_samples,
                   uint32_t seq_len, const TrainConfig& train_cfg);

ParamDelta extract_delta(const Checkpoint& base, const Checkpoint& watermarked);

struct IntegrationResult {
  Checkpoint checkpoint;
  double lambda = 0.0;
  double delta_norm = 0.0;
  std::string finetuned_id;
  std::string delta_id;
};

// theta_FT + lambda * delta, element-wise; lambda = 0 returns the
// fine-tuned weights bit for bit.
IntegrationResult integrate(const Checkpoint& finetuned, const ParamDelta& delta,
                            double lambda);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct OrthogonalityReport {
  double cosine = 0.0;
  double watermark_delta_norm = 0.0;
  double finetune_delta_norm = 0.0;
};

// Cosine between the watermark delta (distilled - base) and the fine-tune
// task vector (fine-tuned - base), plus both norms.
OrthogonalityReport orthogonality_report(const Checkpoint& base,
                                         const Checkpoint& watermarked,
                                         const Checkpoint& finetuned);

}  // namespace wapiti
