#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wapiti/core.hpp"
#include "wapiti/lm.hpp"
#include "wapiti/wapiti.hpp"

namespace wapiti {

// 1 - distinct/total trigrams; repetition metric, higher means more repeats.
double seq_rep_3(std::span<const TokenId> text);

// Base-2 Jensen-Shannon divergence between relative n-gram frequencies of
// two corpora, restricted to n-grams reaching min_freq in either corpus and
// renormalized over that support.
double ngram_js_divergence(const Corpus& a, const Corpus& b, uint32_t n,
                           uint64_t min_freq = 5);

struct WatermarkedNgramRates {
  double high_freq_rate = 0.0;
  double low_freq_rate = 0.0;
  double baseline_rate = 0.0;
  uint64_t high_freq_grams = 0;
  uint64_t low_freq_grams = 0;
  uint64_t baseline_grams = 0;
};

// Splits the (k+1)-grams of the distillation corpus into watermarked ones
// (last token green under its prefix) and the rest; for each class, the
// model's mean probability of continuing the prefix with a green token.
// Watermarked grams are split high/low frequency at freq_split (default:
// median watermarked-gram count).
WatermarkedNgramRates watermarked_ngram_rate(
    const Checkpoint& model, const Corpus& distill_corpus,
    const WatermarkConfig& cfg, std::optional<double> freq_split = {});

// Replaces ceil(eps * len) distinct positions with uniformly random tokens.
TokenSeq text_edit_attack(std::span<const TokenId> text, double eps,
                          uint64_t seed, uint32_t vocab_size);

struct AttackPoint {
  uint64_t step = 0;
  double median_p = 1.0;
  double domain_perplexity = 0.0;
};

struct AttackTrace {
  std::string kind;
  std::vector<AttackPoint> points;
};

struct EvalBudget {
  uint32_t n_texts = 200;
  uint32_t text_len = 200;
  uint64_t seed = 0;

  void validate() const;
};

// Continued training on a clean corpus; at step 0 and every
// checkpoint_every steps the model's natural generations are scored for
// the watermark and judged for fine-tuned-domain quality (perplexity of
// the generations under the domain's ground-truth source).
AttackTrace finetune_attack(const Checkpoint& model, const Corpus& clean_corpus,
                            uint64_t steps, uint64_t checkpoint_every,
                            const WatermarkConfig& cfg,
                            const Checkpoint& domain_judge,
                            const TrainConfig& train_cfg,
                            const EvalBudget& budget);

struct SweepRow {
  double lambda = 0.0;
  double median_p = 1.0;
  double perplexity = 0.0;
  double auroc_value = 0.5;
};

// For each lambda: integrate, generate with natural decoding, detect, and
// judge perplexity; AUROC ranks each cell's detector statistics against the
// lambda = 0 generations produced from the same seeds.
std::vector<SweepRow> lambda_sweep(const Checkpoint& finetuned,
                                   const ParamDelta& delta,
                                   std::span<const double> grid,
                                   const WatermarkConfig& cfg,
                                   const Checkpoint& domain_judge,
                                   const EvalBudget& budget,
                                   size_t workers = 1);

struct MotivationRow {
  std::string approach;
  double median_p = 1.0;
  double domain_perplexity = 0.0;
};

struct MotivationConfig {
  uint32_t vocab_size = 64;
  uint32_t order = 1;
  uint64_t master_seed = 1;
  WatermarkConfig watermark;
  uint32_t corpus_seqs = 400;
  uint32_t corpus_len = 128;
  uint64_t train_steps = 4000;
  uint32_t batch_size = 32;
  double learning_rate = 0.5;
  uint32_t distill_samples = 2000;   // full distillation budget
  uint32_t scarce_samples = 100;     // what the fine-tune domain can supply
  uint32_t distill_len = 128;
  uint64_t distill_steps = 8000;
  EvalBudget budget;
};

// The three ways to watermark a fine-tuned model without WAPITI, measured
// head to head against it: (i) distill the fine-tuned model on its own
// watermarked generations at the scarce-data budget, (ii) fine-tune an
// already-distilled base model, (iii) train the base model on watermarked
// fine-tune-domain data at the scarce-data budget.
std::vector<MotivationRow> motivation_experiment(const MotivationConfig& cfg);

}  // namespace wapiti
