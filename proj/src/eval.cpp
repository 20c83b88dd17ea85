#include "wapiti/eval.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "wapiti/detect.hpp"
#include "wapiti/prng.hpp"
#include "wapiti/stats.hpp"
#include "wapiti/watermark.hpp"

namespace wapiti {

double seq_rep_3(std::span<const TokenId> text) {
  if (text.size() < 3) throw ValidationError("seq_rep_3 needs at least 3 tokens");
  std::map<std::array<TokenId, 3>, uint64_t> grams;
  for (size_t i = 0; i + 3 <= text.size(); ++i)
    ++grams[{text[i], text[i + 1], text[i + 2]}];
  double total = static_cast<double>(text.size() - 2);
  return 1.0 - static_cast<double>(grams.size()) / total;
}

namespace {

using GramCounts = std::map<TokenSeq, uint64_t>;

GramCounts count_ngrams(const Corpus& corpus, uint32_t n) {
  GramCounts counts;
  for (const TokenSeq& seq : corpus)
    for (size_t i = 0; i + n <= seq.size(); ++i)
      ++counts[TokenSeq(seq.begin() + static_cast<ptrdiff_t>(i),
                        seq.begin() + static_cast<ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

double ngram_js_divergence(const Corpus& a, const Corpus& b, uint32_t n,
                           uint64_t min_freq) {
  if (n < 1) throw ValidationError("ngram_js_divergence needs n >= 1");
  GramCounts ca = count_ngrams(a, n), cb = count_ngrams(b, n);
  std::vector<std::pair<uint64_t, uint64_t>> support;
  for (const auto& [gram, cnt] : ca) {
    auto it = cb.find(gram);
    uint64_t other = it == cb.end() ? 0 : it->second;
    if (cnt >= min_freq || other >= min_freq) support.emplace_back(cnt, other);
  }
  for (const auto& [gram, cnt] : cb)
    if (cnt >= min_freq && ca.find(gram) == ca.end())
      support.emplace_back(0, cnt);
  double ta = 0.0, tb = 0.0;
  for (const auto& [x, y] : support) {
    ta += static_cast<double>(x);
    tb += static_cast<double>(y);
  }
  if (ta == 0.0 || tb == 0.0)
    throw ValidationError("no n-grams survive the frequency filter");
  double js = 0.0;
  for (const auto& [x, y] : support) {
    double p = static_cast<double>(x) / ta;
    double q = static_cast<double>(y) / tb;
    double m = 0.5 * (p + q);
    if (p > 0.0) js += 0.5 * p * std::log2(p / m);
    if (q > 0.0) js += 0.5 * q * std::log2(q / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

WatermarkedNgramRates watermarked_ngram_rate(
    const Checkpoint& model, const Corpus& distill_corpus,
    const WatermarkConfig& cfg, std::optional<double> freq_split) {
  if (cfg.scheme != Scheme::KGW)
    throw ValidationError("watermarked n-gram analysis is defined for kgw only");
  cfg.validate(model.vocab_size);
  uint32_t n = cfg.k + 1;
  GramCounts counts = count_ngrams(distill_corpus, n);
  if (counts.empty()) throw ValidationError("corpus has no (k+1)-grams");

  // Mean green-continuation probability of the model at the gram prefixes
  // of one class.
  auto class_rate = [&](const std::vector<const TokenSeq*>& grams) {
    double acc = 0.0;
    for (const TokenSeq* g : grams) {
      std::span<const TokenId> prefix(g->data(), cfg.k);
      GreenMask m = green_mask(cfg, prefix, model.vocab_size);
      std::vector<double> p =
          forward(model, pad_context(prefix, model.order));
      double green = 0.0;
      for (uint32_t j = 0; j < model.vocab_size; ++j)
        if (m.green[j]) green += p[j];
      acc += green;
    }
    return acc / static_cast<double>(grams.size());
  };

  std::vector<const TokenSeq*> watermarked, baseline;
  std::vector<double> wm_counts;
  for (const auto& [gram, cnt] : counts) {
    std::span<const TokenId> prefix(gram.data(), cfg.k);
    GreenMask m = green_mask(cfg, prefix, model.vocab_size);
    if (m.green[gram.back()]) {
      watermarked.push_back(&gram);
      wm_counts.push_back(static_cast<double>(cnt));
    } else {
      baseline.push_back(&gram);
    }
  }
  if (watermarked.empty()) throw ValidationError("no watermarked (k+1)-grams in corpus");
  if (baseline.empty()) throw ValidationError("no unwatermarked (k+1)-grams in corpus");

  double split = freq_split ? *freq_split : median(wm_counts);
  std::vector<const TokenSeq*> high, low;
  for (size_t i = 0; i < watermarked.size(); ++i)
    (wm_counts[i] > split ? high : low).push_back(watermarked[i]);
  if (high.empty() || low.empty())
    throw ValidationError("frequency split leaves an empty watermarked n-gram class");

  WatermarkedNgramRates rates;
  rates.high_freq_rate = class_rate(high);
  rates.low_freq_rate = class_rate(low);
  rates.baseline_rate = class_rate(baseline);
  rates.high_freq_grams = high.size();
  rates.low_freq_grams = low.size();
  rates.baseline_grams = baseline.size();
  return rates;
}

TokenSeq text_edit_attack(std::span<const TokenId> text, double eps,
                          uint64_t seed, uint32_t vocab_size) {
  if (eps < 0.0 || eps > 1.0) throw ValidationError("edit proportion must be in [0,1]");
  TokenSeq out(text.begin(), text.end());
  auto n_edit = static_cast<size_t>(
      std::ceil(eps * static_cast<double>(text.size())));
  if (n_edit == 0) return out;
  std::vector<uint32_t> order =
      permutation(seed, static_cast<uint32_t>(text.size()));
  uint64_t token_seed = derive_seed(seed, 1);
  for (size_t i = 0; i < n_edit; ++i) {
    auto tok = static_cast<TokenId>(uniform_at(token_seed, i) * vocab_size);
    if (tok >= vocab_size) tok = vocab_size - 1;
    out[order[i]] = tok;
  }
  return out;
}

void EvalBudget::validate() const {
  if (n_texts < 1 || text_len < 1)
    throw ValidationError("evaluation budget needs n_texts >= 1 and text_len >= 1");
}

namespace {

// Median detection p-value and judge perplexity of natural generations.
std::pair<double, double> generation_metrics(const Checkpoint& model,
                                             const WatermarkConfig& cfg,
                                             const Checkpoint& judge,
                                             const EvalBudget& budget) {
  std::vector<double> ps;
  Corpus texts;
  ps.reserve(budget.n_texts);
  texts.reserve(budget.n_texts);
  for (uint32_t i = 0; i < budget.n_texts; ++i) {
    TokenSeq t =
        sample(model, {}, budget.text_len, 1.0, derive_seed(budget.seed, i))
            .completion;
    ps.push_back(detect(t, cfg, model.vocab_size).p_value);
    texts.push_back(std::move(t));
  }
  return {median(ps), perplexity(judge, texts)};
}

}  // namespace

AttackTrace finetune_attack(const Checkpoint& model, const Corpus& clean_corpus,
                            uint64_t steps, uint64_t checkpoint_every,
                            const WatermarkConfig& cfg,
                            const Checkpoint& domain_judge,
                            const TrainConfig& train_cfg,
                            const EvalBudget& budget) {
  if (checkpoint_every < 1 || steps < checkpoint_every)
    throw ValidationError("attack needs steps >= checkpoint_every >= 1");
  budget.validate();
  AttackTrace trace;
  trace.kind = "finetune";
  Checkpoint current = model;
  auto [p0, ppl0] = generation_metrics(current, cfg, domain_judge, budget);
  trace.points.push_back({0, p0, ppl0});
  for (uint64_t done = 0; done < steps;) {
    uint64_t chunk = std::min(checkpoint_every, steps - done);
    TrainConfig stage = train_cfg;
    stage.steps = chunk;
    stage.seed = derive_seed(train_cfg.seed, done);
    current = train(current, clean_corpus, stage);
    done += chunk;
    auto [p, ppl] = generation_metrics(current, cfg, domain_judge, budget);
    trace.points.push_back({done, p, ppl});
  }
  return trace;
}

std::vector<SweepRow> lambda_sweep(const Checkpoint& finetuned,
                                   const ParamDelta& delta,
                                   std::span<const double> grid,
                                   const WatermarkConfig& cfg,
                                   const Checkpoint& domain_judge,
                                   const EvalBudget& budget, size_t workers) {
  if (grid.empty()) throw ValidationError("lambda grid is empty");
  if (workers == 0) throw ValidationError("worker count must be positive");
  budget.validate();
  cfg.validate(finetuned.vocab_size);

  // Reference statistics: unwatermarked fine-tuned generations, same seeds.
  std::vector<double> ref_stats;
  ref_stats.reserve(budget.n_texts);
  for (uint32_t i = 0; i < budget.n_texts; ++i) {
    TokenSeq t = sample(finetuned, {}, budget.text_len, 1.0,
                        derive_seed(budget.seed, i))
                     .completion;
    ref_stats.push_back(detect(t, cfg, finetuned.vocab_size).statistic);
  }

  std::vector<SweepRow> rows(grid.size());
  auto run_cell = [&](size_t gi) {
    double lam = grid[gi];
    Checkpoint merged = integrate(finetuned, delta, lam).checkpoint;
    std::vector<double> ps, stats;
    Corpus texts;
    for (uint32_t i = 0; i < budget.n_texts; ++i) {
      TokenSeq t = sample(merged, {}, budget.text_len, 1.0,
                          derive_seed(budget.seed, i))
                       .completion;
      DetectionResult d = detect(t, cfg, merged.vocab_size);
      ps.push_back(d.p_value);
      stats.push_back(d.statistic);
      texts.push_back(std::move(t));
    }
    SweepRow row;
    row.lambda = lam;
    row.median_p = median(ps);
    row.perplexity = perplexity(domain_judge, texts);
    row.auroc_value = auroc(stats, ref_stats);
    rows[gi] = row;
  };

  if (workers <= 1 || grid.size() <= 1) {
    for (size_t gi = 0; gi < grid.size(); ++gi) run_cell(gi);
    return rows;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  size_t n = std::min(workers, grid.size());
  pool.reserve(n);
  for (size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (size_t gi = next.fetch_add(1); gi < grid.size();
           gi = next.fetch_add(1))
        run_cell(gi);
    });
  }
  for (auto& t : pool) t.join();
  return rows;
}

std::vector<MotivationRow> motivation_experiment(const MotivationConfig& mc) {
  mc.budget.validate();
  WatermarkConfig wm = mc.watermark;
  TrainConfig base_tc{mc.train_steps, mc.batch_size, mc.learning_rate,
                      derive_seed(mc.master_seed, 101)};
  TrainConfig ft_tc = base_tc;
  ft_tc.seed = derive_seed(mc.master_seed, 102);
  TrainConfig distill_tc{mc.distill_steps, mc.batch_size, mc.learning_rate,
                         derive_seed(mc.master_seed, 103)};

  Checkpoint source_base =
      synth_source(mc.vocab_size, mc.order, derive_seed(mc.master_seed, 1));
  Checkpoint source_ft =
      synth_source(mc.vocab_size, mc.order, derive_seed(mc.master_seed, 2));
  Corpus corpus_base = synth_corpus(source_base, mc.corpus_seqs, mc.corpus_len,
                                    derive_seed(mc.master_seed, 3));
  Corpus corpus_ft = synth_corpus(source_ft, mc.corpus_seqs, mc.corpus_len,
                                  derive_seed(mc.master_seed, 4));

  Checkpoint base = train(make_checkpoint(mc.vocab_size, mc.order), corpus_base,
                          base_tc);
  base.metadata["model_id"] = "base";
  Checkpoint finetuned = train(base, corpus_ft, ft_tc);
  finetuned.metadata["model_id"] = "finetuned";

  EvalBudget budget = mc.budget;
  auto measure = [&](const Checkpoint& m, uint64_t salt) {
    EvalBudget b = budget;
    b.seed = derive_seed(budget.seed, salt);
    return generation_metrics(m, wm, source_ft, b);
  };

  std::vector<MotivationRow> rows;

  // (i) Distill the fine-tuned model on its own watermarked generations,
  // limited to what the fine-tune domain can supply.
  TrainConfig scarce_tc = distill_tc;
  scarce_tc.steps = distill_tc.steps * mc.scarce_samples /
                    std::max<uint32_t>(mc.distill_samples, 1);
  scarce_tc.steps = std::max<uint64_t>(scarce_tc.steps, 1);
  Checkpoint direct = distill(finetuned, wm, finetuned, mc.scarce_samples,
                              mc.distill_len, scarce_tc);
  auto [p1, ppl1] = measure(direct, 11);
  rows.push_back({"distill-finetuned", p1, ppl1});

  // (ii) Fine-tune an already-distilled base model.
  Checkpoint distilled_base =
      distill(base, wm, base, mc.distill_samples, mc.distill_len, distill_tc);
  TrainConfig two_phase = ft_tc;
  two_phase.seed = derive_seed(mc.master_seed, 104);
  Checkpoint ft_after = train(distilled_base, corpus_ft, two_phase);
  auto [p2, ppl2] = measure(ft_after, 12);
  rows.push_back({"finetune-distilled", p2, ppl2});

  // (iii) Train the base model on watermarked fine-tune-domain data.
  Corpus wm_domain;
  wm_domain.reserve(mc.scarce_samples);
  for (uint32_t i = 0; i < mc.scarce_samples; ++i)
    wm_domain.push_back(generate_watermarked(
                            finetuned, wm, {}, mc.distill_len, 1.0,
                            derive_seed(mc.master_seed, 200 + i))
                            .completion);
  TrainConfig third = ft_tc;
  third.seed = derive_seed(mc.master_seed, 105);
  third.steps = scarce_tc.steps;
  Checkpoint base_on_wm = train(base, wm_domain, third);
  auto [p3, ppl3] = measure(base_on_wm, 13);
  rows.push_back({"base-on-watermarked-data", p3, ppl3});

  // WAPITI: extract the base watermark delta, integrate at lambda = 1.
  ParamDelta delta = extract_delta(base, distilled_base);
  Checkpoint merged = integrate(finetuned, delta, 1.0).checkpoint;
  auto [p4, ppl4] = measure(merged, 14);
  rows.push_back({"wapiti-lambda-1", p4, ppl4});

  return rows;
}

}  // namespace wapiti
