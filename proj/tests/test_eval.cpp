#include <cmath>
#include <set>

#include <doctest.h>

#include "wapiti/detect.hpp"
#include "wapiti/eval.hpp"
#include "wapiti/lm.hpp"
#include "wapiti/prng.hpp"
#include "wapiti/stats.hpp"
#include "wapiti/wapiti.hpp"
#include "wapiti/watermark.hpp"

using namespace wapiti;
using doctest::Approx;

namespace {

WatermarkConfig kgw_cfg(uint64_t key = 0xABCDEF) {
  WatermarkConfig c;
  c.scheme = Scheme::KGW;
  c.k = 1;
  c.gamma = 0.25;
  c.delta = 4.0;
  c.key = key;
  return c;
}

}  // namespace

TEST_CASE("trigram repetition of a constant sequence") {
  TokenSeq constant(5, 7);
  CHECK(seq_rep_3(constant) == Approx(2.0 / 3.0).epsilon(1e-15));
  TokenSeq distinct{1, 2, 3, 4, 5};
  CHECK(seq_rep_3(distinct) == 0.0);
  TokenSeq tiny{1, 2};
  CHECK_THROWS_AS(seq_rep_3(tiny), ValidationError);
}

TEST_CASE("ngram js divergence hand example") {
  // bigram counts a: {aa x3, ab x1}; b: {aa x1, ab x3}
  Corpus a{TokenSeq{1, 1}, TokenSeq{1, 1}, TokenSeq{1, 1}, TokenSeq{1, 2}};
  Corpus b{TokenSeq{1, 1}, TokenSeq{1, 2}, TokenSeq{1, 2}, TokenSeq{1, 2}};
  double js = ngram_js_divergence(a, b, 2, 1);
  CHECK(js == Approx(0.18872187554086717).epsilon(1e-13));
}

TEST_CASE("js divergence of identical corpora is zero") {
  Corpus a{TokenSeq{1, 2, 3, 4}, TokenSeq{2, 2, 2}};
  CHECK(ngram_js_divergence(a, a, 2, 1) == Approx(0.0).epsilon(1e-15));
}

TEST_CASE("js divergence of disjoint corpora is one bit") {
  Corpus a{TokenSeq{1, 1, 1, 1, 1, 1, 1}};
  Corpus b{TokenSeq{2, 2, 2, 2, 2, 2, 2}};
  CHECK(ngram_js_divergence(a, b, 2, 1) == Approx(1.0).epsilon(1e-13));
}

TEST_CASE("frequency filter drops rare grams") {
  Corpus a{TokenSeq{1, 1, 1, 1, 1, 1}, TokenSeq{1, 2}};
  Corpus b{TokenSeq{1, 1, 1, 1, 1, 1}, TokenSeq{2, 1}};
  // (1,2) and (2,1) each appear once, below the threshold of 5; only
  // (1,1) survives, so the restricted distributions coincide.
  CHECK(ngram_js_divergence(a, b, 2, 5) == Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(ngram_js_divergence(Corpus{}, b, 2, 1), ValidationError);
}

TEST_CASE("text edit attack with eps zero is the identity") {
  TokenSeq text{1, 2, 3, 4, 5};
  CHECK(text_edit_attack(text, 0.0, 7, 64) == text);
}

TEST_CASE("text edit attack replaces ceil(eps len) distinct positions") {
  TokenSeq text(100, 5);
  TokenSeq out = text_edit_attack(text, 0.16, 7, 64);
  REQUIRE(out.size() == 100);
  size_t changed = 0;
  for (size_t i = 0; i < 100; ++i)
    if (out[i] != text[i]) ++changed;
  // 16 positions are redrawn; a redraw can land on the original token
  CHECK(changed <= 16);
  CHECK(changed >= 10);
  CHECK(out == text_edit_attack(text, 0.16, 7, 64));
  CHECK(out != text_edit_attack(text, 0.16, 8, 64));
}

TEST_CASE("full replacement changes all but chance collisions") {
  // At eps 1 every position is redrawn uniformly; survival chance 1/V.
  TokenSeq text(10000, 3);
  TokenSeq out = text_edit_attack(text, 1.0, 9, 64);
  size_t same = 0;
  for (size_t i = 0; i < text.size(); ++i)
    if (out[i] == text[i]) ++same;
  double frac = static_cast<double>(same) / 10000.0;
  CHECK(frac == Approx(1.0 / 64.0).epsilon(0.5));
}

TEST_CASE("edit attack validates its arguments") {
  TokenSeq text{1, 2, 3};
  CHECK_THROWS_AS(text_edit_attack(text, -0.1, 1, 64), ValidationError);
  CHECK_THROWS_AS(text_edit_attack(text, 1.5, 1, 64), ValidationError);
}

TEST_CASE("watermarked ngram rates separate green continuations") {
  Checkpoint src = synth_source(16, 1, 91);
  WatermarkConfig cfg = kgw_cfg();
  Corpus wm;
  for (uint64_t i = 0; i < 30; ++i)
    wm.push_back(
        generate_watermarked(src, cfg, {}, 64, 1.0, derive_seed(92, i)).completion);
  WatermarkedNgramRates rates = watermarked_ngram_rate(src, wm, cfg);
  CHECK(rates.high_freq_grams > 0);
  CHECK(rates.low_freq_grams > 0);
  CHECK(rates.baseline_grams > 0);
  CHECK(rates.high_freq_rate >= 0.0);
  CHECK(rates.high_freq_rate <= 1.0);
  CHECK(rates.low_freq_rate >= 0.0);
  CHECK(rates.low_freq_rate <= 1.0);
}

TEST_CASE("finetune attack trace shape and step-0 baseline") {
  Checkpoint src = synth_source(16, 1, 93);
  Corpus clean = synth_corpus(src, 10, 64, 94);
  Checkpoint model = synth_source(16, 1, 95);
  WatermarkConfig cfg = kgw_cfg();
  TrainConfig tc;
  tc.batch_size = 8;
  tc.learning_rate = 0.5;
  tc.seed = 96;
  EvalBudget budget{20, 80, 97};
  AttackTrace trace = finetune_attack(model, clean, 40, 20, cfg, src, tc, budget);
  REQUIRE(trace.points.size() == 3);
  CHECK(trace.points[0].step == 0);
  CHECK(trace.points[1].step == 20);
  CHECK(trace.points[2].step == 40);
  CHECK(trace.kind == "finetune");

  // the step-0 entry reflects the unattacked model
  std::vector<double> ps;
  Corpus texts;
  for (uint32_t i = 0; i < 20; ++i) {
    TokenSeq t = sample(model, {}, 80, 1.0, derive_seed(97, i)).completion;
    ps.push_back(detect(t, cfg, 16).p_value);
    texts.push_back(t);
  }
  CHECK(trace.points[0].median_p == Approx(median(ps)).epsilon(1e-12));
  CHECK(trace.points[0].domain_perplexity ==
        Approx(perplexity(src, texts)).epsilon(1e-12));

  CHECK_THROWS_AS(finetune_attack(model, clean, 10, 20, cfg, src, tc, budget),
                  ValidationError);
}

TEST_CASE("lambda sweep at zero matches the fine-tuned baseline") {
  Checkpoint src = synth_source(16, 1, 98);
  Corpus corpus = synth_corpus(src, 20, 64, 99);
  TrainConfig tc;
  tc.steps = 200;
  tc.batch_size = 8;
  tc.seed = 100;
  Checkpoint ft = train(make_checkpoint(16, 1), corpus, tc);
  Checkpoint other = synth_source(16, 1, 101);
  ParamDelta d = extract_delta(ft, other);
  EvalBudget budget{20, 80, 102};
  std::vector<double> grid{0.0};
  std::vector<SweepRow> rows =
      lambda_sweep(ft, d, grid, kgw_cfg(), src, budget);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].lambda == 0.0);
  CHECK(rows[0].auroc_value == Approx(0.5).epsilon(1e-12));
  CHECK(rows[0].median_p > 0.05);
  CHECK(rows[0].median_p < 0.95);

  Corpus texts;
  for (uint32_t i = 0; i < 20; ++i)
    texts.push_back(sample(ft, {}, 80, 1.0, derive_seed(102, i)).completion);
  CHECK(rows[0].perplexity == Approx(perplexity(src, texts)).epsilon(1e-12));
}

TEST_CASE("lambda sweep row count and worker invariance") {
  Checkpoint ft = synth_source(16, 1, 103);
  Checkpoint other = synth_source(16, 1, 104);
  ParamDelta d = extract_delta(ft, other);
  Checkpoint judge = synth_source(16, 1, 105);
  EvalBudget budget{10, 60, 106};
  std::vector<double> grid{0.0, 0.5, 1.0};
  std::vector<SweepRow> one =
      lambda_sweep(ft, d, grid, kgw_cfg(), judge, budget, 1);
  std::vector<SweepRow> three =
      lambda_sweep(ft, d, grid, kgw_cfg(), judge, budget, 3);
  REQUIRE(one.size() == 3);
  REQUIRE(three.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(one[i].lambda == three[i].lambda);
    CHECK(one[i].median_p == three[i].median_p);
    CHECK(one[i].perplexity == three[i].perplexity);
    CHECK(one[i].auroc_value == three[i].auroc_value);
  }
}

TEST_CASE("motivation experiment emits one row per approach") {
  MotivationConfig mc;
  mc.vocab_size = 16;
  mc.order = 1;
  mc.master_seed = 11;
  mc.watermark = kgw_cfg();
  mc.corpus_seqs = 20;
  mc.corpus_len = 48;
  mc.train_steps = 150;
  mc.batch_size = 8;
  mc.learning_rate = 0.5;
  mc.distill_samples = 30;
  mc.scarce_samples = 10;
  mc.distill_len = 48;
  mc.distill_steps = 150;
  mc.budget = EvalBudget{10, 60, 12};
  std::vector<MotivationRow> rows = motivation_experiment(mc);
  REQUIRE(rows.size() == 4);
  std::set<std::string> names;
  for (const MotivationRow& r : rows) {
    names.insert(r.approach);
    CHECK(std::isfinite(r.median_p));
    CHECK(std::isfinite(r.domain_perplexity));
    CHECK(r.median_p >= 0.0);
    CHECK(r.median_p <= 1.0);
    CHECK(r.domain_perplexity > 0.0);
  }
  CHECK(names.count("distill-finetuned") == 1);
  CHECK(names.count("finetune-distilled") == 1);
  CHECK(names.count("base-on-watermarked-data") == 1);
  CHECK(names.count("wapiti-lambda-1") == 1);
}
