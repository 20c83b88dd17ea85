#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wapiti/core.hpp"
#include "wapiti/detect.hpp"
#include "wapiti/eval.hpp"
#include "wapiti/io.hpp"
#include "wapiti/lm.hpp"
#include "wapiti/prng.hpp"
#include "wapiti/stats.hpp"
#include "wapiti/wapiti.hpp"
#include "wapiti/watermark.hpp"

namespace py = pybind11;
using namespace wapiti;

PYBIND11_MODULE(_core, m) {
  m.doc() = "language-model watermarking laboratory core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::enum_<Scheme>(m, "Scheme")
      .value("KGW", Scheme::KGW)
      .value("AAR", Scheme::AAR);

  py::class_<WatermarkConfig>(m, "WatermarkConfig")
      .def(py::init([](const std::string& scheme, uint32_t k, double gamma,
                       double delta, uint64_t key) {
             WatermarkConfig c;
             c.scheme = scheme_from_name(scheme);
             c.k = k;
             c.gamma = gamma;
             c.delta = delta;
             c.key = key;
             return c;
           }),
           py::arg("scheme") = "kgw", py::arg("k") = 1,
           py::arg("gamma") = 0.25, py::arg("delta") = 4.0,
           py::arg("key") = 0)
      .def_readwrite("scheme", &WatermarkConfig::scheme)
      .def_readwrite("k", &WatermarkConfig::k)
      .def_readwrite("gamma", &WatermarkConfig::gamma)
      .def_readwrite("delta", &WatermarkConfig::delta)
      .def_readwrite("key", &WatermarkConfig::key)
      .def("validate", &WatermarkConfig::validate, py::arg("vocab_size"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](uint64_t steps, uint32_t batch_size, double lr,
                       uint64_t seed) {
             return TrainConfig{steps, batch_size, lr, seed};
           }),
           py::arg("steps") = 0, py::arg("batch_size") = 32,
           py::arg("learning_rate") = 0.5, py::arg("seed") = 0)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("vocab_size", &Checkpoint::vocab_size)
      .def_readonly("order", &Checkpoint::order)
      .def_readwrite("logits", &Checkpoint::logits)
      .def_readwrite("metadata", &Checkpoint::metadata)
      .def("rows", &Checkpoint::rows)
      .def("row", [](const Checkpoint& c, uint64_t r) {
        if (r >= c.rows()) throw ValidationError("row index out of range");
        const double* p = c.row(r);
        return std::vector<double>(p, p + c.vocab_size);
      });

  py::class_<ParamDelta>(m, "ParamDelta")
      .def_readonly("vocab_size", &ParamDelta::vocab_size)
      .def_readonly("order", &ParamDelta::order)
      .def_readwrite("values", &ParamDelta::values)
      .def_readonly("base_id", &ParamDelta::base_id)
      .def_readonly("watermarked_id", &ParamDelta::watermarked_id);

  py::class_<GenerationRecord>(m, "GenerationRecord")
      .def_readwrite("prompt", &GenerationRecord::prompt)
      .def_readwrite("completion", &GenerationRecord::completion)
      .def_readwrite("model_id", &GenerationRecord::model_id)
      .def_readwrite("watermark", &GenerationRecord::watermark)
      .def_readwrite("seed", &GenerationRecord::seed);

  py::class_<DetectionResult>(m, "DetectionResult")
      .def_readonly("scheme", &DetectionResult::scheme)
      .def_readonly("statistic", &DetectionResult::statistic)
      .def_readonly("scored_tokens", &DetectionResult::scored_tokens)
      .def_readonly("p_value", &DetectionResult::p_value)
      .def_readonly("p_value_exact", &DetectionResult::p_value_exact)
      .def_readonly("green_fraction", &DetectionResult::green_fraction);

  py::class_<IntegrationResult>(m, "IntegrationResult")
      .def_readonly("checkpoint", &IntegrationResult::checkpoint)
      .def_readonly("lambda_", &IntegrationResult::lambda)
      .def_readonly("delta_norm", &IntegrationResult::delta_norm);

  py::class_<EvalBudget>(m, "EvalBudget")
      .def(py::init([](uint32_t n_texts, uint32_t text_len, uint64_t seed) {
             return EvalBudget{n_texts, text_len, seed};
           }),
           py::arg("n_texts") = 200, py::arg("text_len") = 200,
           py::arg("seed") = 0)
      .def_readwrite("n_texts", &EvalBudget::n_texts)
      .def_readwrite("text_len", &EvalBudget::text_len)
      .def_readwrite("seed", &EvalBudget::seed);

  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("lambda_", &SweepRow::lambda)
      .def_readonly("median_p", &SweepRow::median_p)
      .def_readonly("perplexity", &SweepRow::perplexity)
      .def_readonly("auroc", &SweepRow::auroc_value);

  py::class_<OrthogonalityReport>(m, "OrthogonalityReport")
      .def_readonly("cosine", &OrthogonalityReport::cosine)
      .def_readonly("watermark_delta_norm",
                    &OrthogonalityReport::watermark_delta_norm)
      .def_readonly("finetune_delta_norm",
                    &OrthogonalityReport::finetune_delta_norm);

  // model construction and training
  m.def("make_checkpoint", &make_checkpoint, py::arg("vocab_size"),
        py::arg("order"), py::arg("fill") = 0.0);
  m.def("synth_source", &synth_source, py::arg("vocab_size"), py::arg("order"),
        py::arg("seed"), py::arg("spread") = 3.0);
  m.def("synth_corpus", &synth_corpus, py::arg("source"), py::arg("n_seqs"),
        py::arg("seq_len"), py::arg("seed"));
  m.def("train", &train, py::arg("init"), py::arg("corpus"), py::arg("config"));
  m.def(
      "sample",
      [](const Checkpoint& c, const TokenSeq& prompt, uint32_t length,
         double temperature, uint64_t seed) {
        return sample(c, prompt, length, temperature, seed);
      },
      py::arg("model"), py::arg("prompt"), py::arg("length"),
      py::arg("temperature"), py::arg("seed"));
  m.def("perplexity", &perplexity, py::arg("model"), py::arg("corpus"));

  // watermarking
  m.def(
      "generate_watermarked",
      [](const Checkpoint& c, const WatermarkConfig& cfg,
         const TokenSeq& prompt, uint32_t length, double temperature,
         uint64_t seed) {
        return generate_watermarked(c, cfg, prompt, length, temperature, seed);
      },
      py::arg("model"), py::arg("config"), py::arg("prompt"),
      py::arg("length"), py::arg("temperature"), py::arg("seed"));
  m.def(
      "detect",
      [](const TokenSeq& text, const WatermarkConfig& cfg, uint32_t vocab) {
        return detect(text, cfg, vocab);
      },
      py::arg("text"), py::arg("config"), py::arg("vocab_size"));

  // distillation and parameter transfer
  m.def("distill", &distill, py::arg("teacher"), py::arg("watermark"),
        py::arg("student"), py::arg("n_samples"), py::arg("seq_len"),
        py::arg("train_config"));
  m.def("extract_delta", &extract_delta, py::arg("base"),
        py::arg("watermarked"));
  m.def("integrate", &integrate, py::arg("finetuned"), py::arg("delta"),
        py::arg("lambda_"));
  m.def(
      "orthogonality_report",
      [](const Checkpoint& base, const Checkpoint& wm, const Checkpoint& ft) {
        return orthogonality_report(base, wm, ft);
      },
      py::arg("base"), py::arg("watermarked"), py::arg("finetuned"));

  // statistics
  m.def("normal_sf", &normal_sf, py::arg("z"));
  m.def("binomial_sf", &binomial_sf, py::arg("count"), py::arg("trials"),
        py::arg("gamma"));
  m.def("gamma_q", &gamma_q, py::arg("a"), py::arg("x"));
  m.def(
      "ks_uniformity",
      [](std::vector<double> xs) { return ks_uniformity(xs); },
      py::arg("values"));
  m.def("ks_critical", &ks_critical, py::arg("n"), py::arg("alpha"));
  m.def(
      "auroc",
      [](std::vector<double> pos, std::vector<double> neg) {
        return auroc(pos, neg);
      },
      py::arg("positives"), py::arg("negatives"));
  m.def(
      "spearman",
      [](std::vector<double> a, std::vector<double> b) {
        return spearman(a, b);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "median", [](std::vector<double> xs) { return median(xs); },
      py::arg("values"));

  // analyses and attacks
  m.def(
      "seq_rep_3", [](const TokenSeq& t) { return seq_rep_3(t); },
      py::arg("text"));
  m.def("ngram_js_divergence", &ngram_js_divergence, py::arg("a"), py::arg("b"),
        py::arg("n"), py::arg("min_freq") = 5);
  m.def(
      "text_edit_attack",
      [](const TokenSeq& text, double eps, uint64_t seed, uint32_t vocab) {
        return text_edit_attack(text, eps, seed, vocab);
      },
      py::arg("text"), py::arg("eps"), py::arg("seed"), py::arg("vocab_size"));
  m.def(
      "lambda_sweep",
      [](const Checkpoint& ft, const ParamDelta& d, std::vector<double> grid,
         const WatermarkConfig& cfg, const Checkpoint& judge,
         const EvalBudget& budget) {
        return lambda_sweep(ft, d, grid, cfg, judge, budget);
      },
      py::arg("finetuned"), py::arg("delta"), py::arg("grid"),
      py::arg("watermark"), py::arg("judge"), py::arg("budget"));

  // persistence
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"),
        py::arg("checkpoint"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("save_delta", &save_delta, py::arg("path"), py::arg("delta"));
  m.def("load_delta", &load_delta, py::arg("path"));
  m.def("save_records", &save_records, py::arg("path"), py::arg("records"),
        py::arg("config_hash"));
  m.def("load_records", &load_records, py::arg("path"));
  m.def("save_corpus", &save_corpus, py::arg("path"), py::arg("corpus"));
  m.def("load_corpus", &load_corpus, py::arg("path"), py::arg("vocab_size"));

  // deterministic primitives
  m.def("mix64", &mix64, py::arg("x"));
  m.def("uniform_at", &uniform_at, py::arg("seed"), py::arg("index"));
  m.def("uniform_stream", &uniform_stream, py::arg("seed"), py::arg("count"));
  m.def("permutation", &permutation, py::arg("seed"), py::arg("n"));
  m.def(
      "context_seed",
      [](uint64_t key, uint64_t tag, const TokenSeq& ctx) {
        return context_seed(key, tag, ctx);
      },
      py::arg("key"), py::arg("scheme_tag"), py::arg("context"));
  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("salt"));
}
