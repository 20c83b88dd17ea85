#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wapiti/core.hpp"
#include "wapiti/detect.hpp"
#include "wapiti/eval.hpp"
#include "wapiti/io.hpp"
#include "wapiti/lm.hpp"
#include "wapiti/prng.hpp"
#include "wapiti/stats.hpp"
#include "wapiti/wapiti.hpp"
#include "wapiti/watermark.hpp"

namespace {

using nlohmann::json;
using namespace wapiti;

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ValidationError("malformed config JSON in " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw ValidationError("config file must hold a JSON object");
  return cfg;
}

// Config-file values apply only where the command line left the option
// untouched; flags win.
template <class T>
void merge_cfg(CLI::App* cmd, const json& cfg, const std::string& name, T& var) {
  if (cmd->count("--" + name) > 0 || !cfg.contains(name)) return;
  try {
    var = cfg.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + name + "' has the wrong type");
  }
}

struct WatermarkFlags {
  std::string scheme = "kgw";
  uint32_t k = 1;
  double gamma = 0.25;
  double delta = 4.0;
  std::string key = "0";

  void attach(CLI::App* cmd) {
    cmd->add_option("--scheme", scheme, "watermark scheme: kgw or aar");
    cmd->add_option("--k", k, "watermark context width");
    cmd->add_option("--gamma", gamma, "kgw green-list fraction");
    cmd->add_option("--delta", delta, "kgw green logit boost");
    cmd->add_option("--key", key, "watermark key (decimal or 0x-hex)");
  }

  void merge(CLI::App* cmd, const json& cfg) {
    merge_cfg(cmd, cfg, "scheme", scheme);
    merge_cfg(cmd, cfg, "k", k);
    merge_cfg(cmd, cfg, "gamma", gamma);
    merge_cfg(cmd, cfg, "delta", delta);
    merge_cfg(cmd, cfg, "key", key);
  }

  WatermarkConfig to_config() const {
    WatermarkConfig w;
    w.scheme = scheme_from_name(scheme);
    w.k = k;
    w.gamma = gamma;
    w.delta = delta;
    w.key = parse_u64(key);
    return w;
  }

  json to_json() const {
    json j = watermark_to_json(to_config());
    return j;
  }
};

size_t worker_count() {
  if (const char* env = std::getenv("WAPITI_THREADS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return v;
    throw ValidationError("WAPITI_THREADS must be a positive integer");
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      size_t pos = 0;
      grid.push_back(std::stod(cell, &pos));
      if (pos != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ValidationError("bad grid value: " + cell);
    }
  }
  if (grid.empty()) throw ValidationError("empty lambda grid");
  return grid;
}

TokenSeq parse_token_list(const std::string& text, uint32_t vocab_size) {
  TokenSeq out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    uint64_t id = parse_u64(cell);
    if (id >= vocab_size) throw ValidationError("prompt token id out of range");
    out.push_back(static_cast<TokenId>(id));
  }
  return out;
}

int cmd_train(CLI::App* cmd, const std::string& config_path,
              std::string corpus_path, std::string init_path,
              std::string out_path, uint32_t vocab, uint32_t order,
              uint64_t steps, uint32_t batch, double lr, std::string seed_s,
              std::string model_id) {
  json cfg = load_config_file(config_path);
  merge_cfg(cmd, cfg, "corpus", corpus_path);
  merge_cfg(cmd, cfg, "init", init_path);
  merge_cfg(cmd, cfg, "out", out_path);
  merge_cfg(cmd, cfg, "vocab", vocab);
  merge_cfg(cmd, cfg, "order", order);
  merge_cfg(cmd, cfg, "steps", steps);
  merge_cfg(cmd, cfg, "batch", batch);
  merge_cfg(cmd, cfg, "lr", lr);
  merge_cfg(cmd, cfg, "seed", seed_s);
  merge_cfg(cmd, cfg, "model-id", model_id);
  if (corpus_path.empty()) throw ValidationError("--corpus is required");
  if (out_path.empty()) throw ValidationError("--out is required");

  Checkpoint init;
  if (!init_path.empty()) {
    init = load_checkpoint(init_path);
  } else {
    init = make_checkpoint(vocab, order);
    init.vocab_tokens = default_vocab(vocab).tokens;
  }
  Corpus corpus = load_corpus(corpus_path, init.vocab_size);
  TrainConfig tc{steps, batch, lr, parse_u64(seed_s)};
  Checkpoint trained = train(init, corpus, tc);
  if (!model_id.empty()) trained.metadata["model_id"] = model_id;
  trained.metadata["train_seed"] = seed_s;
  if (!init_path.empty() && init.metadata.count("model_id"))
    trained.metadata["parent_id"] = init.metadata.at("model_id");
  save_checkpoint(out_path, trained);
  std::cout << "trained " << out_path << " (steps=" << steps << ")\n";
  return 0;
}

}  // namespace

int run_app(int argc, char** argv) {
  CLI::App app{"desk-scale language-model watermarking laboratory"};
  app.require_subcommand(1);

  // train ------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "fit a k-gram LM on a token corpus");
  struct {
    std::string config, corpus, init, out, seed = "0", model_id;
    uint32_t vocab = 64, order = 1, batch = 32;
    uint64_t steps = 4000;
    double lr = 0.5;
  } tr;
  train_cmd->add_option("--config", tr.config, "JSON config file; flags win");
  train_cmd->add_option("--corpus", tr.corpus, "token-id corpus file");
  train_cmd->add_option("--init", tr.init, "starting checkpoint (default: zero logits)");
  train_cmd->add_option("--out", tr.out, "output checkpoint path");
  train_cmd->add_option("--vocab", tr.vocab, "vocabulary size for a fresh model");
  train_cmd->add_option("--order", tr.order, "context length for a fresh model");
  train_cmd->add_option("--steps", tr.steps, "SGD steps");
  train_cmd->add_option("--batch", tr.batch, "batch size");
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--seed", tr.seed, "training seed (decimal or 0x-hex)");
  train_cmd->add_option("--model-id", tr.model_id, "model id stored in metadata");

  // distill ----------------------------------------------------------
  auto* distill_cmd =
      app.add_subcommand("distill", "watermark-distill a model on its own watermarked generations");
  struct {
    std::string config, teacher, student, out, seed = "0";
    uint32_t samples = 2000, length = 128, batch = 64;
    uint64_t steps = 8000;
    double lr = 0.5;
    WatermarkFlags wm;
  } di;
  distill_cmd->add_option("--config", di.config, "JSON config file; flags win");
  distill_cmd->add_option("--teacher", di.teacher, "teacher checkpoint");
  distill_cmd->add_option("--student", di.student, "student checkpoint (default: teacher)");
  distill_cmd->add_option("--out", di.out, "output checkpoint path");
  distill_cmd->add_option("--samples", di.samples, "number of watermarked sequences");
  distill_cmd->add_option("--length", di.length, "completion length per sequence");
  distill_cmd->add_option("--steps", di.steps, "SGD steps");
  distill_cmd->add_option("--batch", di.batch, "batch size");
  distill_cmd->add_option("--lr", di.lr, "learning rate");
  distill_cmd->add_option("--seed", di.seed, "distillation seed");
  di.wm.attach(distill_cmd);

  // delta --------------------------------------------------------------
  auto* delta_cmd = app.add_subcommand("delta", "extract a watermark parameter delta");
  struct {
    std::string config, base, watermarked, out;
  } de;
  delta_cmd->add_option("--config", de.config, "JSON config file; flags win");
  delta_cmd->add_option("--base", de.base, "base checkpoint");
  delta_cmd->add_option("--watermarked", de.watermarked, "distilled checkpoint");
  delta_cmd->add_option("--out", de.out, "output delta path");

  // integrate ----------------------------------------------------------
  auto* integrate_cmd =
      app.add_subcommand("integrate", "add a scaled watermark delta to a fine-tuned model");
  struct {
    std::string config, finetuned, delta, out;
    double lambda = 1.0;
  } in;
  integrate_cmd->add_option("--config", in.config, "JSON config file; flags win");
  integrate_cmd->add_option("--finetuned", in.finetuned, "fine-tuned checkpoint");
  integrate_cmd->add_option("--delta", in.delta, "watermark delta file");
  integrate_cmd->add_option("--lambda", in.lambda, "integration coefficient");
  integrate_cmd->add_option("--out", in.out, "output checkpoint path");

  // generate -----------------------------------------------------------
  auto* generate_cmd = app.add_subcommand("generate", "sample completions, optionally watermarked");
  struct {
    std::string config, model, out, seed = "0", prompt;
    uint32_t count = 500, length = 200;
    double temperature = 1.0;
    bool watermarked = false;
    WatermarkFlags wm;
  } ge;
  generate_cmd->add_option("--config", ge.config, "JSON config file; flags win");
  generate_cmd->add_option("--model", ge.model, "model checkpoint");
  generate_cmd->add_option("--out", ge.out, "output JSONL path");
  generate_cmd->add_option("--count", ge.count, "number of completions");
  generate_cmd->add_option("--length", ge.length, "tokens per completion");
  generate_cmd->add_option("--temperature", ge.temperature, "sampling temperature");
  generate_cmd->add_option("--seed", ge.seed, "master sampling seed");
  generate_cmd->add_option("--prompt", ge.prompt, "comma-separated prompt token ids");
  generate_cmd->add_flag("--watermarked", ge.watermarked, "apply the decoding watermark");
  ge.wm.attach(generate_cmd);

  // detect ---------------------------------------------------------------
  auto* detect_cmd = app.add_subcommand("detect", "score generations for a watermark");
  struct {
    std::string config, records, negatives, out, summary;
    uint32_t vocab = 64;
    WatermarkFlags wm;
  } dt;
  detect_cmd->add_option("--config", dt.config, "JSON config file; flags win");
  detect_cmd->add_option("--records", dt.records, "JSONL generations to score");
  detect_cmd->add_option("--negatives", dt.negatives,
                         "JSONL unwatermarked generations for AUROC");
  detect_cmd->add_option("--vocab", dt.vocab, "vocabulary size");
  detect_cmd->add_option("--out", dt.out, "detection CSV path");
  detect_cmd->add_option("--summary", dt.summary, "summary JSON path");
  dt.wm.attach(detect_cmd);

  // attack ----------------------------------------------------------------
  auto* attack_cmd = app.add_subcommand("attack", "watermark removal attacks");
  attack_cmd->require_subcommand(1);
  auto* edit_cmd = attack_cmd->add_subcommand("edit", "random token replacement");
  struct {
    std::string config, records, out, seed = "0";
    double eps = 0.16;
    uint32_t vocab = 64;
  } ed;
  edit_cmd->add_option("--config", ed.config, "JSON config file; flags win");
  edit_cmd->add_option("--records", ed.records, "JSONL generations to corrupt");
  edit_cmd->add_option("--eps", ed.eps, "fraction of positions to replace");
  edit_cmd->add_option("--vocab", ed.vocab, "vocabulary size");
  edit_cmd->add_option("--seed", ed.seed, "attack seed");
  edit_cmd->add_option("--out", ed.out, "output JSONL path");

  auto* ft_cmd = attack_cmd->add_subcommand("finetune", "continued training on clean data");
  struct {
    std::string config, model, corpus, judge, out, seed = "0";
    uint64_t steps = 1000, every = 200;
    uint32_t batch = 32, gen_count = 200, gen_length = 200;
    double lr = 0.5;
    WatermarkFlags wm;
  } fa;
  ft_cmd->add_option("--config", fa.config, "JSON config file; flags win");
  ft_cmd->add_option("--model", fa.model, "checkpoint under attack");
  ft_cmd->add_option("--corpus", fa.corpus, "clean corpus file");
  ft_cmd->add_option("--judge", fa.judge, "domain ground-truth checkpoint for perplexity");
  ft_cmd->add_option("--steps", fa.steps, "total attack steps");
  ft_cmd->add_option("--every", fa.every, "checkpoint interval");
  ft_cmd->add_option("--batch", fa.batch, "batch size");
  ft_cmd->add_option("--lr", fa.lr, "learning rate");
  ft_cmd->add_option("--gen-count", fa.gen_count, "generations per checkpoint");
  ft_cmd->add_option("--gen-length", fa.gen_length, "tokens per generation");
  ft_cmd->add_option("--seed", fa.seed, "attack seed");
  ft_cmd->add_option("--out", fa.out, "attack trace CSV path");
  fa.wm.attach(ft_cmd);

  // sweep -------------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweeps");
  sweep_cmd->require_subcommand(1);
  auto* lambda_cmd = sweep_cmd->add_subcommand("lambda", "integration coefficient sweep");
  struct {
    std::string config, finetuned, delta, judge, out, seed = "0";
    std::string grid = "0,0.25,0.5,0.75,1,1.5,2,2.5,3,3.5,4";
    uint32_t gen_count = 200, gen_length = 200;
    WatermarkFlags wm;
  } sw;
  lambda_cmd->add_option("--config", sw.config, "JSON config file; flags win");
  lambda_cmd->add_option("--finetuned", sw.finetuned, "fine-tuned checkpoint");
  lambda_cmd->add_option("--delta-file", sw.delta, "watermark delta file");
  lambda_cmd->add_option("--judge", sw.judge, "domain ground-truth checkpoint");
  lambda_cmd->add_option("--grid", sw.grid, "comma-separated lambda values");
  lambda_cmd->add_option("--gen-count", sw.gen_count, "generations per cell");
  lambda_cmd->add_option("--gen-length", sw.gen_length, "tokens per generation");
  lambda_cmd->add_option("--seed", sw.seed, "evaluation seed");
  lambda_cmd->add_option("--out", sw.out, "sweep CSV path");
  sw.wm.attach(lambda_cmd);

  // analyze --------------------------------------------------------------
  auto* analyze_cmd = app.add_subcommand("analyze", "corpus and delta analyses");
  analyze_cmd->require_subcommand(1);

  auto* js_cmd = analyze_cmd->add_subcommand("ngram-js", "n-gram JS divergence of two corpora");
  struct {
    std::string config, corpus_a, corpus_b, out;
    uint32_t n = 2, vocab = 64;
    uint64_t min_freq = 5;
  } js_args;
  js_cmd->add_option("--config", js_args.config, "JSON config file; flags win");
  js_cmd->add_option("--corpus-a", js_args.corpus_a, "first corpus file");
  js_cmd->add_option("--corpus-b", js_args.corpus_b, "second corpus file");
  js_cmd->add_option("--n", js_args.n, "n-gram size");
  js_cmd->add_option("--min-freq", js_args.min_freq, "frequency filter threshold");
  js_cmd->add_option("--vocab", js_args.vocab, "vocabulary size");
  js_cmd->add_option("--out", js_args.out, "output JSON path (default: stdout)");

  auto* cos_cmd = analyze_cmd->add_subcommand("cosine", "cosine similarity of two deltas");
  struct {
    std::string config, delta_a, delta_b, out;
  } co;
  cos_cmd->add_option("--config", co.config, "JSON config file; flags win");
  cos_cmd->add_option("--delta-a", co.delta_a, "first delta file");
  cos_cmd->add_option("--delta-b", co.delta_b, "second delta file");
  cos_cmd->add_option("--out", co.out, "output JSON path (default: stdout)");

  auto* ortho_cmd = analyze_cmd->add_subcommand(
      "ortho", "orthogonality of watermark delta vs fine-tune task vector");
  struct {
    std::string config, base, watermarked, finetuned, out;
  } orth;
  ortho_cmd->add_option("--config", orth.config, "JSON config file; flags win");
  ortho_cmd->add_option("--base", orth.base, "base checkpoint");
  ortho_cmd->add_option("--watermarked", orth.watermarked, "distilled checkpoint");
  ortho_cmd->add_option("--finetuned", orth.finetuned, "fine-tuned checkpoint");
  ortho_cmd->add_option("--out", orth.out, "output JSON path (default: stdout)");

  auto* rep_cmd = analyze_cmd->add_subcommand("rep3", "trigram repetition of generations");
  struct {
    std::string config, records, out;
  } rp;
  rep_cmd->add_option("--config", rp.config, "JSON config file; flags win");
  rep_cmd->add_option("--records", rp.records, "JSONL generations");
  rep_cmd->add_option("--out", rp.out, "output JSON path (default: stdout)");

  // experiment ------------------------------------------------------------
  auto* experiment_cmd = app.add_subcommand("experiment", "end-to-end studies");
  experiment_cmd->require_subcommand(1);
  auto* motiv_cmd = experiment_cmd->add_subcommand(
      "motivation", "compare direct watermarking approaches against train-free transfer");
  struct {
    std::string config, out_dir, seed = "1";
    uint32_t vocab = 64, order = 1;
    uint32_t corpus_seqs = 400, corpus_len = 128;
    uint64_t train_steps = 4000;
    uint32_t batch = 32;
    double lr = 0.5;
    uint32_t distill_samples = 2000, scarce_samples = 100, distill_len = 128;
    uint64_t distill_steps = 8000;
    uint32_t gen_count = 200, gen_length = 200;
    WatermarkFlags wm;
  } mo;
  motiv_cmd->add_option("--config", mo.config, "JSON config file; flags win");
  motiv_cmd->add_option("--out-dir", mo.out_dir, "output directory");
  motiv_cmd->add_option("--master-seed", mo.seed, "master seed");
  motiv_cmd->add_option("--vocab", mo.vocab, "vocabulary size");
  motiv_cmd->add_option("--order", mo.order, "model order");
  motiv_cmd->add_option("--corpus-seqs", mo.corpus_seqs, "sequences per domain corpus");
  motiv_cmd->add_option("--corpus-len", mo.corpus_len, "tokens per corpus sequence");
  motiv_cmd->add_option("--train-steps", mo.train_steps, "SGD steps per training phase");
  motiv_cmd->add_option("--batch", mo.batch, "batch size");
  motiv_cmd->add_option("--lr", mo.lr, "learning rate");
  motiv_cmd->add_option("--distill-samples", mo.distill_samples, "full distillation sample budget");
  motiv_cmd->add_option("--scarce-samples", mo.scarce_samples, "scarce-domain sample budget");
  motiv_cmd->add_option("--distill-len", mo.distill_len, "distillation completion length");
  motiv_cmd->add_option("--distill-steps", mo.distill_steps, "distillation SGD steps");
  motiv_cmd->add_option("--gen-count", mo.gen_count, "evaluation generations per model");
  motiv_cmd->add_option("--gen-length", mo.gen_length, "tokens per evaluation generation");
  mo.wm.attach(motiv_cmd);

  // report ------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "merge artifacts that share one config hash");
  struct {
    std::vector<std::string> inputs;
    std::string out;
  } re;
  report_cmd->add_option("inputs", re.inputs, "CSV/JSONL artifacts")->required();
  report_cmd->add_option("--out", re.out, "summary JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::string name = e.get_name();
    std::string msg = e.what();
    bool usage = name == "ExtrasError" ||
                 (name == "RequiredError" &&
                  msg.find("subcommand") != std::string::npos);
    return usage ? 2 : 3;
  }

  if (train_cmd->parsed())
    return cmd_train(train_cmd, tr.config, tr.corpus, tr.init, tr.out, tr.vocab,
                     tr.order, tr.steps, tr.batch, tr.lr, tr.seed, tr.model_id);

  if (distill_cmd->parsed()) {
    json cfg = load_config_file(di.config);
    merge_cfg(distill_cmd, cfg, "teacher", di.teacher);
    merge_cfg(distill_cmd, cfg, "student", di.student);
    merge_cfg(distill_cmd, cfg, "out", di.out);
    merge_cfg(distill_cmd, cfg, "samples", di.samples);
    merge_cfg(distill_cmd, cfg, "length", di.length);
    merge_cfg(distill_cmd, cfg, "steps", di.steps);
    merge_cfg(distill_cmd, cfg, "batch", di.batch);
    merge_cfg(distill_cmd, cfg, "lr", di.lr);
    merge_cfg(distill_cmd, cfg, "seed", di.seed);
    di.wm.merge(distill_cmd, cfg);
    if (di.teacher.empty() || di.out.empty())
      throw ValidationError("--teacher and --out are required");
    Checkpoint teacher = load_checkpoint(di.teacher);
    Checkpoint student = di.student.empty() ? teacher : load_checkpoint(di.student);
    TrainConfig tc{di.steps, di.batch, di.lr, parse_u64(di.seed)};
    Checkpoint out = distill(teacher, di.wm.to_config(), student, di.samples,
                             di.length, tc);
    out.metadata["model_id"] =
        (teacher.metadata.count("model_id") ? teacher.metadata.at("model_id")
                                            : std::string("model")) +
        "-distilled";
    save_checkpoint(di.out, out);
    std::cout << "distilled " << di.out << " (samples=" << di.samples << ")\n";
    return 0;
  }

  if (delta_cmd->parsed()) {
    json cfg = load_config_file(de.config);
    merge_cfg(delta_cmd, cfg, "base", de.base);
    merge_cfg(delta_cmd, cfg, "watermarked", de.watermarked);
    merge_cfg(delta_cmd, cfg, "out", de.out);
    if (de.base.empty() || de.watermarked.empty() || de.out.empty())
      throw ValidationError("--base, --watermarked and --out are required");
    ParamDelta d = extract_delta(load_checkpoint(de.base),
                                 load_checkpoint(de.watermarked));
    save_delta(de.out, d);
    std::cout << "delta " << de.out << "\n";
    return 0;
  }

  if (integrate_cmd->parsed()) {
    json cfg = load_config_file(in.config);
    merge_cfg(integrate_cmd, cfg, "finetuned", in.finetuned);
    merge_cfg(integrate_cmd, cfg, "delta", in.delta);
    merge_cfg(integrate_cmd, cfg, "lambda", in.lambda);
    merge_cfg(integrate_cmd, cfg, "out", in.out);
    if (in.finetuned.empty() || in.delta.empty() || in.out.empty())
      throw ValidationError("--finetuned, --delta and --out are required");
    IntegrationResult res =
        integrate(load_checkpoint(in.finetuned), load_delta(in.delta), in.lambda);
    res.checkpoint.metadata["model_id"] =
        res.finetuned_id + "+" + format_double(in.lambda) + "*delta";
    res.checkpoint.metadata["lambda"] = format_double(in.lambda);
    save_checkpoint(in.out, res.checkpoint);
    std::cout << "integrated " << in.out << " (lambda=" << format_double(in.lambda)
              << ", delta_norm=" << format_double(res.delta_norm) << ")\n";
    return 0;
  }

  if (generate_cmd->parsed()) {
    json cfg = load_config_file(ge.config);
    merge_cfg(generate_cmd, cfg, "model", ge.model);
    merge_cfg(generate_cmd, cfg, "out", ge.out);
    merge_cfg(generate_cmd, cfg, "count", ge.count);
    merge_cfg(generate_cmd, cfg, "length", ge.length);
    merge_cfg(generate_cmd, cfg, "temperature", ge.temperature);
    merge_cfg(generate_cmd, cfg, "seed", ge.seed);
    merge_cfg(generate_cmd, cfg, "prompt", ge.prompt);
    merge_cfg(generate_cmd, cfg, "watermarked", ge.watermarked);
    ge.wm.merge(generate_cmd, cfg);
    if (ge.model.empty() || ge.out.empty())
      throw ValidationError("--model and --out are required");
    Checkpoint model = load_checkpoint(ge.model);
    TokenSeq prompt = parse_token_list(ge.prompt, model.vocab_size);
    uint64_t master = parse_u64(ge.seed);
    std::string model_id =
        model.metadata.count("model_id") ? model.metadata.at("model_id") : "model";
    json semantic{{"command", "generate"},   {"count", ge.count},
                  {"length", ge.length},     {"temperature", ge.temperature},
                  {"seed", ge.seed},         {"prompt", ge.prompt},
                  {"watermarked", ge.watermarked}};
    if (ge.watermarked) semantic["watermark"] = ge.wm.to_json();
    std::string hash = config_hash(semantic);
    std::vector<GenerationRecord> records;
    records.reserve(ge.count);
    for (uint32_t i = 0; i < ge.count; ++i) {
      uint64_t s = derive_seed(master, i);
      GenerationRecord r =
          ge.watermarked
              ? generate_watermarked(model, ge.wm.to_config(), prompt, ge.length,
                                     ge.temperature, s)
              : sample(model, prompt, ge.length, ge.temperature, s);
      r.model_id = model_id;
      records.push_back(std::move(r));
    }
    save_records(ge.out, records, hash);
    std::cout << "generated " << ge.out << " (count=" << ge.count << ")\n";
    return 0;
  }

  if (detect_cmd->parsed()) {
    json cfg = load_config_file(dt.config);
    merge_cfg(detect_cmd, cfg, "records", dt.records);
    merge_cfg(detect_cmd, cfg, "negatives", dt.negatives);
    merge_cfg(detect_cmd, cfg, "vocab", dt.vocab);
    merge_cfg(detect_cmd, cfg, "out", dt.out);
    merge_cfg(detect_cmd, cfg, "summary", dt.summary);
    dt.wm.merge(detect_cmd, cfg);
    if (dt.records.empty() || dt.out.empty())
      throw ValidationError("--records and --out are required");
    WatermarkConfig wm = dt.wm.to_config();
    json semantic{{"command", "detect"},
                  {"vocab", dt.vocab},
                  {"watermark", dt.wm.to_json()}};
    std::string hash = config_hash(semantic);
    std::vector<GenerationRecord> records = load_records(dt.records);
    if (records.empty()) throw ValidationError("no records in " + dt.records);
    std::vector<std::vector<std::string>> rows;
    std::vector<double> ps, stats;
    for (size_t i = 0; i < records.size(); ++i) {
      DetectionResult r = detect(records[i].completion, wm, dt.vocab);
      ps.push_back(r.p_value);
      stats.push_back(r.statistic);
      rows.push_back({std::to_string(i), scheme_name(r.scheme),
                      format_double(r.statistic), std::to_string(r.scored_tokens),
                      format_double(r.p_value)});
    }
    save_csv(dt.out, hash,
             {"record_id", "scheme", "statistic", "scored_tokens", "p_value"}, rows);
    json summary{{"config_hash", hash},
                 {"median_p", median(ps)},
                 {"records", records.size()}};
    if (!dt.negatives.empty()) {
      std::vector<GenerationRecord> negs = load_records(dt.negatives);
      std::vector<double> neg_stats;
      for (const auto& r : negs)
        neg_stats.push_back(detect(r.completion, wm, dt.vocab).statistic);
      summary["auroc"] = auroc(stats, neg_stats);
    }
    if (!dt.summary.empty()) write_json_file(dt.summary, summary);
    std::cout << "detect median_p=" << format_double(median(ps)) << " -> " << dt.out
              << "\n";
    return 0;
  }

  if (edit_cmd->parsed()) {
    json cfg = load_config_file(ed.config);
    merge_cfg(edit_cmd, cfg, "records", ed.records);
    merge_cfg(edit_cmd, cfg, "eps", ed.eps);
    merge_cfg(edit_cmd, cfg, "vocab", ed.vocab);
    merge_cfg(edit_cmd, cfg, "seed", ed.seed);
    merge_cfg(edit_cmd, cfg, "out", ed.out);
    if (ed.records.empty() || ed.out.empty())
      throw ValidationError("--records and --out are required");
    json semantic{{"command", "attack-edit"},
                  {"eps", ed.eps},
                  {"vocab", ed.vocab},
                  {"seed", ed.seed}};
    std::string hash = config_hash(semantic);
    uint64_t master = parse_u64(ed.seed);
    std::vector<GenerationRecord> records = load_records(ed.records);
    for (size_t i = 0; i < records.size(); ++i) {
      records[i].completion = text_edit_attack(
          records[i].completion, ed.eps, derive_seed(master, i), ed.vocab);
      records[i].model_id += "+edit";
    }
    save_records(ed.out, records, hash);
    std::cout << "edited " << ed.out << " (eps=" << format_double(ed.eps) << ")\n";
    return 0;
  }

  if (ft_cmd->parsed()) {
    json cfg = load_config_file(fa.config);
    merge_cfg(ft_cmd, cfg, "model", fa.model);
    merge_cfg(ft_cmd, cfg, "corpus", fa.corpus);
    merge_cfg(ft_cmd, cfg, "judge", fa.judge);
    merge_cfg(ft_cmd, cfg, "steps", fa.steps);
    merge_cfg(ft_cmd, cfg, "every", fa.every);
    merge_cfg(ft_cmd, cfg, "batch", fa.batch);
    merge_cfg(ft_cmd, cfg, "lr", fa.lr);
    merge_cfg(ft_cmd, cfg, "gen-count", fa.gen_count);
    merge_cfg(ft_cmd, cfg, "gen-length", fa.gen_length);
    merge_cfg(ft_cmd, cfg, "seed", fa.seed);
    merge_cfg(ft_cmd, cfg, "out", fa.out);
    fa.wm.merge(ft_cmd, cfg);
    if (fa.model.empty() || fa.corpus.empty() || fa.judge.empty() || fa.out.empty())
      throw ValidationError("--model, --corpus, --judge and --out are required");
    Checkpoint model = load_checkpoint(fa.model);
    Checkpoint judge = load_checkpoint(fa.judge);
    Corpus clean = load_corpus(fa.corpus, model.vocab_size);
    uint64_t master = parse_u64(fa.seed);
    json semantic{{"command", "attack-finetune"}, {"steps", fa.steps},
                  {"every", fa.every},            {"batch", fa.batch},
                  {"lr", fa.lr},                  {"gen_count", fa.gen_count},
                  {"gen_length", fa.gen_length},  {"seed", fa.seed},
                  {"watermark", fa.wm.to_json()}};
    std::string hash = config_hash(semantic);
    TrainConfig tc{0, fa.batch, fa.lr, derive_seed(master, 1)};
    EvalBudget budget{fa.gen_count, fa.gen_length, derive_seed(master, 2)};
    AttackTrace trace = finetune_attack(model, clean, fa.steps, fa.every,
                                        fa.wm.to_config(), judge, tc, budget);
    std::vector<std::vector<std::string>> rows;
    for (const AttackPoint& p : trace.points)
      rows.push_back({std::to_string(p.step), format_double(p.median_p),
                      format_double(p.domain_perplexity)});
    save_csv(fa.out, hash, {"step", "median_p", "domain_perplexity"}, rows);
    std::cout << "attack finetune -> " << fa.out << " (final median_p="
              << format_double(trace.points.back().median_p) << ")\n";
    return 0;
  }

  if (lambda_cmd->parsed()) {
    json cfg = load_config_file(sw.config);
    merge_cfg(lambda_cmd, cfg, "finetuned", sw.finetuned);
    merge_cfg(lambda_cmd, cfg, "delta-file", sw.delta);
    merge_cfg(lambda_cmd, cfg, "judge", sw.judge);
    merge_cfg(lambda_cmd, cfg, "grid", sw.grid);
    merge_cfg(lambda_cmd, cfg, "gen-count", sw.gen_count);
    merge_cfg(lambda_cmd, cfg, "gen-length", sw.gen_length);
    merge_cfg(lambda_cmd, cfg, "seed", sw.seed);
    merge_cfg(lambda_cmd, cfg, "out", sw.out);
    sw.wm.merge(lambda_cmd, cfg);
    if (sw.finetuned.empty() || sw.delta.empty() || sw.judge.empty() || sw.out.empty())
      throw ValidationError(
          "--finetuned, --delta-file, --judge and --out are required");
    Checkpoint ft = load_checkpoint(sw.finetuned);
    ParamDelta d = load_delta(sw.delta);
    Checkpoint judge = load_checkpoint(sw.judge);
    std::vector<double> grid = parse_grid(sw.grid);
    json semantic{{"command", "sweep-lambda"},  {"grid", sw.grid},
                  {"gen_count", sw.gen_count},  {"gen_length", sw.gen_length},
                  {"seed", sw.seed},            {"watermark", sw.wm.to_json()}};
    std::string hash = config_hash(semantic);
    EvalBudget budget{sw.gen_count, sw.gen_length, parse_u64(sw.seed)};
    std::vector<SweepRow> rows = lambda_sweep(ft, d, grid, sw.wm.to_config(),
                                              judge, budget, worker_count());
    std::vector<std::vector<std::string>> out_rows;
    for (const SweepRow& r : rows)
      out_rows.push_back({format_double(r.lambda), format_double(r.median_p),
                          format_double(r.perplexity), format_double(r.auroc_value)});
    save_csv(sw.out, hash, {"lambda", "median_p", "perplexity", "auroc"}, out_rows);
    std::cout << "sweep lambda -> " << sw.out << " (cells=" << rows.size() << ")\n";
    return 0;
  }

  if (js_cmd->parsed()) {
    json cfg = load_config_file(js_args.config);
    merge_cfg(js_cmd, cfg, "corpus-a", js_args.corpus_a);
    merge_cfg(js_cmd, cfg, "corpus-b", js_args.corpus_b);
    merge_cfg(js_cmd, cfg, "n", js_args.n);
    merge_cfg(js_cmd, cfg, "min-freq", js_args.min_freq);
    merge_cfg(js_cmd, cfg, "vocab", js_args.vocab);
    merge_cfg(js_cmd, cfg, "out", js_args.out);
    if (js_args.corpus_a.empty() || js_args.corpus_b.empty())
      throw ValidationError("--corpus-a and --corpus-b are required");
    Corpus a = load_corpus(js_args.corpus_a, js_args.vocab);
    Corpus b = load_corpus(js_args.corpus_b, js_args.vocab);
    double js = ngram_js_divergence(a, b, js_args.n, js_args.min_freq);
    json semantic{{"command", "analyze-ngram-js"},
                  {"n", js_args.n},
                  {"min_freq", js_args.min_freq},
                  {"vocab", js_args.vocab}};
    json out{{"config_hash", config_hash(semantic)},
             {"n", js_args.n},
             {"min_freq", js_args.min_freq},
             {"js_divergence_bits", js}};
    if (js_args.out.empty())
      std::cout << out.dump(2) << "\n";
    else
      write_json_file(js_args.out, out);
    return 0;
  }

  if (cos_cmd->parsed()) {
    json cfg = load_config_file(co.config);
    merge_cfg(cos_cmd, cfg, "delta-a", co.delta_a);
    merge_cfg(cos_cmd, cfg, "delta-b", co.delta_b);
    merge_cfg(cos_cmd, cfg, "out", co.out);
    if (co.delta_a.empty() || co.delta_b.empty())
      throw ValidationError("--delta-a and --delta-b are required");
    ParamDelta a = load_delta(co.delta_a);
    ParamDelta b = load_delta(co.delta_b);
    double c = cosine_similarity(a.values, b.values);
    json semantic{{"command", "analyze-cosine"}};
    json out{{"config_hash", config_hash(semantic)}, {"cosine", c}};
    if (co.out.empty())
      std::cout << out.dump(2) << "\n";
    else
      write_json_file(co.out, out);
    return 0;
  }

  if (ortho_cmd->parsed()) {
    json cfg = load_config_file(orth.config);
    merge_cfg(ortho_cmd, cfg, "base", orth.base);
    merge_cfg(ortho_cmd, cfg, "watermarked", orth.watermarked);
    merge_cfg(ortho_cmd, cfg, "finetuned", orth.finetuned);
    merge_cfg(ortho_cmd, cfg, "out", orth.out);
    if (orth.base.empty() || orth.watermarked.empty() || orth.finetuned.empty())
      throw ValidationError("--base, --watermarked and --finetuned are required");
    OrthogonalityReport rep =
        orthogonality_report(load_checkpoint(orth.base),
                             load_checkpoint(orth.watermarked),
                             load_checkpoint(orth.finetuned));
    json semantic{{"command", "analyze-ortho"}};
    json out{{"config_hash", config_hash(semantic)},
             {"cosine", rep.cosine},
             {"watermark_delta_norm", rep.watermark_delta_norm},
             {"finetune_delta_norm", rep.finetune_delta_norm}};
    if (orth.out.empty())
      std::cout << out.dump(2) << "\n";
    else
      write_json_file(orth.out, out);
    return 0;
  }

  if (rep_cmd->parsed()) {
    json cfg = load_config_file(rp.config);
    merge_cfg(rep_cmd, cfg, "records", rp.records);
    merge_cfg(rep_cmd, cfg, "out", rp.out);
    if (rp.records.empty()) throw ValidationError("--records is required");
    std::vector<GenerationRecord> records = load_records(rp.records);
    if (records.empty()) throw ValidationError("no records in " + rp.records);
    std::vector<double> reps;
    for (const auto& r : records) reps.push_back(seq_rep_3(r.completion));
    double mean = 0.0;
    for (double v : reps) mean += v;
    mean /= static_cast<double>(reps.size());
    json semantic{{"command", "analyze-rep3"}};
    json out{{"config_hash", config_hash(semantic)},
             {"mean_seq_rep_3", mean},
             {"median_seq_rep_3", median(reps)},
             {"records", records.size()}};
    if (rp.out.empty())
      std::cout << out.dump(2) << "\n";
    else
      write_json_file(rp.out, out);
    return 0;
  }

  if (motiv_cmd->parsed()) {
    json cfg = load_config_file(mo.config);
    merge_cfg(motiv_cmd, cfg, "out-dir", mo.out_dir);
    merge_cfg(motiv_cmd, cfg, "master-seed", mo.seed);
    merge_cfg(motiv_cmd, cfg, "vocab", mo.vocab);
    merge_cfg(motiv_cmd, cfg, "order", mo.order);
    merge_cfg(motiv_cmd, cfg, "corpus-seqs", mo.corpus_seqs);
    merge_cfg(motiv_cmd, cfg, "corpus-len", mo.corpus_len);
    merge_cfg(motiv_cmd, cfg, "train-steps", mo.train_steps);
    merge_cfg(motiv_cmd, cfg, "batch", mo.batch);
    merge_cfg(motiv_cmd, cfg, "lr", mo.lr);
    merge_cfg(motiv_cmd, cfg, "distill-samples", mo.distill_samples);
    merge_cfg(motiv_cmd, cfg, "scarce-samples", mo.scarce_samples);
    merge_cfg(motiv_cmd, cfg, "distill-len", mo.distill_len);
    merge_cfg(motiv_cmd, cfg, "distill-steps", mo.distill_steps);
    merge_cfg(motiv_cmd, cfg, "gen-count", mo.gen_count);
    merge_cfg(motiv_cmd, cfg, "gen-length", mo.gen_length);
    mo.wm.merge(motiv_cmd, cfg);
    if (mo.out_dir.empty()) throw ValidationError("--out-dir is required");
    std::filesystem::create_directories(mo.out_dir);
    MotivationConfig mc;
    mc.vocab_size = mo.vocab;
    mc.order = mo.order;
    mc.master_seed = parse_u64(mo.seed);
    mc.watermark = mo.wm.to_config();
    mc.corpus_seqs = mo.corpus_seqs;
    mc.corpus_len = mo.corpus_len;
    mc.train_steps = mo.train_steps;
    mc.batch_size = mo.batch;
    mc.learning_rate = mo.lr;
    mc.distill_samples = mo.distill_samples;
    mc.scarce_samples = mo.scarce_samples;
    mc.distill_len = mo.distill_len;
    mc.distill_steps = mo.distill_steps;
    mc.budget = EvalBudget{mo.gen_count, mo.gen_length,
                           derive_seed(mc.master_seed, 900)};
    json semantic{{"command", "experiment-motivation"},
                  {"master_seed", mo.seed},
                  {"vocab", mo.vocab},
                  {"order", mo.order},
                  {"corpus_seqs", mo.corpus_seqs},
                  {"corpus_len", mo.corpus_len},
                  {"train_steps", mo.train_steps},
                  {"batch", mo.batch},
                  {"lr", mo.lr},
                  {"distill_samples", mo.distill_samples},
                  {"scarce_samples", mo.scarce_samples},
                  {"distill_len", mo.distill_len},
                  {"distill_steps", mo.distill_steps},
                  {"gen_count", mo.gen_count},
                  {"gen_length", mo.gen_length},
                  {"watermark", mo.wm.to_json()}};
    std::string hash = config_hash(semantic);
    std::vector<MotivationRow> rows = motivation_experiment(mc);
    std::vector<std::vector<std::string>> csv_rows;
    for (const MotivationRow& r : rows)
      csv_rows.push_back({r.approach, format_double(r.median_p),
                          format_double(r.domain_perplexity)});
    std::string csv_path = mo.out_dir + "/motivation.csv";
    save_csv(csv_path, hash, {"approach", "median_p", "domain_perplexity"},
             csv_rows);
    json manifest{{"config_hash", hash}, {"config", semantic}};
    write_json_file(mo.out_dir + "/manifest.json", manifest);
    std::cout << "experiment motivation -> " << csv_path << "\n";
    return 0;
  }

  if (report_cmd->parsed()) {
    json artifacts = json::array();
    std::string hash;
    for (const std::string& path : re.inputs) {
      std::string h;
      json entry{{"path", path}};
      if (path.size() > 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
        h = records_config_hash(path);
        entry["kind"] = "records";
        entry["records"] = load_records(path).size();
      } else if (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open file: " + path);
        json j;
        try {
          in >> j;
        } catch (const json::exception&) {
          throw ValidationError("malformed JSON: " + path);
        }
        h = j.value("config_hash", "");
        entry["kind"] = "summary";
        entry["content"] = j;
      } else {
        CsvFile f = load_csv(path);
        h = f.config_hash;
        entry["kind"] = "table";
        entry["header"] = f.header;
        entry["rows"] = f.rows;
      }
      if (h.empty())
        throw ValidationError("artifact carries no config hash: " + path);
      if (hash.empty()) hash = h;
      if (h != hash)
        throw ValidationError("config hash mismatch: " + path + " has " + h +
                              ", expected " + hash);
      artifacts.push_back(std::move(entry));
    }
    json out{{"config_hash", hash}, {"artifacts", artifacts}};
    if (re.out.empty())
      std::cout << out.dump(2) << "\n";
    else
      write_json_file(re.out, out);
    return 0;
  }

  return 0;
}

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const wapiti::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
