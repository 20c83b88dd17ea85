#include "wapiti/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wapiti/prng.hpp"

namespace wapiti {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ValidationError("learning_rate must be > 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

namespace {

void softmax_inplace(std::vector<double>& v) {
  double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : v) x /= s;
}

double row_log_prob(const Checkpoint& c, std::span<const TokenId> ctx,
                    TokenId next) {
  const double* r = c.row(context_row(ctx, c.vocab_size));
  double m = r[0];
  for (uint32_t j = 1; j < c.vocab_size; ++j) m = std::max(m, r[j]);
  double s = 0.0;
  for (uint32_t j = 0; j < c.vocab_size; ++j) s += std::exp(r[j] - m);
  return r[next] - m - std::log(s);
}

}  // namespace

std::vector<double> forward(const Checkpoint& c, std::span<const TokenId> ctx) {
  return forward_temp(c, ctx, 1.0);
}

std::vector<double> forward_temp(const Checkpoint& c,
                                 std::span<const TokenId> ctx,
                                 double temperature) {
  if (temperature <= 0.0) throw ValidationError("temperature must be > 0");
  if (ctx.size() != c.order)
    throw ValidationError("context length does not match model order");
  const double* r = c.row(context_row(ctx, c.vocab_size));
  std::vector<double> p(r, r + c.vocab_size);
  if (temperature != 1.0)
    for (double& x : p) x /= temperature;
  softmax_inplace(p);
  return p;
}

TokenId sample_from(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    if (u < acc) return static_cast<TokenId>(j);
  }
  return static_cast<TokenId>(probs.size() - 1);
}

GenerationRecord sample(const Checkpoint& c, const TokenSeq& prompt,
                        uint32_t length, double temperature, uint64_t seed) {
  if (length == 0) throw ValidationError("generation length must be >= 1");
  GenerationRecord rec;
  rec.prompt = prompt;
  rec.seed = seed;
  TokenSeq seq = prompt;
  seq.reserve(prompt.size() + length);
  for (uint32_t t = 0; t < length; ++t) {
    TokenSeq ctx = pad_context(seq, c.order);
    std::vector<double> p = forward_temp(c, ctx, temperature);
    seq.push_back(sample_from(p, uniform_at(seed, t)));
  }
  rec.completion.assign(seq.begin() + static_cast<ptrdiff_t>(prompt.size()),
                        seq.end());
  return rec;
}

Checkpoint train(const Checkpoint& init, const Corpus& corpus,
                 const TrainConfig& cfg) {
  return train_skip_prefix(init, corpus, 0, cfg);
}

Checkpoint train_skip_prefix(const Checkpoint& init, const Corpus& corpus,
                             uint32_t prefix_len, const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  Checkpoint out = init;
  if (cfg.steps == 0) return out;
  if (corpus.empty()) throw ValidationError("training corpus is empty");

  // Flat index of every trainable (sequence, position) pair for uniform draws.
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (uint32_t s = 0; s < corpus.size(); ++s)
    for (uint32_t t = prefix_len; t < corpus[s].size(); ++t)
      pairs.emplace_back(s, t);
  if (pairs.empty()) throw ValidationError("training corpus has no tokens");

  const uint32_t v = out.vocab_size;
  std::vector<double> grad(v);
  for (uint64_t step = 0; step < cfg.steps; ++step) {
    uint64_t step_seed = derive_seed(cfg.seed, step);
    // Mean gradient over the batch, grouped by row so repeated rows in a
    // batch see one combined update.
    std::vector<std::pair<size_t, std::vector<double>>> row_grads;
    for (uint32_t b = 0; b < cfg.batch_size; ++b) {
      double u = uniform_at(step_seed, b);
      auto pick = static_cast<size_t>(u * static_cast<double>(pairs.size()));
      if (pick >= pairs.size()) pick = pairs.size() - 1;
      auto [si, ti] = pairs[pick];
      const TokenSeq& seq = corpus[si];
      TokenSeq ctx = pad_context(std::span<const TokenId>(seq.data(), ti), out.order);
      size_t ri = context_row(ctx, v);
      const double* r = out.row(ri);
      grad.assign(r, r + v);
      softmax_inplace(grad);
      TokenId next = seq[ti];
      if (next >= v) throw ValidationError("corpus token id out of range");
      grad[next] -= 1.0;
      auto it = std::find_if(row_grads.begin(), row_grads.end(),
                             [&](const auto& g) { return g.first == ri; });
      if (it == row_grads.end()) {
        row_grads.emplace_back(ri, grad);
      } else {
        for (uint32_t j = 0; j < v; ++j) it->second[j] += grad[j];
      }
    }
    double scale = cfg.learning_rate / static_cast<double>(cfg.batch_size);
    for (auto& [ri, g] : row_grads) {
      double* r = out.row(ri);
      for (uint32_t j = 0; j < v; ++j) r[j] -= scale * g[j];
    }
  }
  for (double x : out.logits)
    if (!std::isfinite(x)) throw std::runtime_error("training diverged: non-finite logits");
  return out;
}

double cross_entropy(const Checkpoint& c, const Corpus& corpus) {
  if (corpus.empty()) throw ValidationError("corpus is empty");
  double nll = 0.0;
  size_t n = 0;
  for (const TokenSeq& seq : corpus) {
    for (size_t t = 0; t < seq.size(); ++t) {
      TokenSeq ctx = pad_context(std::span<const TokenId>(seq.data(), t), c.order);
      if (seq[t] >= c.vocab_size) throw ValidationError("corpus token id out of range");
      nll -= row_log_prob(c, ctx, seq[t]);
      ++n;
    }
  }
  if (n == 0) throw ValidationError("corpus has no tokens");
  return nll / static_cast<double>(n);
}

double perplexity(const Checkpoint& c, const Corpus& corpus) {
  return std::exp(cross_entropy(c, corpus));
}

Checkpoint synth_source(uint32_t vocab_size, uint32_t order, uint64_t seed,
                        double spread) {
  Checkpoint c = make_checkpoint(vocab_size, order);
  size_t rows = c.rows();
  for (size_t r = 0; r < rows; ++r) {
    uint64_t rs = derive_seed(seed, r);
    double* row = c.row(r);
    for (uint32_t j = 0; j < vocab_size; ++j)
      row[j] = (2.0 * uniform_at(rs, j) - 1.0) * spread;
  }
  c.metadata["model_id"] = "source-" + std::to_string(seed);
  return c;
}

Corpus synth_corpus(const Checkpoint& source, uint32_t n_seqs,
                    uint32_t seq_len, uint64_t seed) {
  if (n_seqs == 0 || seq_len == 0)
    throw ValidationError("synth_corpus needs n_seqs >= 1 and seq_len >= 1");
  Corpus out;
  out.reserve(n_seqs);
  for (uint32_t i = 0; i < n_seqs; ++i)
    out.push_back(
        sample(source, {}, seq_len, 1.0, derive_seed(seed, i)).completion);
  return out;
}

Corpus load_corpus(const std::string& path, uint32_t vocab_size) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path);
  Corpus out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TokenSeq seq;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t pos = 0;
      unsigned long id = 0;
      try {
        id = std::stoul(cell, &pos);
      } catch (const std::exception&) {
        throw ValidationError("corpus line is not comma-separated token ids: " + path);
      }
      if (pos != cell.size())
        throw ValidationError("corpus line is not comma-separated token ids: " + path);
      if (id >= vocab_size)
        throw ValidationError("corpus token id out of range in " + path);
      seq.push_back(static_cast<TokenId>(id));
    }
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  if (out.empty()) throw ValidationError("corpus file is empty: " + path);
  return out;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write corpus file: " + path);
  for (const TokenSeq& seq : corpus) {
    for (size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ',';
      out << seq[i];
    }
    out << '\n';
  }
}

}  // namespace wapiti
