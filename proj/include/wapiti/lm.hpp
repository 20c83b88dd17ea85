#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wapiti/core.hpp"

namespace wapiti {

struct TrainConfig {
  uint64_t steps = 0;
  uint32_t batch_size = 32;
  double learning_rate = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

using Corpus = std::vector<TokenSeq>;

// Next-token distribution for a context of exactly `order` tokens
// (left-pad with pad_context first). Softmax of the context's logit row.
std::vector<double> forward(const Checkpoint& c, std::span<const TokenId> ctx);

// Same, with logits divided by the temperature first.
std::vector<double> forward_temp(const Checkpoint& c,
                                 std::span<const TokenId> ctx,
                                 double temperature);

// Inverse-CDF draw from a probability vector given u in (0,1).
TokenId sample_from(std::span<const double> probs, double u);

// Autoregressive temperature sampling; the completion has exactly `length`
// tokens and is a pure function of (checkpoint, prompt, seed).
GenerationRecord sample(const Checkpoint& c, const TokenSeq& prompt,
                        uint32_t length, double temperature, uint64_t seed);

// SGD on token-level cross-entropy over (context, next-token) pairs drawn
// uniformly from the corpus; gradient per pair is softmax(row) - onehot.
// Returns a new checkpoint; the input is untouched.
Checkpoint train(const Checkpoint& init, const Corpus& corpus,
                 const TrainConfig& cfg);

// Same SGD, but the first `prefix_len` positions of each sequence supply
// context only and are never loss targets.
Checkpoint train_skip_prefix(const Checkpoint& init, const Corpus& corpus,
                             uint32_t prefix_len, const TrainConfig& cfg);

// exp(mean negative log-likelihood) over all corpus tokens, BOS-padded
// contexts, natural log.
double perplexity(const Checkpoint& c, const Corpus& corpus);

// Mean token-level cross-entropy of the corpus under the model.
double cross_entropy(const Checkpoint& c, const Corpus& corpus);

// A fixed random ground-truth Markov source: logit rows drawn uniformly
// from [-spread, spread] as a pure function of the seed.
Checkpoint synth_source(uint32_t vocab_size, uint32_t order, uint64_t seed,
                        double spread = 3.0);

// n_seqs sequences of seq_len tokens sampled from the source.
Corpus synth_corpus(const Checkpoint& source, uint32_t n_seqs,
                    uint32_t seq_len, uint64_t seed);

// Corpus file IO: one sequence per line, comma-separated token ids.
Corpus load_corpus(const std::string& path, uint32_t vocab_size);
void save_corpus(const std::string& path, const Corpus& corpus);

}  // namespace wapiti
