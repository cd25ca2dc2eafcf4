#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vague/autodiff.hpp"
#include "vague/checkpoint.hpp"
#include "vague/corpus.hpp"
#include "vague/embeddings.hpp"
#include "vague/lstm.hpp"

namespace vague::generator {

inline constexpr const char* kGeneratorKind = "generator";

struct GeneratorConfig {
    std::size_t hidden = 512;
    std::size_t max_len = 50;
    double lr = 1e-3;
    std::size_t epochs = 5;
    std::size_t batch = 16;
    double val_fraction = 0.05; // held out for the perplexity trajectory
    std::uint64_t seed = 1;
};

// LSTM language model: previous-token embedding -> LSTM -> hidden state ->
// linear projection to vocabulary logits. The projection starts at zero, so
// an untrained model is exactly uniform over the vocabulary.
struct LmGenerator {
    nn::Var embedding; // (V,d)
    nn::LstmCell cell;
    nn::Var w;   // (V,H)
    nn::Var b;   // (V,)
    nn::Var bos; // (d,) learned first-step input
    std::size_t max_len = 50;

    static LmGenerator init(const embeddings::EmbeddingMatrix& emb, std::size_t hidden,
                            std::size_t max_len, nn::Rng& rng);

    nn::Var step_logits(const nn::LstmCell::State& state) const; // (V,)

    // Teacher-forced mean next-token cross-entropy over [ids..., <eos>].
    nn::Var lm_loss(const std::vector<std::size_t>& ids) const;

    std::vector<std::pair<std::string, nn::Var>> named_params() const;
};

// exp of mean per-token cross-entropy over the whole set (token-weighted)
double perplexity(const LmGenerator& gen, const std::vector<std::vector<std::size_t>>& ids);

// Trainable per-token vagueness bias: sampling logits become a + z + lambda*v
// where lambda depends on the requested class.
struct VaguenessBias {
    nn::Var v; // (V,)
    std::map<corpus::VaguenessClass, double> lambda_by_class;

    // v starts at 1 on lexicon tokens and 0 elsewhere; lambda defaults to
    // {clear: -1, somewhat-clear: 0, vague: 1, extremely-vague: 2}.
    static VaguenessBias init(const embeddings::Vocabulary& vocab,
                              const corpus::CueLexicon& lexicon);
    // all-zero v (unconditional sampling)
    static VaguenessBias zeros(std::size_t vocab_size);

    double lambda(corpus::VaguenessClass c) const; // UsageError when unmapped
};

struct StepResult {
    nn::Var soft;          // tempered softmax over the vocabulary, graph-connected
    std::size_t hard = 0;  // argmax of the same noisy scores
    nn::LstmCell::State state;
};

// One sampling step: scores = logits + gumbel + lambda*v; the hard token is
// their argmax and the soft distribution their tempered softmax, sharing the
// same noise. Pass forced_z to replace the Gumbel draw (tests).
StepResult conditional_step(const LmGenerator& gen, const VaguenessBias& bias,
                            corpus::VaguenessClass c, const nn::LstmCell::State& prev,
                            const nn::Var& x_prev, double tau, nn::Rng& rng,
                            const nn::Tensor* forced_z = nullptr);

struct GeneratedSentence {
    std::vector<std::size_t> hard_tokens; // ends at <eos> or max_len
    std::vector<nn::Var> soft_dists;      // one per step, graph-connected
    corpus::VaguenessClass cls = corpus::VaguenessClass::Clear;
};

// Unrolls conditional_step from the start state until <eos> or max_len. The
// recurrence consumes the hard token's embedding detached from the graph, so
// generator gradients flow only through the soft distributions.
std::vector<GeneratedSentence> generate_batch(const LmGenerator& gen,
                                              const VaguenessBias& bias,
                                              const std::vector<corpus::VaguenessClass>& classes,
                                              double tau, nn::Rng& rng);

struct PretrainResult {
    Checkpoint checkpoint;              // best held-out perplexity epoch
    std::vector<double> heldout_perplexities; // epochs + 1 entries
};

// Teacher-forced cross-entropy pretraining with Adam; the initial state is a
// checkpoint candidate, so epochs = 0 returns the initialization.
PretrainResult pretrain_lm(const std::vector<std::vector<std::string>>& sentences,
                           const embeddings::Vocabulary& vocab,
                           const embeddings::EmbeddingMatrix& emb,
                           const GeneratorConfig& cfg);

Checkpoint generator_checkpoint(const LmGenerator& gen, const embeddings::Vocabulary& vocab);
LmGenerator generator_from_checkpoint(const Checkpoint& ckpt);

// The GAN trainer stores the bias alongside the generator parameters.
void add_bias_to_checkpoint(Checkpoint& ckpt, const VaguenessBias& bias);
bool checkpoint_has_bias(const Checkpoint& ckpt);
VaguenessBias bias_from_checkpoint(const Checkpoint& ckpt);

} // namespace vague::generator
