#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vague/autodiff.hpp"
#include "vague/checkpoint.hpp"
#include "vague/corpus.hpp"
#include "vague/embeddings.hpp"
#include "vague/generator.hpp"
#include "vague/lstm.hpp"

namespace vague::discriminator {

inline constexpr const char* kCnnVariant = "cnn";
inline constexpr const char* kLstmVariant = "lstm";
inline constexpr const char* kDiscriminatorKind = "sentence-classifier";

struct DiscriminatorConfig {
    std::string variant = kCnnVariant; // "cnn" or "lstm"
    std::size_t filters = 128;         // per width, CNN
    std::size_t hidden = 512;          // LSTM
    std::uint64_t seed = 1;
};

// A sequence of embedded token vectors: exact embedding rows for real
// sentences, expected embeddings (soft distribution times the embedding
// matrix) for generated ones.
struct DiscriminatorInput {
    std::vector<nn::Var> embedded; // each (d,)
};

// Dual-head sentence model. The CNN body runs width {3,4,5} filters with
// ReLU and max-over-time pooling restricted to windows that contain at
// least one real token (short sentences are padded with zero vectors to the
// largest width); the LSTM body uses the final hidden state. Both heads are
// zero-initialized, so an untrained model is uniform.
struct Discriminator {
    std::string variant;
    nn::Var embedding; // (V,d), the discriminator's own copy
    // CNN body
    nn::Var conv3, conv4, conv5; // (F, w*d)
    nn::Var cb3, cb4, cb5;       // (F,)
    // LSTM body
    nn::LstmCell cell;
    // heads over the shared representation
    nn::Var w_class, b_class;   // (4, R), (4,)
    nn::Var w_source, b_source; // (2, R), (2,)

    static Discriminator init(const std::string& variant,
                              const embeddings::EmbeddingMatrix& emb,
                              const DiscriminatorConfig& cfg, nn::Rng& rng);

    std::size_t repr_size() const;

    // real sentence -> exact rows, with <eos> appended (generated sentences
    // end in <eos>, so both sources share the convention)
    DiscriminatorInput embed_real(const std::vector<std::size_t>& ids) const;
    // generated sentence -> expected embeddings from the soft distributions
    DiscriminatorInput embed_fake(const generator::GeneratedSentence& sent) const;

    nn::Var representation(const DiscriminatorInput& input) const; // (R,)
    struct Heads {
        nn::Var class_logits;  // (4,)
        nn::Var source_logits; // (2,)
    };
    Heads forward(const DiscriminatorInput& input) const;

    std::vector<std::pair<std::string, nn::Var>> named_params() const;
};

inline constexpr std::size_t kSourceReal = 0;
inline constexpr std::size_t kSourceFake = 1;

struct LabeledInput {
    DiscriminatorInput input;
    corpus::VaguenessClass cls;
    std::size_t source = kSourceReal;
};

// A loss with its two components kept separate for logging. total is
// class_term plus source_term when the latter is present.
struct LossParts {
    nn::Var class_term;
    nn::Var source_term; // undefined when dropped (vagueness-only mode)
    nn::Var total;
};

// -(L_C + L_S): L_C is the mean class cross-entropy over the whole batch;
// L_S sums one mean per source (real items scored as real plus fake items
// scored as fake), so each side counts fully whatever the mix. Sides with
// no items are skipped. vagueness_only drops the source term.
LossParts discriminator_loss_parts(const Discriminator& disc,
                                   const std::vector<LabeledInput>& batch,
                                   bool vagueness_only = false);
nn::Var loss_discriminator(const Discriminator& disc, const std::vector<LabeledInput>& batch,
                           bool vagueness_only = false);

// -(L_C' + L_S'): over fakes only — mean class cross-entropy plus the
// non-saturating source term rewarding P(real|fake). vagueness_only drops
// the source term.
LossParts generator_loss_parts(const Discriminator& disc, const std::vector<LabeledInput>& fakes,
                               bool vagueness_only = false);
nn::Var loss_generator(const Discriminator& disc, const std::vector<LabeledInput>& fakes,
                       bool vagueness_only = false);

// class-head probabilities for one sentence (tokens, <eos> appended)
std::vector<double> predict_class_probs(const Discriminator& disc,
                                        const std::vector<std::size_t>& ids);

Checkpoint discriminator_checkpoint(const Discriminator& disc,
                                    const embeddings::Vocabulary& vocab);
Discriminator discriminator_from_checkpoint(const Checkpoint& ckpt);

} // namespace vague::discriminator
