#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vague/autodiff.hpp"
#include "vague/checkpoint.hpp"
#include "vague/corpus.hpp"
#include "vague/embeddings.hpp"
#include "vague/lstm.hpp"

namespace vague::word_tagger {

inline constexpr const char* kBilstmKind = "word-bilstm";
inline constexpr const char* kAgnosticKind = "word-agnostic";

// Unique lowercased tokens with a binary label: 1 when the token carries a
// vague label in any training sentence.
struct UniqueWordDataset {
    std::vector<std::pair<std::string, int>> entries;
    std::size_t positives = 0;
    std::size_t negatives = 0;

    double positive_ratio() const; // positives / negatives
};

UniqueWordDataset
build_unique_word_dataset(const std::vector<corpus::ConsolidatedSentence>& train);

struct TaggerConfig {
    std::size_t hidden = 512; // per direction
    double lr = 1e-3;
    std::size_t epochs = 10;
    std::size_t batch = 16;
    double pos_weight = 1.0;   // loss weight on vague tokens
    double val_fraction = 0.1; // held out for best-epoch selection
    std::uint64_t seed = 1;
};

// Context-aware tagger: embedding -> forward and backward LSTM -> per-token
// concatenated hidden states -> linear -> sigmoid.
struct BiLstmTagger {
    nn::Var embedding; // (V,d), fine-tuned with the rest
    nn::LstmCell fwd;
    nn::LstmCell bwd;
    nn::Var w_o; // (2H,), zero-init so an untrained model answers 0.5
    nn::Var b_o; // (1,)

    static BiLstmTagger init(const embeddings::EmbeddingMatrix& emb, std::size_t hidden,
                             nn::Rng& rng);

    nn::Var token_logits(const std::vector<std::size_t>& ids) const; // (T,)
    std::vector<std::pair<std::string, nn::Var>> named_params() const;
};

// Context-agnostic classifier: one linear layer over a word's embedding, so
// a token string gets the same probability in every sentence.
struct AgnosticClassifier {
    nn::Var embedding; // (V,d), fine-tuned with the rest
    nn::Var w;         // (d,), zero-init
    nn::Var b;         // (1,)

    static AgnosticClassifier init(const embeddings::EmbeddingMatrix& emb, nn::Rng& rng);

    nn::Var token_logits(const std::vector<std::size_t>& ids) const; // (T,)
    std::vector<std::pair<std::string, nn::Var>> named_params() const;
};

// Per-token binary cross-entropy with Adam; returns the checkpoint of the
// epoch with the best validation F1. The initial state is a candidate, so
// epochs = 0 returns the initialization. An empty validation split scores
// the training set instead.
Checkpoint train_bilstm_tagger(const std::vector<corpus::ConsolidatedSentence>& train,
                               const embeddings::Vocabulary& vocab,
                               const embeddings::EmbeddingMatrix& emb,
                               const TaggerConfig& cfg);

// Same loop over the unique-word dataset built from the sentences.
Checkpoint train_agnostic_classifier(const std::vector<corpus::ConsolidatedSentence>& train,
                                     const embeddings::Vocabulary& vocab,
                                     const embeddings::EmbeddingMatrix& emb,
                                     const TaggerConfig& cfg);

struct WordPrediction {
    std::vector<double> probs;
    std::vector<int> labels; // 1 iff prob >= threshold

    nlohmann::json to_json(const std::vector<std::string>& tokens) const;
};

// Dispatches on the checkpoint kind; rejects non-word-model checkpoints.
WordPrediction predict_word_labels(const Checkpoint& ckpt,
                                   const std::vector<std::string>& tokens,
                                   double threshold = 0.5);

} // namespace vague::word_tagger
