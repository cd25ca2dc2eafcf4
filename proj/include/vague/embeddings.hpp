#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vague/corpus.hpp"
#include "vague/rng.hpp"
#include "vague/tensor.hpp"

namespace vague::embeddings {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kEosId = 2;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kEosToken = "<eos>";

// Lowercased token inventory with <pad>, <unk>, <eos> reserved at ids 0..2.
// Remaining ids are ordered by corpus frequency (descending, ties broken
// lexicographically), so identical corpora give identical vocabularies.
class Vocabulary {
  public:
    static Vocabulary build(const std::vector<std::vector<std::string>>& sentences,
                            std::size_t max_size = 10000);
    // Rebuild from a serialized token list (checkpoint configs).
    static Vocabulary from_tokens(std::vector<std::string> id_to_token);

    std::size_t id(const std::string& token) const; // lowercases; <unk> fallback
    std::optional<std::size_t> find(const std::string& token) const;
    const std::string& token(std::size_t id) const;
    std::size_t size() const { return id_to_token_.size(); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    std::vector<std::size_t> encode(const std::vector<corpus::Token>& tokens) const;
    std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::size_t> token_to_id_;
};

struct EmbeddingMatrix {
    nn::Tensor matrix; // (vocab, dim)

    std::size_t dim() const { return matrix.cols(); }
    std::size_t vocab_size() const { return matrix.rows(); }
};

// Uniform init in ±0.5/dim, the usual word-vector starting point.
EmbeddingMatrix random_embeddings(std::size_t vocab_size, std::size_t dim, nn::Rng& rng);

double cosine(const EmbeddingMatrix& e, std::size_t a, std::size_t b);

struct SkipgramConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 3;
    double lr = 0.025;
    double heldout_fraction = 0.05;
    std::uint64_t seed = 1;
};

struct SkipgramResult {
    EmbeddingMatrix embeddings;
    // Held-out skip-gram loss before training and after each epoch
    // (epochs + 1 entries), with negatives fixed at the start so epochs are
    // comparable.
    std::vector<double> heldout_losses;
};

// Skip-gram with negative sampling; negatives drawn from the unigram^0.75
// distribution. Deterministic for a fixed config.
SkipgramResult train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                              const Vocabulary& vocab, const SkipgramConfig& cfg);

// Text format: "<count> <dim>" header, then one token and dim values per
// line. Values round-trip through 17 significant digits.
void save_embeddings(const std::string& path, const Vocabulary& vocab,
                     const EmbeddingMatrix& emb);

// Loads vectors for tokens present in the vocabulary; rows for vocabulary
// tokens missing from the file are drawn from rng; file-only tokens are
// ignored. The file's dimension wins.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                nn::Rng& rng);

// Vocabulary round-trip through model checkpoint configs.
nlohmann::json vocab_to_json(const Vocabulary& v);
Vocabulary vocab_from_json(const nlohmann::json& j);

} // namespace vague::embeddings
