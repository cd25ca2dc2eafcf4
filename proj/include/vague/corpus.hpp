#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vague/errors.hpp"

namespace vague::corpus {

struct Token {
    std::string text; // non-empty, no internal whitespace
    std::size_t index;
};

// One annotator's marking of a span of consecutive tokens as vague.
// start inclusive, end exclusive; spans cover one to five tokens.
struct WordSelection {
    std::string annotator;
    std::size_t start;
    std::size_t end;
};

// One annotator's sentence-level clarity score on the 1..5 scale
// (1 = completely clear, 5 = extremely vague).
struct SentenceScore {
    std::string annotator;
    double score;
};

struct AnnotatedSentence {
    std::string id;
    std::vector<Token> tokens;
    std::vector<WordSelection> word_selections;
    std::vector<SentenceScore> scores;
};

enum class VaguenessClass { Clear = 0, SomewhatClear = 1, Vague = 2, ExtremelyVague = 3 };

constexpr std::size_t kNumClasses = 4;

// Canonical kebab-case names used in JSON output and CLI flags.
const char* class_name(VaguenessClass c);
VaguenessClass class_from_name(const std::string& name); // DataError on unknown

// Mean-score buckets [1,2) [2,3) [3,4) [4,5]; boundary scores go to the
// higher bucket. Scores outside [1,5] are rejected.
VaguenessClass class_of_score(double mean_score);

struct ConsolidatedSentence {
    std::string id;
    std::vector<Token> tokens;
    std::vector<int> word_labels; // 1 = vague, one per token
    double mean_score = 0.0;
    VaguenessClass cls = VaguenessClass::Clear;
};

// Lowercased cue terms; '#' starts a comment line in the file format.
struct CueLexicon {
    std::set<std::string> terms;

    bool contains(const std::string& lowercased_token) const {
        return terms.count(lowercased_token) > 0;
    }
    static CueLexicon load(const std::string& path);
};

std::string lowercase(std::string s);

// Whitespace tokenization with leading/trailing ASCII punctuation split off
// as standalone tokens ("confidential." -> "confidential", ".").
std::vector<Token> tokenize(const std::string& text);

// JSONL with fields {id, tokens, word_selections, scores}; the two
// annotation fields may be absent or empty (raw corpora).
std::vector<AnnotatedSentence> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<AnnotatedSentence>& sentences);

// JSONL with fields {id, tokens, word_labels, mean_score, class}.
std::vector<ConsolidatedSentence> load_consolidated(const std::string& path);
void save_consolidated(const std::string& path,
                       const std::vector<ConsolidatedSentence>& sentences);

// Keeps sentences containing at least one token from the lexicon.
std::vector<AnnotatedSentence> filter_by_cues(const std::vector<AnnotatedSentence>& sentences,
                                              const CueLexicon& lexicon);

// A token is vague when spans from at least `threshold` distinct annotators
// cover it.
std::vector<int> consolidate_word_labels(const AnnotatedSentence& s, std::size_t threshold = 2);

ConsolidatedSentence consolidate(const AnnotatedSentence& s, std::size_t threshold = 2);
std::vector<ConsolidatedSentence> consolidate_corpus(const std::vector<AnnotatedSentence>& corpus,
                                                     std::size_t threshold = 2);

struct StatsReport {
    std::size_t n_sentences = 0;
    // % of scored sentences where some score bucket got >= 3 (>= 4) votes.
    double sentence_agreement_ge3 = 0.0;
    double sentence_agreement_ge4 = 0.0;
    // % of consolidated vague tokens (>= 2 annotators) also covered by >= 3 (>= 4).
    double word_agreement_ge3 = 0.0;
    double word_agreement_ge4 = 0.0;
    // Exact spans selected by >= 2 distinct annotators, lowercased and joined
    // with spaces; counted once per sentence. Ordered by count desc, term asc.
    std::vector<std::pair<std::string, std::size_t>> term_frequencies;
    std::map<std::string, double> class_distribution; // class name -> fraction
    // [vague word count, number of sentences], ascending by count.
    std::vector<std::pair<std::size_t, std::size_t>> vague_word_count_histogram;

    nlohmann::json to_json() const;
};

StatsReport corpus_stats(const std::vector<AnnotatedSentence>& corpus);

struct FoldSplit {
    std::vector<std::size_t> train, val, test;
};

// Shuffled k-fold split: test chunks partition [0, n); within each fold,
// floor(val_fraction * rest) items become validation. Identical seeds give
// identical splits.
std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t k, double val_fraction,
                                   std::uint64_t seed);

} // namespace vague::corpus
