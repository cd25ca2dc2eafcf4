#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vague/corpus.hpp"

namespace vague::harness {

// Recipe for a synthetic annotated corpus whose ground truth is known by
// construction: each sentence's class is determined by how many tokens from a
// planted lexicon it contains, and simulated annotators reproduce that truth
// up to a configurable disagreement rate.
struct SyntheticCorpusSpec {
    std::size_t n_sentences = 200;
    std::size_t n_fillers = 30; // filler vocabulary w0..w{n-1}
    std::vector<std::string> lexicon = {"may",        "some", "certain",   "might",
                                        "most",       "generally", "reasonable",
                                        "appropriate"};
    // Planted-token count range [lo, hi] per class; ranges must be disjoint.
    std::array<std::pair<std::size_t, std::size_t>, corpus::kNumClasses> counts = {
        {{0, 0}, {1, 1}, {2, 2}, {3, 3}}};
    std::array<double, corpus::kNumClasses> class_weights = {0.25, 0.25, 0.25, 0.25};
    std::size_t min_len = 6; // token count range; min_len must fit the largest count
    std::size_t max_len = 10;
    std::size_t annotators = 5;
    // Per annotator: a planted token is missed with this probability and a
    // filler token is spuriously selected with a quarter of it; one annotator
    // always keeps the planted sentence score so the class stays recoverable.
    double disagreement = 0.0;
    std::uint64_t seed = 1;
};

struct SyntheticCorpus {
    std::vector<corpus::AnnotatedSentence> annotated;
    // Planted truth, not the consolidation output: word_labels mark planted
    // lexicon positions, mean_score is the noise-free class score (class + 1).
    std::vector<corpus::ConsolidatedSentence> gold;
};

// Deterministic for a fixed spec, down to JSONL bytes. With disagreement 0,
// consolidating `annotated` reproduces `gold` exactly. UsageError on invalid
// specs (empty lexicon, overlapping count ranges, counts that cannot fit).
SyntheticCorpus make_synthetic(const SyntheticCorpusSpec& spec);

// Template-expanded policy-style sentences for language-model training:
// subject + modal verb + object + optional tail, lowercased tokens.
std::vector<std::vector<std::string>> make_raw_sentences(std::size_t n, std::uint64_t seed);

struct ReproduceReport {
    std::string target;
    nlohmann::json measured;
    nlohmann::json expected;
    double tolerance = 0.0;
    bool pass = false;

    nlohmann::json to_json() const;
};

// Named desk-scale experiments with self-checking expectations; UsageError on
// unknown names. See reproduce_targets() for the list.
ReproduceReport reproduce(const std::string& target);

const std::vector<std::string>& reproduce_targets();

} // namespace vague::harness
