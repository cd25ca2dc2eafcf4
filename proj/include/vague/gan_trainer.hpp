#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vague/corpus.hpp"
#include "vague/discriminator.hpp"
#include "vague/embeddings.hpp"
#include "vague/generator.hpp"

namespace vague::gan {

inline constexpr const char* kFullMode = "full";
inline constexpr const char* kVaguenessOnlyMode = "vagueness-only";

struct GanConfig {
    std::string mode = kFullMode; // "full" or "vagueness-only"
    std::size_t d_steps = 1;      // discriminator updates per round
    std::size_t g_steps = 1;      // generator updates per round
    std::size_t batch = 16;       // real sentences per round; fakes match the count
    double d_lr = 1e-3;
    double g_lr = 1e-3;
    double tau = 0.5; // sampling temperature for generated sentences
    std::size_t epochs = 10;
    double val_fraction = 0.1;
    std::size_t patience = 5; // epochs without improvement before stopping
    std::uint64_t seed = 1;
};

struct StepLoss {
    std::size_t step = 0; // global update index, strictly increasing
    std::string phase;    // "discriminator", "generator", or "classifier"
    double class_loss = 0.0;
    double source_loss = 0.0; // 0 when the source term is dropped
};

struct TrainLog {
    std::vector<StepLoss> steps;
    std::vector<double> val_f; // weighted F per epoch; entry 0 = initialization
    std::size_t best_epoch = 0;
    double best_val_f = 0.0;
    bool stopped_early = false;

    std::string to_csv() const; // step,phase,class_loss,source_loss
    nlohmann::json to_json() const;
};

struct GanResult {
    Checkpoint discriminator; // snapshot of the best validation weighted-F epoch
    Checkpoint generator;     // final generator with the class bias attached
    TrainLog log;
};

// Alternating adversarial training. Per round of one real batch: d_steps
// discriminator updates, each on that batch plus an equal number of freshly
// sampled sentences (classes drawn uniformly) whose soft distributions are
// detached; then g_steps generator updates on fresh samples with the
// discriminator's parameters frozen. Vagueness-only mode drops the source
// term on both sides, so the source head never trains. The discriminator
// checkpoint is the best validation weighted-F epoch (initialization
// included); training stops once `patience` epochs pass without improvement.
// gen, bias, and disc are trained in place and end at the final epoch.
GanResult train_acgan(generator::LmGenerator& gen, generator::VaguenessBias& bias,
                      discriminator::Discriminator& disc,
                      const std::vector<corpus::ConsolidatedSentence>& data,
                      const embeddings::Vocabulary& vocab, const GanConfig& cfg);

struct BaselineResult {
    Checkpoint checkpoint;
    TrainLog log;
};

// Plain supervised 4-way cross-entropy training of a discriminator body's
// class head on real sentences only (no adversary, no source term). Uses
// d_lr and the same split/selection/early-stopping rules as train_acgan.
BaselineResult train_baseline(discriminator::Discriminator& disc,
                              const std::vector<corpus::ConsolidatedSentence>& data,
                              const embeddings::Vocabulary& vocab, const GanConfig& cfg);

// Modal training class; ties resolve to the lower class. DataError when empty.
corpus::VaguenessClass majority_class(const std::vector<corpus::VaguenessClass>& classes);

} // namespace vague::gan
