#include "vague/gan_trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <utility>

#include "vague/metrics.hpp"
#include "vague/optim.hpp"

namespace vague::gan {

namespace {

struct Example {
    std::vector<std::size_t> ids;
    corpus::VaguenessClass cls;
};

void validate(const GanConfig& cfg, bool adversarial) {
    if (cfg.mode != kFullMode && cfg.mode != kVaguenessOnlyMode)
        throw UsageError("gan: mode must be 'full' or 'vagueness-only'");
    if (cfg.batch == 0) throw UsageError("gan: batch must be positive");
    if (cfg.d_lr <= 0) throw UsageError("gan: learning rates must be positive");
    if (cfg.val_fraction < 0 || cfg.val_fraction >= 1)
        throw UsageError("gan: val_fraction must be in [0,1)");
    if (cfg.patience == 0) throw UsageError("gan: patience must be positive");
    if (!adversarial) return;
    if (cfg.d_steps == 0 || cfg.g_steps == 0)
        throw UsageError("gan: update ratio entries must be positive");
    if (cfg.g_lr <= 0) throw UsageError("gan: learning rates must be positive");
    if (cfg.tau <= 0) throw UsageError("gan: tau must be positive");
}

std::vector<Example> encode_all(const std::vector<corpus::ConsolidatedSentence>& data,
                                const embeddings::Vocabulary& vocab) {
    if (data.empty()) throw DataError("gan: no training sentences");
    std::vector<Example> out;
    out.reserve(data.size());
    for (const corpus::ConsolidatedSentence& s : data) out.push_back({vocab.encode(s.tokens), s.cls});
    return out;
}

struct Splits {
    std::vector<Example> train, val;
};

Splits split_data(std::vector<Example> all, double val_fraction, nn::Rng& master) {
    nn::Rng split_rng = master.split(0);
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(val_fraction * all.size());
    if (n_val == all.size()) n_val = 0;
    Splits splits;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? splits.val : splits.train).push_back(std::move(all[order[i]]));
    return splits;
}

double eval_weighted_f(const discriminator::Discriminator& disc,
                       const std::vector<Example>& set) {
    std::vector<int> truth, pred;
    truth.reserve(set.size());
    pred.reserve(set.size());
    for (const Example& e : set) {
        std::vector<double> probs = discriminator::predict_class_probs(disc, e.ids);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[arg]) arg = i;
        truth.push_back(static_cast<int>(e.cls));
        pred.push_back(static_cast<int>(arg));
    }
    return metrics::weighted_prf(truth, pred).weighted_f1;
}

double finite_or_throw(const nn::Var& v, const char* what) {
    double x = v.value()[0];
    if (!std::isfinite(x))
        throw DivergenceError(std::string(what) + " loss is not finite");
    return x;
}

std::vector<generator::GeneratedSentence> sample_fakes(const generator::LmGenerator& gen,
                                                       const generator::VaguenessBias& bias,
                                                       std::size_t count, double tau,
                                                       nn::Rng& rng, bool cut_graph) {
    std::vector<corpus::VaguenessClass> classes(count);
    for (corpus::VaguenessClass& c : classes) // 2^64 is a multiple of 4, so this is exact
        c = static_cast<corpus::VaguenessClass>(rng.next_u64() % corpus::kNumClasses);
    std::vector<generator::GeneratedSentence> fakes =
        generator::generate_batch(gen, bias, classes, tau, rng);
    if (cut_graph)
        for (generator::GeneratedSentence& f : fakes)
            for (nn::Var& soft : f.soft_dists) soft = nn::detach(soft);
    return fakes;
}

// Shared epoch loop: evaluates, snapshots the best epoch (initialization
// included), and stops after `patience` epochs without improvement.
template <typename RunEpoch>
TrainLog run_training(const discriminator::Discriminator& disc,
                      const embeddings::Vocabulary& vocab, const GanConfig& cfg,
                      const std::vector<Example>& score_set, Checkpoint& best,
                      RunEpoch&& run_epoch) {
    TrainLog log;
    log.best_val_f = eval_weighted_f(disc, score_set);
    log.val_f.push_back(log.best_val_f);
    best = discriminator::discriminator_checkpoint(disc, vocab);

    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        run_epoch(epoch, log);
        double f = eval_weighted_f(disc, score_set);
        log.val_f.push_back(f);
        if (f > log.best_val_f) {
            log.best_val_f = f;
            log.best_epoch = epoch;
            best = discriminator::discriminator_checkpoint(disc, vocab);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            log.stopped_early = true;
            break;
        }
    }
    return log;
}

} // namespace

std::string TrainLog::to_csv() const {
    std::ostringstream out;
    out << "step,phase,class_loss,source_loss\n" << std::setprecision(17);
    for (const StepLoss& s : steps)
        out << s.step << ',' << s.phase << ',' << s.class_loss << ',' << s.source_loss << '\n';
    return out.str();
}

nlohmann::json TrainLog::to_json() const {
    nlohmann::json steps_json = nlohmann::json::array();
    for (const StepLoss& s : steps)
        steps_json.push_back({{"step", s.step},
                              {"phase", s.phase},
                              {"class_loss", s.class_loss},
                              {"source_loss", s.source_loss}});
    return {{"steps", std::move(steps_json)},
            {"val_weighted_f", val_f},
            {"best_epoch", best_epoch},
            {"best_val_f", best_val_f},
            {"stopped_early", stopped_early}};
}

GanResult train_acgan(generator::LmGenerator& gen, generator::VaguenessBias& bias,
                      discriminator::Discriminator& disc,
                      const std::vector<corpus::ConsolidatedSentence>& data,
                      const embeddings::Vocabulary& vocab, const GanConfig& cfg) {
    validate(cfg, true);
    if (bias.v.size() != vocab.size())
        throw UsageError("gan: bias size does not match the vocabulary");
    const bool vagueness_only = cfg.mode == kVaguenessOnlyMode;

    nn::Rng master(cfg.seed);
    Splits splits = split_data(encode_all(data, vocab), cfg.val_fraction, master);
    const std::vector<Example>& score_set = splits.val.empty() ? splits.train : splits.val;

    std::vector<nn::Var> d_params;
    for (auto& [name, v] : disc.named_params()) d_params.push_back(v);
    nn::Adam opt_d(d_params, cfg.d_lr);
    // the generator's embedding only feeds the detached recurrence during
    // sampling, so it is not an adversarially trained parameter
    std::vector<nn::Var> g_params = {gen.w,        gen.b,        gen.bos, gen.cell.w_x,
                                     gen.cell.w_h, gen.cell.b,   bias.v};
    nn::Adam opt_g(g_params, cfg.g_lr);

    std::size_t step = 0;
    auto run_epoch = [&](std::size_t epoch, TrainLog& log) {
        nn::Rng epoch_rng = master.split(100 + epoch);
        nn::Rng sample_rng = master.split(200 + epoch);
        std::vector<std::size_t> perm(splits.train.size());
        std::iota(perm.begin(), perm.end(), 0);
        epoch_rng.shuffle(perm);
        for (std::size_t start = 0; start < perm.size(); start += cfg.batch) {
            std::size_t count = std::min(cfg.batch, perm.size() - start);
            for (std::size_t d = 0; d < cfg.d_steps; ++d) {
                std::vector<discriminator::LabeledInput> batch;
                batch.reserve(2 * count);
                for (std::size_t i = 0; i < count; ++i) {
                    const Example& e = splits.train[perm[start + i]];
                    batch.push_back(
                        {disc.embed_real(e.ids), e.cls, discriminator::kSourceReal});
                }
                for (generator::GeneratedSentence& fake :
                     sample_fakes(gen, bias, count, cfg.tau, sample_rng, true))
                    batch.push_back({disc.embed_fake(fake), fake.cls,
                                     discriminator::kSourceFake});
                discriminator::LossParts parts =
                    discriminator::discriminator_loss_parts(disc, batch, vagueness_only);
                log.steps.push_back(
                    {step++, "discriminator",
                     finite_or_throw(parts.class_term, "discriminator class"),
                     parts.source_term.defined()
                         ? finite_or_throw(parts.source_term, "discriminator source")
                         : 0.0});
                opt_d.zero_grad();
                nn::backward(parts.total);
                opt_d.step();
            }
            for (std::size_t g = 0; g < cfg.g_steps; ++g) {
                // the discriminator is a fixed judge during generator updates
                for (nn::Var& p : d_params) p.set_requires_grad(false);
                std::vector<discriminator::LabeledInput> fakes;
                fakes.reserve(count);
                for (generator::GeneratedSentence& fake :
                     sample_fakes(gen, bias, count, cfg.tau, sample_rng, false))
                    fakes.push_back({disc.embed_fake(fake), fake.cls,
                                     discriminator::kSourceFake});
                discriminator::LossParts parts =
                    discriminator::generator_loss_parts(disc, fakes, vagueness_only);
                log.steps.push_back(
                    {step++, "generator", finite_or_throw(parts.class_term, "generator class"),
                     parts.source_term.defined()
                         ? finite_or_throw(parts.source_term, "generator source")
                         : 0.0});
                opt_g.zero_grad();
                nn::backward(parts.total);
                opt_g.step();
                for (nn::Var& p : d_params) p.set_requires_grad(true);
            }
        }
    };

    GanResult result;
    result.log = run_training(disc, vocab, cfg, score_set, result.discriminator, run_epoch);
    result.generator = generator::generator_checkpoint(gen, vocab);
    generator::add_bias_to_checkpoint(result.generator, bias);
    return result;
}

BaselineResult train_baseline(discriminator::Discriminator& disc,
                              const std::vector<corpus::ConsolidatedSentence>& data,
                              const embeddings::Vocabulary& vocab, const GanConfig& cfg) {
    validate(cfg, false);
    nn::Rng master(cfg.seed);
    Splits splits = split_data(encode_all(data, vocab), cfg.val_fraction, master);
    const std::vector<Example>& score_set = splits.val.empty() ? splits.train : splits.val;

    std::vector<nn::Var> params;
    for (auto& [name, v] : disc.named_params()) params.push_back(v);
    nn::Adam opt(params, cfg.d_lr);

    std::size_t step = 0;
    auto run_epoch = [&](std::size_t epoch, TrainLog& log) {
        nn::Rng epoch_rng = master.split(100 + epoch);
        std::vector<std::size_t> perm(splits.train.size());
        std::iota(perm.begin(), perm.end(), 0);
        epoch_rng.shuffle(perm);
        for (std::size_t start = 0; start < perm.size(); start += cfg.batch) {
            std::size_t count = std::min(cfg.batch, perm.size() - start);
            std::vector<discriminator::LabeledInput> batch;
            batch.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                const Example& e = splits.train[perm[start + i]];
                batch.push_back({disc.embed_real(e.ids), e.cls, discriminator::kSourceReal});
            }
            discriminator::LossParts parts =
                discriminator::discriminator_loss_parts(disc, batch, true);
            log.steps.push_back(
                {step++, "classifier", finite_or_throw(parts.class_term, "classifier"), 0.0});
            opt.zero_grad();
            nn::backward(parts.total);
            opt.step();
        }
    };

    BaselineResult result;
    result.log = run_training(disc, vocab, cfg, score_set, result.checkpoint, run_epoch);
    return result;
}

corpus::VaguenessClass majority_class(const std::vector<corpus::VaguenessClass>& classes) {
    if (classes.empty()) throw DataError("majority baseline: no training classes");
    std::array<std::size_t, corpus::kNumClasses> counts{};
    for (corpus::VaguenessClass c : classes) ++counts[static_cast<std::size_t>(c)];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < corpus::kNumClasses; ++i)
        if (counts[i] > counts[arg]) arg = i; // strict, so ties keep the lower class
    return static_cast<corpus::VaguenessClass>(arg);
}

} // namespace vague::gan
