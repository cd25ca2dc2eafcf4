#include "vague/discriminator.hpp"

#include <algorithm>
#include <utility>

namespace vague::discriminator {

namespace {

constexpr std::size_t kWidths[3] = {3, 4, 5};
constexpr std::size_t kMaxWidth = 5;

} // namespace

Discriminator Discriminator::init(const std::string& variant,
                                  const embeddings::EmbeddingMatrix& emb,
                                  const DiscriminatorConfig& cfg, nn::Rng& rng) {
    if (variant != kCnnVariant && variant != kLstmVariant)
        throw UsageError("discriminator: unknown variant '" + variant + "'");
    Discriminator d;
    d.variant = variant;
    d.embedding = nn::parameter(emb.matrix);
    std::size_t repr = 0;
    if (variant == kCnnVariant) {
        if (cfg.filters == 0) throw UsageError("discriminator: filters must be positive");
        std::size_t dd = emb.dim();
        d.conv3 = nn::parameter(nn::xavier_init({cfg.filters, 3 * dd}, rng));
        d.conv4 = nn::parameter(nn::xavier_init({cfg.filters, 4 * dd}, rng));
        d.conv5 = nn::parameter(nn::xavier_init({cfg.filters, 5 * dd}, rng));
        d.cb3 = nn::parameter(nn::Tensor({cfg.filters}));
        d.cb4 = nn::parameter(nn::Tensor({cfg.filters}));
        d.cb5 = nn::parameter(nn::Tensor({cfg.filters}));
        repr = 3 * cfg.filters;
    } else {
        if (cfg.hidden == 0) throw UsageError("discriminator: hidden must be positive");
        d.cell = nn::LstmCell::init(emb.dim(), cfg.hidden, rng);
        repr = cfg.hidden;
    }
    d.w_class = nn::parameter(nn::Tensor({corpus::kNumClasses, repr}));
    d.b_class = nn::parameter(nn::Tensor({corpus::kNumClasses}));
    d.w_source = nn::parameter(nn::Tensor({2, repr}));
    d.b_source = nn::parameter(nn::Tensor({2}));
    return d;
}

std::size_t Discriminator::repr_size() const { return w_class.shape()[1]; }

DiscriminatorInput Discriminator::embed_real(const std::vector<std::size_t>& ids) const {
    DiscriminatorInput input;
    input.embedded.reserve(ids.size() + 1);
    for (std::size_t id : ids) input.embedded.push_back(nn::embedding_row(embedding, id));
    input.embedded.push_back(nn::embedding_row(embedding, embeddings::kEosId));
    return input;
}

DiscriminatorInput Discriminator::embed_fake(const generator::GeneratedSentence& sent) const {
    if (sent.soft_dists.empty())
        throw UsageError("discriminator: generated sentence has no steps");
    DiscriminatorInput input;
    input.embedded.reserve(sent.soft_dists.size());
    for (const nn::Var& soft : sent.soft_dists)
        input.embedded.push_back(nn::matmul(soft, embedding));
    return input;
}

nn::Var Discriminator::representation(const DiscriminatorInput& input) const {
    const std::size_t real_len = input.embedded.size();
    if (real_len == 0) throw UsageError("discriminator: empty input");

    if (variant == kLstmVariant) {
        nn::LstmCell::State state = cell.zero_state();
        for (const nn::Var& x : input.embedded) state = cell.step(x, state);
        return state.h;
    }

    std::size_t d = input.embedded[0].size();
    std::vector<nn::Var> rows = input.embedded;
    // zero-vector padding for sentences shorter than the widest filter
    while (rows.size() < kMaxWidth) rows.push_back(nn::constant(nn::Tensor({d})));
    nn::Var matrix = nn::stack_rows(rows);

    const nn::Var* filters[3] = {&conv3, &conv4, &conv5};
    const nn::Var* biases[3] = {&cb3, &cb4, &cb5};
    std::vector<nn::Var> pooled;
    pooled.reserve(3);
    for (int k = 0; k < 3; ++k) {
        std::size_t w = kWidths[k];
        nn::Var conv = nn::relu(nn::conv1d_valid(matrix, *filters[k], *biases[k], w));
        // only windows containing at least one real token feed the max, so
        // extra trailing padding can never change the output
        std::size_t valid = std::max(real_len, w) - w + 1;
        pooled.push_back(nn::max_over_rows(conv, valid));
    }
    return nn::concat(pooled);
}

Discriminator::Heads Discriminator::forward(const DiscriminatorInput& input) const {
    nn::Var repr = representation(input);
    return {nn::add(nn::matmul(w_class, repr), b_class),
            nn::add(nn::matmul(w_source, repr), b_source)};
}

std::vector<std::pair<std::string, nn::Var>> Discriminator::named_params() const {
    std::vector<std::pair<std::string, nn::Var>> named = {{"embedding", embedding}};
    if (variant == kCnnVariant) {
        named.emplace_back("conv3", conv3);
        named.emplace_back("conv4", conv4);
        named.emplace_back("conv5", conv5);
        named.emplace_back("cb3", cb3);
        named.emplace_back("cb4", cb4);
        named.emplace_back("cb5", cb5);
    } else {
        named.emplace_back("cell.w_x", cell.w_x);
        named.emplace_back("cell.w_h", cell.w_h);
        named.emplace_back("cell.b", cell.b);
    }
    named.emplace_back("w_class", w_class);
    named.emplace_back("b_class", b_class);
    named.emplace_back("w_source", w_source);
    named.emplace_back("b_source", b_source);
    return named;
}

LossParts discriminator_loss_parts(const Discriminator& disc,
                                   const std::vector<LabeledInput>& batch,
                                   bool vagueness_only) {
    if (batch.empty()) throw DataError("discriminator loss: empty batch");
    std::vector<nn::Var> class_terms;
    std::vector<nn::Var> source_terms[2];
    for (const LabeledInput& item : batch) {
        Discriminator::Heads heads = disc.forward(item.input);
        class_terms.push_back(
            nn::cross_entropy(heads.class_logits, static_cast<std::size_t>(item.cls)));
        if (vagueness_only) continue;
        if (item.source != kSourceReal && item.source != kSourceFake)
            throw UsageError("discriminator loss: source label must be real or fake");
        source_terms[item.source].push_back(
            nn::cross_entropy(heads.source_logits, item.source));
    }
    LossParts parts;
    parts.class_term = nn::mean(nn::concat(class_terms));
    parts.total = parts.class_term;
    // one mean per source, summed, so each side counts fully whatever the
    // real/fake mix of the batch
    for (const std::vector<nn::Var>& terms : source_terms) {
        if (terms.empty()) continue;
        nn::Var m = nn::mean(nn::concat(terms));
        parts.source_term = parts.source_term.defined() ? nn::add(parts.source_term, m) : m;
    }
    if (parts.source_term.defined()) parts.total = nn::add(parts.total, parts.source_term);
    return parts;
}

nn::Var loss_discriminator(const Discriminator& disc, const std::vector<LabeledInput>& batch,
                           bool vagueness_only) {
    return discriminator_loss_parts(disc, batch, vagueness_only).total;
}

LossParts generator_loss_parts(const Discriminator& disc, const std::vector<LabeledInput>& fakes,
                               bool vagueness_only) {
    if (fakes.empty()) throw DataError("generator loss: empty batch");
    std::vector<nn::Var> class_terms, source_terms;
    for (const LabeledInput& item : fakes) {
        Discriminator::Heads heads = disc.forward(item.input);
        class_terms.push_back(
            nn::cross_entropy(heads.class_logits, static_cast<std::size_t>(item.cls)));
        if (!vagueness_only) // non-saturating: reward being scored as real
            source_terms.push_back(nn::cross_entropy(heads.source_logits, kSourceReal));
    }
    LossParts parts;
    parts.class_term = nn::mean(nn::concat(class_terms));
    parts.total = parts.class_term;
    if (!source_terms.empty()) {
        parts.source_term = nn::mean(nn::concat(source_terms));
        parts.total = nn::add(parts.total, parts.source_term);
    }
    return parts;
}

nn::Var loss_generator(const Discriminator& disc, const std::vector<LabeledInput>& fakes,
                       bool vagueness_only) {
    return generator_loss_parts(disc, fakes, vagueness_only).total;
}

std::vector<double> predict_class_probs(const Discriminator& disc,
                                        const std::vector<std::size_t>& ids) {
    nn::Var probs = nn::softmax(disc.forward(disc.embed_real(ids)).class_logits);
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = probs.value()[i];
    return out;
}

Checkpoint discriminator_checkpoint(const Discriminator& disc,
                                    const embeddings::Vocabulary& vocab) {
    Checkpoint ckpt;
    ckpt.config = {{"kind", kDiscriminatorKind},
                   {"variant", disc.variant},
                   {"dim", disc.embedding.shape()[1]},
                   {"vocab", embeddings::vocab_to_json(vocab)}};
    if (disc.variant == kCnnVariant)
        ckpt.config["filters"] = disc.conv3.shape()[0];
    else
        ckpt.config["hidden"] = disc.cell.hidden;
    for (const auto& [name, v] : disc.named_params()) ckpt.add(name, v.value());
    return ckpt;
}

Discriminator discriminator_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind() != kDiscriminatorKind)
        throw UsageError("sentence classification needs a sentence-classifier checkpoint, "
                         "got kind '" + ckpt.kind() + "'");
    Discriminator d;
    d.variant = ckpt.config.at("variant").get<std::string>();
    if (d.variant != kCnnVariant && d.variant != kLstmVariant)
        throw DataError("checkpoint: unknown discriminator variant '" + d.variant + "'");
    d.embedding = nn::parameter(ckpt.get("embedding"));
    if (d.variant == kCnnVariant) {
        d.conv3 = nn::parameter(ckpt.get("conv3"));
        d.conv4 = nn::parameter(ckpt.get("conv4"));
        d.conv5 = nn::parameter(ckpt.get("conv5"));
        d.cb3 = nn::parameter(ckpt.get("cb3"));
        d.cb4 = nn::parameter(ckpt.get("cb4"));
        d.cb5 = nn::parameter(ckpt.get("cb5"));
    } else {
        std::size_t hidden = ckpt.config.at("hidden").get<std::size_t>();
        d.cell = {nn::parameter(ckpt.get("cell.w_x")), nn::parameter(ckpt.get("cell.w_h")),
                  nn::parameter(ckpt.get("cell.b")), hidden};
    }
    d.w_class = nn::parameter(ckpt.get("w_class"));
    d.b_class = nn::parameter(ckpt.get("b_class"));
    d.w_source = nn::parameter(ckpt.get("w_source"));
    d.b_source = nn::parameter(ckpt.get("b_source"));
    return d;
}

} // namespace vague::discriminator
