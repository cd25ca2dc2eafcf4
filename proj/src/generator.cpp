#include "vague/generator.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "vague/optim.hpp"

namespace vague::generator {

LmGenerator LmGenerator::init(const embeddings::EmbeddingMatrix& emb, std::size_t hidden,
                              std::size_t max_len, nn::Rng& rng) {
    if (hidden == 0) throw UsageError("generator: hidden size must be positive");
    if (max_len == 0) throw UsageError("generator: max_len must be positive");
    LmGenerator g;
    g.embedding = nn::parameter(emb.matrix);
    g.cell = nn::LstmCell::init(emb.dim(), hidden, rng);
    g.w = nn::parameter(nn::Tensor({emb.vocab_size(), hidden}));
    g.b = nn::parameter(nn::Tensor({emb.vocab_size()}));
    g.bos = nn::parameter(nn::Tensor({emb.dim()}));
    g.max_len = max_len;
    return g;
}

nn::Var LmGenerator::step_logits(const nn::LstmCell::State& state) const {
    return nn::add(nn::matmul(w, state.h), b);
}

nn::Var LmGenerator::lm_loss(const std::vector<std::size_t>& ids) const {
    nn::LstmCell::State state = cell.zero_state();
    nn::Var x = bos;
    std::vector<nn::Var> losses;
    losses.reserve(ids.size() + 1);
    for (std::size_t t = 0; t <= ids.size(); ++t) {
        state = cell.step(x, state);
        std::size_t target = t < ids.size() ? ids[t] : embeddings::kEosId;
        losses.push_back(nn::cross_entropy(step_logits(state), target));
        if (t < ids.size()) x = nn::embedding_row(embedding, ids[t]);
    }
    return nn::mean(nn::concat(losses));
}

std::vector<std::pair<std::string, nn::Var>> LmGenerator::named_params() const {
    return {{"embedding", embedding}, {"cell.w_x", cell.w_x}, {"cell.w_h", cell.w_h},
            {"cell.b", cell.b},       {"w", w},               {"b", b},
            {"bos", bos}};
}

double perplexity(const LmGenerator& gen, const std::vector<std::vector<std::size_t>>& ids) {
    double total = 0;
    std::size_t tokens = 0;
    for (const auto& sent : ids) {
        total += gen.lm_loss(sent).value()[0] * static_cast<double>(sent.size() + 1);
        tokens += sent.size() + 1;
    }
    if (tokens == 0) throw DataError("perplexity: no sentences");
    return std::exp(total / static_cast<double>(tokens));
}

VaguenessBias VaguenessBias::init(const embeddings::Vocabulary& vocab,
                                  const corpus::CueLexicon& lexicon) {
    nn::Tensor v({vocab.size()});
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (lexicon.contains(vocab.token(i))) v[i] = 1.0;
    VaguenessBias bias;
    bias.v = nn::parameter(std::move(v));
    bias.lambda_by_class = {{corpus::VaguenessClass::Clear, -1.0},
                            {corpus::VaguenessClass::SomewhatClear, 0.0},
                            {corpus::VaguenessClass::Vague, 1.0},
                            {corpus::VaguenessClass::ExtremelyVague, 2.0}};
    return bias;
}

VaguenessBias VaguenessBias::zeros(std::size_t vocab_size) {
    VaguenessBias bias;
    bias.v = nn::parameter(nn::Tensor({vocab_size}));
    bias.lambda_by_class = {{corpus::VaguenessClass::Clear, -1.0},
                            {corpus::VaguenessClass::SomewhatClear, 0.0},
                            {corpus::VaguenessClass::Vague, 1.0},
                            {corpus::VaguenessClass::ExtremelyVague, 2.0}};
    return bias;
}

double VaguenessBias::lambda(corpus::VaguenessClass c) const {
    auto it = lambda_by_class.find(c);
    if (it == lambda_by_class.end())
        throw UsageError(std::string("no lambda for class '") + corpus::class_name(c) + "'");
    return it->second;
}

StepResult conditional_step(const LmGenerator& gen, const VaguenessBias& bias,
                            corpus::VaguenessClass c, const nn::LstmCell::State& prev,
                            const nn::Var& x_prev, double tau, nn::Rng& rng,
                            const nn::Tensor* forced_z) {
    if (tau <= 0) throw UsageError("conditional_step: temperature must be positive");
    if (bias.v.size() != gen.b.size())
        throw UsageError("conditional_step: bias vector length does not match vocabulary");

    StepResult out;
    out.state = gen.cell.step(x_prev, prev);
    nn::Var a = gen.step_logits(out.state);

    nn::Tensor z({a.size()});
    if (forced_z) {
        if (!forced_z->same_shape(z))
            throw ShapeError("conditional_step: forced noise has the wrong shape");
        z = *forced_z;
    } else {
        z = nn::sample_gumbel({a.size()}, rng);
    }

    double lam = bias.lambda(c);
    nn::Var scores = nn::add(a, nn::constant(z));
    if (lam != 0.0) scores = nn::add(scores, nn::scale(bias.v, lam));

    const nn::Tensor& s = scores.value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[best]) best = i;
    out.hard = best;
    out.soft = nn::softmax(scores, tau);
    return out;
}

std::vector<GeneratedSentence> generate_batch(const LmGenerator& gen,
                                              const VaguenessBias& bias,
                                              const std::vector<corpus::VaguenessClass>& classes,
                                              double tau, nn::Rng& rng) {
    std::vector<GeneratedSentence> out;
    out.reserve(classes.size());
    for (corpus::VaguenessClass c : classes) {
        GeneratedSentence sent;
        sent.cls = c;
        nn::LstmCell::State state = gen.cell.zero_state();
        nn::Var x = gen.bos;
        for (std::size_t t = 0; t < gen.max_len; ++t) {
            StepResult step = conditional_step(gen, bias, c, state, x, tau, rng);
            sent.hard_tokens.push_back(step.hard);
            sent.soft_dists.push_back(step.soft);
            if (step.hard == embeddings::kEosId) break;
            x = nn::detach(nn::embedding_row(gen.embedding, step.hard));
            state = step.state;
        }
        out.push_back(std::move(sent));
    }
    return out;
}

namespace {

std::vector<nn::Var> bare(const std::vector<std::pair<std::string, nn::Var>>& named) {
    std::vector<nn::Var> out;
    out.reserve(named.size());
    for (const auto& [_, v] : named) out.push_back(v);
    return out;
}

} // namespace

PretrainResult pretrain_lm(const std::vector<std::vector<std::string>>& sentences,
                           const embeddings::Vocabulary& vocab,
                           const embeddings::EmbeddingMatrix& emb,
                           const GeneratorConfig& cfg) {
    if (vocab.size() != emb.vocab_size())
        throw UsageError("generator: vocabulary and embedding matrix disagree");
    if (cfg.batch == 0) throw UsageError("generator: batch size must be positive");
    if (cfg.val_fraction < 0 || cfg.val_fraction >= 1)
        throw UsageError("generator: val_fraction must be in [0,1)");

    std::vector<std::vector<std::size_t>> ids;
    for (const auto& s : sentences)
        if (!s.empty()) ids.push_back(vocab.encode(s));
    if (ids.empty()) throw DataError("generator: no non-empty sentences");

    nn::Rng master(cfg.seed);
    nn::Rng split_rng = master.split(0);
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * ids.size());
    if (n_val == ids.size()) n_val = 0;
    std::vector<std::vector<std::size_t>> val, train;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val : train).push_back(std::move(ids[order[i]]));
    const auto& score_set = val.empty() ? train : val;

    nn::Rng init_rng = master.split(1);
    LmGenerator gen = LmGenerator::init(emb, cfg.hidden, cfg.max_len, init_rng);
    auto named = gen.named_params();
    nn::Adam opt(bare(named), cfg.lr);

    auto snapshot = [&]() {
        std::vector<std::pair<std::string, nn::Tensor>> copy;
        for (const auto& [name, v] : named) copy.emplace_back(name, v.value());
        return copy;
    };

    PretrainResult result;
    double ppl = perplexity(gen, score_set);
    result.heldout_perplexities.push_back(ppl);
    double best_ppl = ppl;
    auto best = snapshot();

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        nn::Rng epoch_rng = master.split(100 + epoch);
        std::vector<std::size_t> perm(train.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        epoch_rng.shuffle(perm);

        for (std::size_t start = 0; start < perm.size(); start += cfg.batch) {
            std::size_t stop = std::min(perm.size(), start + cfg.batch);
            std::vector<nn::Var> losses;
            for (std::size_t k = start; k < stop; ++k)
                losses.push_back(gen.lm_loss(train[perm[k]]));
            nn::Var loss = nn::mean(nn::concat(losses));
            opt.zero_grad();
            nn::backward(loss);
            opt.step();
        }

        ppl = perplexity(gen, score_set);
        result.heldout_perplexities.push_back(ppl);
        if (ppl < best_ppl) {
            best_ppl = ppl;
            best = snapshot();
        }
    }

    Checkpoint ckpt;
    ckpt.config = {{"kind", kGeneratorKind},
                   {"dim", emb.dim()},
                   {"hidden", cfg.hidden},
                   {"max_len", cfg.max_len},
                   {"vocab", embeddings::vocab_to_json(vocab)}};
    for (auto& [name, tensor] : best) ckpt.add(name, std::move(tensor));
    result.checkpoint = std::move(ckpt);
    return result;
}

Checkpoint generator_checkpoint(const LmGenerator& gen, const embeddings::Vocabulary& vocab) {
    Checkpoint ckpt;
    ckpt.config = {{"kind", kGeneratorKind},
                   {"dim", gen.embedding.shape()[1]},
                   {"hidden", gen.cell.hidden},
                   {"max_len", gen.max_len},
                   {"vocab", embeddings::vocab_to_json(vocab)}};
    for (const auto& [name, v] : gen.named_params()) ckpt.add(name, v.value());
    return ckpt;
}

LmGenerator generator_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind() != kGeneratorKind)
        throw UsageError("generation needs a generator checkpoint, got kind '" + ckpt.kind() +
                         "'");
    LmGenerator g;
    g.embedding = nn::parameter(ckpt.get("embedding"));
    std::size_t hidden = ckpt.config.at("hidden").get<std::size_t>();
    g.cell = {nn::parameter(ckpt.get("cell.w_x")), nn::parameter(ckpt.get("cell.w_h")),
              nn::parameter(ckpt.get("cell.b")), hidden};
    g.w = nn::parameter(ckpt.get("w"));
    g.b = nn::parameter(ckpt.get("b"));
    g.bos = nn::parameter(ckpt.get("bos"));
    g.max_len = ckpt.config.at("max_len").get<std::size_t>();
    return g;
}

void add_bias_to_checkpoint(Checkpoint& ckpt, const VaguenessBias& bias) {
    ckpt.add("bias.v", bias.v.value());
    nlohmann::json lam = nlohmann::json::object();
    for (const auto& [cls, value] : bias.lambda_by_class)
        lam[corpus::class_name(cls)] = value;
    ckpt.config["lambda"] = std::move(lam);
}

bool checkpoint_has_bias(const Checkpoint& ckpt) { return ckpt.has("bias.v"); }

VaguenessBias bias_from_checkpoint(const Checkpoint& ckpt) {
    VaguenessBias bias;
    bias.v = nn::parameter(ckpt.get("bias.v"));
    if (!ckpt.config.contains("lambda"))
        throw DataError("checkpoint: bias vector present but no lambda map");
    for (const auto& [name, value] : ckpt.config.at("lambda").items())
        bias.lambda_by_class[corpus::class_from_name(name)] = value.get<double>();
    return bias;
}

} // namespace vague::generator
