#include "vague/word_tagger.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "vague/metrics.hpp"
#include "vague/optim.hpp"

namespace vague::word_tagger {

double UniqueWordDataset::positive_ratio() const {
    if (negatives == 0) throw DataError("unique-word dataset has no negative words");
    return static_cast<double>(positives) / static_cast<double>(negatives);
}

UniqueWordDataset
build_unique_word_dataset(const std::vector<corpus::ConsolidatedSentence>& train) {
    if (train.empty()) throw DataError("unique-word dataset: no sentences");
    std::map<std::string, int> label_of; // sorted, so entry order is stable
    for (const auto& s : train) {
        if (s.word_labels.size() != s.tokens.size())
            throw DataError("sentence '" + s.id + "': " + std::to_string(s.word_labels.size()) +
                            " labels for " + std::to_string(s.tokens.size()) + " tokens");
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            std::string t = corpus::lowercase(s.tokens[i].text);
            label_of[t] = std::max(label_of[t], s.word_labels[i]);
        }
    }
    UniqueWordDataset ds;
    for (const auto& [tok, label] : label_of) {
        ds.entries.emplace_back(tok, label);
        ++(label == 1 ? ds.positives : ds.negatives);
    }
    return ds;
}

// ---- models --------------------------------------------------------------

BiLstmTagger BiLstmTagger::init(const embeddings::EmbeddingMatrix& emb, std::size_t hidden,
                                nn::Rng& rng) {
    if (hidden == 0) throw UsageError("tagger: hidden size must be positive");
    BiLstmTagger m;
    m.embedding = nn::parameter(emb.matrix);
    m.fwd = nn::LstmCell::init(emb.dim(), hidden, rng);
    m.bwd = nn::LstmCell::init(emb.dim(), hidden, rng);
    m.w_o = nn::parameter(nn::Tensor({2 * hidden}));
    m.b_o = nn::parameter(nn::Tensor({1}));
    return m;
}

nn::Var BiLstmTagger::token_logits(const std::vector<std::size_t>& ids) const {
    const std::size_t T = ids.size();
    std::vector<nn::Var> xs;
    xs.reserve(T);
    for (std::size_t id : ids) xs.push_back(nn::embedding_row(embedding, id));

    std::vector<nn::Var> hf(T), hb(T);
    nn::LstmCell::State sf = fwd.zero_state();
    for (std::size_t t = 0; t < T; ++t) {
        sf = fwd.step(xs[t], sf);
        hf[t] = sf.h;
    }
    nn::LstmCell::State sb = bwd.zero_state();
    for (std::size_t t = T; t-- > 0;) {
        sb = bwd.step(xs[t], sb);
        hb[t] = sb.h;
    }

    std::vector<nn::Var> logits;
    logits.reserve(T);
    for (std::size_t t = 0; t < T; ++t)
        logits.push_back(nn::add(nn::dot(w_o, nn::concat({hf[t], hb[t]})), b_o));
    return nn::concat(logits);
}

std::vector<std::pair<std::string, nn::Var>> BiLstmTagger::named_params() const {
    return {{"embedding", embedding}, {"fwd.w_x", fwd.w_x}, {"fwd.w_h", fwd.w_h},
            {"fwd.b", fwd.b},         {"bwd.w_x", bwd.w_x}, {"bwd.w_h", bwd.w_h},
            {"bwd.b", bwd.b},         {"w_o", w_o},         {"b_o", b_o}};
}

AgnosticClassifier AgnosticClassifier::init(const embeddings::EmbeddingMatrix& emb,
                                            nn::Rng& rng) {
    (void)rng; // output layer starts at zero; kept for interface symmetry
    AgnosticClassifier m;
    m.embedding = nn::parameter(emb.matrix);
    m.w = nn::parameter(nn::Tensor({emb.dim()}));
    m.b = nn::parameter(nn::Tensor({1}));
    return m;
}

nn::Var AgnosticClassifier::token_logits(const std::vector<std::size_t>& ids) const {
    std::vector<nn::Var> logits;
    logits.reserve(ids.size());
    for (std::size_t id : ids)
        logits.push_back(nn::add(nn::dot(w, nn::embedding_row(embedding, id)), b));
    return nn::concat(logits);
}

std::vector<std::pair<std::string, nn::Var>> AgnosticClassifier::named_params() const {
    return {{"embedding", embedding}, {"w", w}, {"b", b}};
}

// ---- training ------------------------------------------------------------

namespace {

struct Instance {
    std::vector<std::size_t> ids;
    std::vector<int> labels;
};

std::vector<nn::Var> bare_params(const std::vector<std::pair<std::string, nn::Var>>& named) {
    std::vector<nn::Var> out;
    out.reserve(named.size());
    for (const auto& [_, v] : named) out.push_back(v);
    return out;
}

template <typename Model>
double eval_f1(const Model& model, const std::vector<Instance>& data) {
    std::vector<int> truth, pred;
    for (const Instance& inst : data) {
        if (inst.ids.empty()) continue;
        nn::Var logits = model.token_logits(inst.ids);
        for (std::size_t i = 0; i < inst.ids.size(); ++i) {
            truth.push_back(inst.labels[i]);
            pred.push_back(logits.value()[i] >= 0.0 ? 1 : 0); // sigmoid(0) = 0.5
        }
    }
    if (truth.empty()) return 0.0;
    return metrics::binary_prf(truth, pred).f1;
}

template <typename Model>
Checkpoint train_loop(Model& model, std::vector<Instance> data, const TaggerConfig& cfg,
                      nlohmann::json config) {
    if (cfg.batch == 0) throw UsageError("tagger: batch size must be positive");
    if (cfg.val_fraction < 0 || cfg.val_fraction >= 1)
        throw UsageError("tagger: val_fraction must be in [0,1)");
    if (data.empty()) throw DataError("tagger: no training instances");

    nn::Rng master(cfg.seed);
    nn::Rng split_rng = master.split(0);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * data.size());
    if (n_val == data.size()) n_val = 0;
    std::vector<Instance> val, train;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val : train).push_back(std::move(data[order[i]]));
    const std::vector<Instance>& score_set = val.empty() ? train : val;

    auto named = model.named_params();
    nn::Adam opt(bare_params(named), cfg.lr);

    auto snapshot = [&]() {
        std::vector<std::pair<std::string, nn::Tensor>> copy;
        copy.reserve(named.size());
        for (const auto& [name, v] : named) copy.emplace_back(name, v.value());
        return copy;
    };

    double best_f1 = eval_f1(model, score_set);
    auto best = snapshot();

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        nn::Rng epoch_rng = master.split(100 + epoch);
        std::vector<std::size_t> perm(train.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        epoch_rng.shuffle(perm);

        for (std::size_t start = 0; start < perm.size(); start += cfg.batch) {
            std::size_t stop = std::min(perm.size(), start + cfg.batch);
            std::vector<nn::Var> parts;
            std::vector<double> targets, weights;
            for (std::size_t k = start; k < stop; ++k) {
                const Instance& inst = train[perm[k]];
                if (inst.ids.empty()) continue;
                parts.push_back(model.token_logits(inst.ids));
                for (int y : inst.labels) {
                    targets.push_back(y);
                    weights.push_back(y == 1 ? cfg.pos_weight : 1.0);
                }
            }
            if (parts.empty()) continue;
            nn::Var logits = parts.size() == 1 ? parts[0] : nn::concat(parts);
            nn::Var loss = nn::bce_with_logits(logits, nn::Tensor({targets.size()}, targets),
                                               nn::Tensor({weights.size()}, weights));
            opt.zero_grad();
            nn::backward(loss);
            opt.step();
        }

        double f1 = eval_f1(model, score_set);
        if (f1 > best_f1) {
            best_f1 = f1;
            best = snapshot();
        }
    }

    Checkpoint ckpt;
    ckpt.config = std::move(config);
    for (auto& [name, tensor] : best) ckpt.add(name, std::move(tensor));
    return ckpt;
}

std::vector<Instance> sentence_instances(const std::vector<corpus::ConsolidatedSentence>& train,
                                         const embeddings::Vocabulary& vocab) {
    std::vector<Instance> data;
    data.reserve(train.size());
    for (const auto& s : train) {
        if (s.word_labels.size() != s.tokens.size())
            throw DataError("sentence '" + s.id + "': " + std::to_string(s.word_labels.size()) +
                            " labels for " + std::to_string(s.tokens.size()) + " tokens");
        data.push_back({vocab.encode(s.tokens), s.word_labels});
    }
    return data;
}

template <typename Model>
Model model_from_checkpoint(const Checkpoint& ckpt);

template <>
BiLstmTagger model_from_checkpoint<BiLstmTagger>(const Checkpoint& ckpt) {
    BiLstmTagger m;
    m.embedding = nn::parameter(ckpt.get("embedding"));
    std::size_t hidden = ckpt.config.at("hidden").get<std::size_t>();
    m.fwd = {nn::parameter(ckpt.get("fwd.w_x")), nn::parameter(ckpt.get("fwd.w_h")),
             nn::parameter(ckpt.get("fwd.b")), hidden};
    m.bwd = {nn::parameter(ckpt.get("bwd.w_x")), nn::parameter(ckpt.get("bwd.w_h")),
             nn::parameter(ckpt.get("bwd.b")), hidden};
    m.w_o = nn::parameter(ckpt.get("w_o"));
    m.b_o = nn::parameter(ckpt.get("b_o"));
    return m;
}

template <>
AgnosticClassifier model_from_checkpoint<AgnosticClassifier>(const Checkpoint& ckpt) {
    AgnosticClassifier m;
    m.embedding = nn::parameter(ckpt.get("embedding"));
    m.w = nn::parameter(ckpt.get("w"));
    m.b = nn::parameter(ckpt.get("b"));
    return m;
}

} // namespace

Checkpoint train_bilstm_tagger(const std::vector<corpus::ConsolidatedSentence>& train,
                               const embeddings::Vocabulary& vocab,
                               const embeddings::EmbeddingMatrix& emb,
                               const TaggerConfig& cfg) {
    if (train.empty()) throw DataError("tagger: no training sentences");
    if (vocab.size() != emb.vocab_size())
        throw UsageError("tagger: vocabulary and embedding matrix disagree");
    nn::Rng init_rng = nn::Rng(cfg.seed).split(1);
    BiLstmTagger model = BiLstmTagger::init(emb, cfg.hidden, init_rng);
    nlohmann::json config = {{"kind", kBilstmKind},
                             {"dim", emb.dim()},
                             {"hidden", cfg.hidden},
                             {"vocab", embeddings::vocab_to_json(vocab)}};
    return train_loop(model, sentence_instances(train, vocab), cfg, std::move(config));
}

Checkpoint train_agnostic_classifier(const std::vector<corpus::ConsolidatedSentence>& train,
                                     const embeddings::Vocabulary& vocab,
                                     const embeddings::EmbeddingMatrix& emb,
                                     const TaggerConfig& cfg) {
    if (vocab.size() != emb.vocab_size())
        throw UsageError("tagger: vocabulary and embedding matrix disagree");
    UniqueWordDataset ds = build_unique_word_dataset(train);
    std::vector<Instance> data;
    data.reserve(ds.entries.size());
    for (const auto& [token, label] : ds.entries)
        data.push_back({{vocab.id(token)}, {label}});
    nn::Rng init_rng = nn::Rng(cfg.seed).split(1);
    AgnosticClassifier model = AgnosticClassifier::init(emb, init_rng);
    nlohmann::json config = {{"kind", kAgnosticKind},
                             {"dim", emb.dim()},
                             {"vocab", embeddings::vocab_to_json(vocab)}};
    return train_loop(model, std::move(data), cfg, std::move(config));
}

nlohmann::json WordPrediction::to_json(const std::vector<std::string>& tokens) const {
    return {{"tokens", tokens}, {"probs", probs}, {"labels", labels}};
}

WordPrediction predict_word_labels(const Checkpoint& ckpt,
                                   const std::vector<std::string>& tokens, double threshold) {
    WordPrediction out;
    if (tokens.empty()) return out;

    embeddings::Vocabulary vocab = embeddings::vocab_from_json(ckpt.config.at("vocab"));
    std::vector<std::size_t> ids = vocab.encode(tokens);

    std::string kind = ckpt.kind();
    nn::Var logits;
    if (kind == kBilstmKind) {
        logits = model_from_checkpoint<BiLstmTagger>(ckpt).token_logits(ids);
    } else if (kind == kAgnosticKind) {
        logits = model_from_checkpoint<AgnosticClassifier>(ckpt).token_logits(ids);
    } else {
        throw UsageError("word tagging needs a word model checkpoint, got kind '" + kind + "'");
    }
    nn::Var probs = nn::sigmoid(logits);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        double p = probs.value()[i];
        out.probs.push_back(p);
        out.labels.push_back(p >= threshold ? 1 : 0);
    }
    return out;
}

} // namespace vague::word_tagger
