#include "vague/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vague::embeddings {

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences,
                             std::size_t max_size) {
    if (max_size < 4) throw UsageError("vocabulary: max_size must be at least 4");
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& sent : sentences)
        for (const auto& tok : sent) {
            std::string t = corpus::lowercase(tok);
            if (t == kPadToken || t == kUnkToken || t == kEosToken) continue;
            ++counts[t];
        }
    if (counts.empty()) throw DataError("vocabulary: no tokens in corpus");

    std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> toks{kPadToken, kUnkToken, kEosToken};
    for (const auto& [tok, _] : sorted) {
        if (toks.size() >= max_size) break;
        toks.push_back(tok);
    }
    return from_tokens(std::move(toks));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> id_to_token) {
    if (id_to_token.size() < 3 || id_to_token[kPadId] != kPadToken ||
        id_to_token[kUnkId] != kUnkToken || id_to_token[kEosId] != kEosToken)
        throw DataError("vocabulary: token list must start with <pad>, <unk>, <eos>");
    Vocabulary v;
    v.id_to_token_ = std::move(id_to_token);
    for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
        if (!v.token_to_id_.emplace(v.id_to_token_[i], i).second)
            throw DataError("vocabulary: duplicate token '" + v.id_to_token_[i] + "'");
    }
    return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(corpus::lowercase(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
}

std::optional<std::size_t> Vocabulary::find(const std::string& token) const {
    auto it = token_to_id_.find(corpus::lowercase(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
    if (id >= id_to_token_.size())
        throw UsageError("vocabulary: id " + std::to_string(id) + " out of " +
                         std::to_string(id_to_token_.size()));
    return id_to_token_[id];
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<corpus::Token>& tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const corpus::Token& t : tokens) ids.push_back(id(t.text));
    return ids;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(id(t));
    return ids;
}

EmbeddingMatrix random_embeddings(std::size_t vocab_size, std::size_t dim, nn::Rng& rng) {
    if (vocab_size == 0 || dim == 0)
        throw UsageError("random_embeddings: empty shape");
    nn::Tensor m({vocab_size, dim});
    double bound = 0.5 / static_cast<double>(dim);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-bound, bound);
    return {std::move(m)};
}

double cosine(const EmbeddingMatrix& e, std::size_t a, std::size_t b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < e.dim(); ++i) {
        double x = e.matrix.at(a, i), y = e.matrix.at(b, i);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

struct UnigramTable {
    std::vector<double> cumulative; // over token ids
    double total = 0.0;

    static UnigramTable build(const std::vector<std::vector<std::size_t>>& ids,
                              std::size_t vocab_size) {
        std::vector<double> weight(vocab_size, 0.0);
        for (const auto& sent : ids)
            for (std::size_t id : sent) weight[id] += 1.0;
        UnigramTable t;
        t.cumulative.resize(vocab_size, 0.0);
        for (std::size_t v = 0; v < vocab_size; ++v) {
            t.total += std::pow(weight[v], 0.75);
            t.cumulative[v] = t.total;
        }
        return t;
    }

    std::size_t sample(nn::Rng& rng) const {
        double u = rng.uniform() * total;
        // upper_bound, so zero-weight ids at the front can never be drawn
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        return static_cast<std::size_t>(it - cumulative.begin());
    }
};

struct EvalPair {
    std::size_t center;
    std::size_t context;
    std::vector<std::size_t> negatives;
};

double pair_loss(const nn::Tensor& win, const nn::Tensor& wout, std::size_t dim,
                 const EvalPair& p) {
    const double* u = win.data() + p.center * dim;
    const double* v = wout.data() + p.context * dim;
    double z = 0;
    for (std::size_t i = 0; i < dim; ++i) z += u[i] * v[i];
    double loss = -std::log(std::max(sigmoid(z), 1e-12));
    for (std::size_t n : p.negatives) {
        const double* w = wout.data() + n * dim;
        double zn = 0;
        for (std::size_t i = 0; i < dim; ++i) zn += u[i] * w[i];
        loss -= std::log(std::max(sigmoid(-zn), 1e-12));
    }
    return loss;
}

} // namespace

SkipgramResult train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                              const Vocabulary& vocab, const SkipgramConfig& cfg) {
    if (cfg.dim == 0 || cfg.window == 0) throw UsageError("skipgram: dim and window must be positive");
    std::vector<std::vector<std::size_t>> ids;
    std::size_t total_tokens = 0;
    for (const auto& s : sentences) {
        if (s.empty()) continue;
        ids.push_back(vocab.encode(s));
        total_tokens += s.size();
    }
    if (total_tokens < cfg.window + 1)
        throw DataError("skipgram: corpus of " + std::to_string(total_tokens) +
                        " tokens is too small for window " + std::to_string(cfg.window));

    nn::Rng master(cfg.seed);

    // held-out sentences for the loss trajectory
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    nn::Rng split_rng = master.split(0);
    split_rng.shuffle(order);
    std::size_t n_heldout = static_cast<std::size_t>(cfg.heldout_fraction * ids.size());
    std::vector<std::vector<std::size_t>> train_ids, heldout_ids;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_heldout ? heldout_ids : train_ids).push_back(ids[order[i]]);
    if (train_ids.empty()) {
        train_ids = heldout_ids; // corpus too small to hold anything out
    }
    if (heldout_ids.empty()) heldout_ids = train_ids;

    UnigramTable table = UnigramTable::build(train_ids, vocab.size());

    // fixed evaluation pairs with fixed negatives
    nn::Rng eval_rng = master.split(1);
    std::vector<EvalPair> eval_pairs;
    for (const auto& sent : heldout_ids)
        for (std::size_t i = 0; i < sent.size(); ++i) {
            std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
            std::size_t hi = std::min(sent.size(), i + cfg.window + 1);
            for (std::size_t j = lo; j < hi; ++j) {
                if (j == i) continue;
                EvalPair p{sent[i], sent[j], {}};
                for (std::size_t k = 0; k < cfg.negatives; ++k)
                    p.negatives.push_back(table.sample(eval_rng));
                eval_pairs.push_back(std::move(p));
            }
        }

    nn::Rng init_rng = master.split(2);
    EmbeddingMatrix emb = random_embeddings(vocab.size(), cfg.dim, init_rng);
    nn::Tensor wout({vocab.size(), cfg.dim}); // zeros, word2vec convention

    auto eval_loss = [&]() {
        double loss = 0;
        for (const EvalPair& p : eval_pairs) loss += pair_loss(emb.matrix, wout, cfg.dim, p);
        return eval_pairs.empty() ? 0.0 : loss / static_cast<double>(eval_pairs.size());
    };

    SkipgramResult result;
    result.heldout_losses.push_back(eval_loss());

    std::vector<double> grad_center(cfg.dim);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        nn::Rng epoch_rng = master.split(100 + epoch);
        std::vector<std::size_t> sent_order(train_ids.size());
        for (std::size_t i = 0; i < sent_order.size(); ++i) sent_order[i] = i;
        epoch_rng.shuffle(sent_order);

        for (std::size_t si : sent_order) {
            const auto& sent = train_ids[si];
            for (std::size_t i = 0; i < sent.size(); ++i) {
                std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
                std::size_t hi = std::min(sent.size(), i + cfg.window + 1);
                std::size_t c = sent[i];
                double* u = emb.matrix.data() + c * cfg.dim;
                for (std::size_t j = lo; j < hi; ++j) {
                    if (j == i) continue;
                    std::fill(grad_center.begin(), grad_center.end(), 0.0);
                    std::size_t o = sent[j];
                    double* v = wout.data() + o * cfg.dim;
                    double z = 0;
                    for (std::size_t d = 0; d < cfg.dim; ++d) z += u[d] * v[d];
                    double g = sigmoid(z) - 1.0; // positive example
                    for (std::size_t d = 0; d < cfg.dim; ++d) {
                        grad_center[d] += g * v[d];
                        v[d] -= cfg.lr * g * u[d];
                    }
                    for (std::size_t k = 0; k < cfg.negatives; ++k) {
                        std::size_t neg = table.sample(epoch_rng);
                        if (neg == o) continue;
                        double* w = wout.data() + neg * cfg.dim;
                        double zn = 0;
                        for (std::size_t d = 0; d < cfg.dim; ++d) zn += u[d] * w[d];
                        double gn = sigmoid(zn); // negative example
                        for (std::size_t d = 0; d < cfg.dim; ++d) {
                            grad_center[d] += gn * w[d];
                            w[d] -= cfg.lr * gn * u[d];
                        }
                    }
                    for (std::size_t d = 0; d < cfg.dim; ++d)
                        u[d] -= cfg.lr * grad_center[d];
                }
            }
        }
        result.heldout_losses.push_back(eval_loss());
        if (!emb.matrix.all_finite())
            throw DivergenceError("skipgram: embeddings diverged at epoch " +
                                  std::to_string(epoch));
    }
    result.embeddings = std::move(emb);
    return result;
}

void save_embeddings(const std::string& path, const Vocabulary& vocab,
                     const EmbeddingMatrix& emb) {
    if (vocab.size() != emb.vocab_size())
        throw UsageError("save_embeddings: vocabulary and matrix row count differ");
    std::ofstream os(path);
    if (!os) throw DataError("embeddings: cannot open '" + path + "' for writing");
    os << vocab.size() << ' ' << emb.dim() << '\n';
    os << std::setprecision(17);
    for (std::size_t v = 0; v < vocab.size(); ++v) {
        os << vocab.token(v);
        for (std::size_t d = 0; d < emb.dim(); ++d) os << ' ' << emb.matrix.at(v, d);
        os << '\n';
    }
    if (!os) throw DataError("embeddings: write to '" + path + "' failed");
}

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                nn::Rng& rng) {
    std::ifstream is(path);
    if (!is) throw DataError("embeddings: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(is, header)) throw DataError("embeddings: empty file '" + path + "'");
    std::istringstream hs(header);
    std::size_t count = 0, dim = 0;
    if (!(hs >> count >> dim) || dim == 0)
        throw DataError(path + ":1: expected '<count> <dim>' header");

    EmbeddingMatrix emb = random_embeddings(vocab.size(), dim, rng);
    std::string line;
    std::size_t line_no = 1, seen = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        ++seen;
        auto vid = vocab.find(token);
        std::vector<double> values(dim);
        for (std::size_t d = 0; d < dim; ++d)
            if (!(ls >> values[d]))
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": expected " + std::to_string(dim) + " values");
        double extra;
        if (ls >> extra)
            throw DataError(path + ":" + std::to_string(line_no) + ": more than " +
                            std::to_string(dim) + " values");
        if (vid)
            for (std::size_t d = 0; d < dim; ++d) emb.matrix.at(*vid, d) = values[d];
    }
    if (seen != count)
        throw DataError(path + ": header declares " + std::to_string(count) +
                        " rows but file has " + std::to_string(seen));
    return emb;
}

nlohmann::json vocab_to_json(const Vocabulary& v) {
    return nlohmann::json(v.tokens());
}

Vocabulary vocab_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw DataError("vocabulary: config entry must be an array");
    return Vocabulary::from_tokens(j.get<std::vector<std::string>>());
}

} // namespace vague::embeddings
