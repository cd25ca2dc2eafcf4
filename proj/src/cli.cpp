#include "vague/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vague/corpus.hpp"
#include "vague/discriminator.hpp"
#include "vague/embeddings.hpp"
#include "vague/errors.hpp"
#include "vague/gan_trainer.hpp"
#include "vague/generator.hpp"
#include "vague/metrics.hpp"
#include "vague/rng.hpp"
#include "vague/word_tagger.hpp"

namespace vague::cli {

namespace {

inline constexpr const char* kMajorityKind = "majority-classifier";

// ---------------------------------------------------------------- config ---

// Config files are flat JSON objects. Any listed key may appear; keys that
// duplicate a flag only apply when the flag was not given on the command line.
nlohmann::json load_config(const std::string& path, const std::set<std::string>& allowed) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open '" + path + "'");
    nlohmann::json cfg;
    try {
        in >> cfg;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config: '" + path + "' must hold a JSON object");
    for (const auto& [key, _] : cfg.items())
        if (allowed.count(key) == 0)
            throw UsageError("config: unknown key '" + key + "' for this command");
    return cfg;
}

template <class T>
T cfg_get(const nlohmann::json& cfg, const std::string& key, T fallback) {
    if (!cfg.contains(key)) return fallback;
    try {
        return cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError("config: key '" + key + "' has the wrong type");
    }
}

// flags win over config values, config values win over defaults
template <class T>
void config_override(const CLI::Option* opt, T& var, const nlohmann::json& cfg,
                     const std::string& key) {
    if (opt != nullptr && opt->count() > 0) return;
    var = cfg_get<T>(cfg, key, var);
}

// ------------------------------------------------------------------- io ---

void emit_json(const nlohmann::json& j, const std::string& path, std::ostream& out) {
    std::string text = j.dump(2) + "\n";
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open '" + path + "' for writing");
    file << text;
    if (!file) throw DataError("failed writing '" + path + "'");
}

std::vector<std::vector<std::string>>
token_strings(const std::vector<corpus::ConsolidatedSentence>& data) {
    std::vector<std::vector<std::string>> out;
    out.reserve(data.size());
    for (const corpus::ConsolidatedSentence& s : data) {
        std::vector<std::string> words;
        words.reserve(s.tokens.size());
        for (const corpus::Token& t : s.tokens) words.push_back(t.text);
        out.push_back(std::move(words));
    }
    return out;
}

// A consolidated JSONL line carries word_labels; a raw one does not.
bool looks_consolidated(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            return nlohmann::json::parse(line).contains("word_labels");
        } catch (const nlohmann::json::exception& e) {
            throw DataError("'" + path + "': bad JSONL line: " + e.what());
        }
    }
    throw DataError("'" + path + "' is empty");
}

std::vector<std::vector<std::string>> load_token_sentences(const std::string& path) {
    if (looks_consolidated(path)) return token_strings(corpus::load_consolidated(path));
    std::vector<std::vector<std::string>> out;
    for (const corpus::AnnotatedSentence& s : corpus::load_corpus(path)) {
        std::vector<std::string> words;
        words.reserve(s.tokens.size());
        for (const corpus::Token& t : s.tokens) words.push_back(t.text);
        out.push_back(std::move(words));
    }
    return out;
}

// Pretrained vectors when a file is given, random vectors otherwise.
embeddings::EmbeddingMatrix embeddings_for(const embeddings::Vocabulary& vocab,
                                           const std::string& path, std::size_t dim,
                                           std::uint64_t seed) {
    nn::Rng rng(seed);
    if (path.empty()) return embeddings::random_embeddings(vocab.size(), dim, rng);
    return embeddings::load_embeddings(path, vocab, rng);
}

// ------------------------------------------------------- shared training ---

word_tagger::TaggerConfig tagger_config(const nlohmann::json& cfg, std::uint64_t seed) {
    word_tagger::TaggerConfig t;
    t.hidden = cfg_get<std::size_t>(cfg, "hidden", t.hidden);
    t.lr = cfg_get<double>(cfg, "lr", t.lr);
    t.epochs = cfg_get<std::size_t>(cfg, "epochs", t.epochs);
    t.batch = cfg_get<std::size_t>(cfg, "batch", t.batch);
    t.pos_weight = cfg_get<double>(cfg, "pos_weight", t.pos_weight);
    t.val_fraction = cfg_get<double>(cfg, "val_fraction", t.val_fraction);
    t.seed = seed;
    return t;
}

Checkpoint train_word_model(const std::vector<corpus::ConsolidatedSentence>& train,
                            const std::string& mode, const std::string& emb_path,
                            const nlohmann::json& cfg, std::uint64_t seed) {
    auto vocab = embeddings::Vocabulary::build(token_strings(train),
                                               cfg_get<std::size_t>(cfg, "vocab_size", 10000));
    embeddings::EmbeddingMatrix emb =
        embeddings_for(vocab, emb_path, cfg_get<std::size_t>(cfg, "dim", 50), seed + 1);
    word_tagger::TaggerConfig tcfg = tagger_config(cfg, seed);
    if (mode == "context-aware")
        return word_tagger::train_bilstm_tagger(train, vocab, emb, tcfg);
    if (mode == "context-agnostic")
        return word_tagger::train_agnostic_classifier(train, vocab, emb, tcfg);
    throw UsageError("word model mode must be context-aware or context-agnostic, got '" +
                     mode + "'");
}

gan::GanConfig gan_config(const nlohmann::json& cfg, const std::string& mode, double tau,
                          std::uint64_t seed) {
    gan::GanConfig g;
    g.mode = mode;
    g.tau = tau;
    g.seed = seed;
    g.d_steps = cfg_get<std::size_t>(cfg, "d_steps", g.d_steps);
    g.g_steps = cfg_get<std::size_t>(cfg, "g_steps", g.g_steps);
    g.batch = cfg_get<std::size_t>(cfg, "batch", g.batch);
    g.d_lr = cfg_get<double>(cfg, "d_lr", g.d_lr);
    g.g_lr = cfg_get<double>(cfg, "g_lr", g.g_lr);
    g.epochs = cfg_get<std::size_t>(cfg, "epochs", g.epochs);
    g.val_fraction = cfg_get<double>(cfg, "val_fraction", g.val_fraction);
    g.patience = cfg_get<std::size_t>(cfg, "patience", g.patience);
    return g;
}

discriminator::Discriminator make_discriminator(const std::string& variant,
                                                const embeddings::EmbeddingMatrix& emb,
                                                const nlohmann::json& cfg,
                                                std::uint64_t seed) {
    discriminator::DiscriminatorConfig dcfg;
    dcfg.variant = variant;
    dcfg.filters = cfg_get<std::size_t>(cfg, "filters", dcfg.filters);
    dcfg.hidden = cfg_get<std::size_t>(cfg, "hidden", dcfg.hidden);
    nn::Rng rng(seed);
    return discriminator::Discriminator::init(variant, emb, dcfg, rng);
}

struct SentenceTrainResult {
    Checkpoint classifier;
    Checkpoint generator; // empty config when the mode has no generator
    nlohmann::json log;   // training log, or a small summary for majority
};

SentenceTrainResult train_sentence_model(const std::vector<corpus::ConsolidatedSentence>& train,
                                         const std::string& mode, const std::string& variant,
                                         const std::string& emb_path,
                                         const std::string& lexicon_path,
                                         const nlohmann::json& cfg, double tau,
                                         std::uint64_t seed) {
    SentenceTrainResult out;
    if (mode == "majority") {
        std::vector<corpus::VaguenessClass> classes;
        for (const corpus::ConsolidatedSentence& s : train) classes.push_back(s.cls);
        corpus::VaguenessClass modal = gan::majority_class(classes);
        out.classifier.config = {{"kind", kMajorityKind}, {"class", corpus::class_name(modal)}};
        out.log = {{"class", corpus::class_name(modal)}};
        return out;
    }

    auto vocab = embeddings::Vocabulary::build(token_strings(train),
                                               cfg_get<std::size_t>(cfg, "vocab_size", 10000));
    embeddings::EmbeddingMatrix emb =
        embeddings_for(vocab, emb_path, cfg_get<std::size_t>(cfg, "dim", 50), seed + 1);

    if (mode == "baseline-cnn" || mode == "baseline-lstm") {
        std::string body = mode.substr(std::string("baseline-").size());
        if (!variant.empty() && variant != body)
            throw UsageError("mode " + mode + " conflicts with --variant " + variant);
        discriminator::Discriminator disc = make_discriminator(body, emb, cfg, seed + 2);
        gan::BaselineResult res =
            gan::train_baseline(disc, train, vocab, gan_config(cfg, gan::kFullMode, tau, seed));
        out.classifier = std::move(res.checkpoint);
        out.log = res.log.to_json();
        return out;
    }

    if (mode != gan::kFullMode && mode != gan::kVaguenessOnlyMode)
        throw UsageError("sentence model mode must be one of full, vagueness-only, "
                         "baseline-cnn, baseline-lstm, majority; got '" + mode + "'");

    if (lexicon_path.empty())
        throw UsageError("adversarial modes need --lexicon for the vagueness bias");
    corpus::CueLexicon lexicon = corpus::CueLexicon::load(lexicon_path);

    generator::GeneratorConfig gcfg;
    gcfg.hidden = cfg_get<std::size_t>(cfg, "lm_hidden", gcfg.hidden);
    gcfg.max_len = cfg_get<std::size_t>(cfg, "max_len", gcfg.max_len);
    gcfg.lr = cfg_get<double>(cfg, "lm_lr", gcfg.lr);
    gcfg.epochs = cfg_get<std::size_t>(cfg, "lm_epochs", gcfg.epochs);
    gcfg.batch = cfg_get<std::size_t>(cfg, "lm_batch", gcfg.batch);
    gcfg.val_fraction = cfg_get<double>(cfg, "lm_val_fraction", gcfg.val_fraction);
    gcfg.seed = seed + 3;
    generator::PretrainResult lm =
        generator::pretrain_lm(token_strings(train), vocab, emb, gcfg);
    generator::LmGenerator gen = generator::generator_from_checkpoint(lm.checkpoint);
    generator::VaguenessBias bias = generator::VaguenessBias::init(vocab, lexicon);

    std::string body = variant.empty() ? discriminator::kCnnVariant : variant;
    discriminator::Discriminator disc = make_discriminator(body, emb, cfg, seed + 2);
    gan::GanResult res =
        gan::train_acgan(gen, bias, disc, train, vocab, gan_config(cfg, mode, tau, seed));
    out.classifier = std::move(res.discriminator);
    out.generator = std::move(res.generator);
    out.log = res.log.to_json();
    out.log["lm_heldout_perplexities"] = lm.heldout_perplexities;
    return out;
}

// ------------------------------------------------------------ prediction ---

int predict_sentence_class(const Checkpoint& ckpt,
                           const discriminator::Discriminator* disc,
                           const embeddings::Vocabulary* vocab,
                           const corpus::ConsolidatedSentence& s) {
    if (ckpt.kind() == kMajorityKind)
        return static_cast<int>(
            corpus::class_from_name(ckpt.config.at("class").get<std::string>()));
    std::vector<double> probs =
        discriminator::predict_class_probs(*disc, vocab->encode(s.tokens));
    std::size_t arg = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[arg]) arg = c;
    return static_cast<int>(arg);
}

bool is_word_kind(const std::string& kind) {
    return kind == word_tagger::kBilstmKind || kind == word_tagger::kAgnosticKind;
}

bool is_sentence_kind(const std::string& kind) {
    return kind == discriminator::kDiscriminatorKind || kind == kMajorityKind;
}

nlohmann::json eval_word_checkpoint(const Checkpoint& ckpt,
                                    const std::vector<corpus::ConsolidatedSentence>& data,
                                    double threshold) {
    std::vector<int> truth, pred;
    std::vector<double> scores;
    for (const corpus::ConsolidatedSentence& s : data) {
        std::vector<std::string> words;
        for (const corpus::Token& t : s.tokens) words.push_back(t.text);
        word_tagger::WordPrediction p =
            word_tagger::predict_word_labels(ckpt, words, threshold);
        truth.insert(truth.end(), s.word_labels.begin(), s.word_labels.end());
        pred.insert(pred.end(), p.labels.begin(), p.labels.end());
        scores.insert(scores.end(), p.probs.begin(), p.probs.end());
    }
    nlohmann::json out = {{"kind", ckpt.kind()},
                          {"word", metrics::binary_prf(truth, pred).to_json()}};
    bool has_pos = std::count(truth.begin(), truth.end(), 1) > 0;
    bool has_neg = std::count(truth.begin(), truth.end(), 0) > 0;
    if (has_pos && has_neg) out["roc_auc"] = metrics::roc_auc(truth, scores).auc;
    return out;
}

nlohmann::json eval_sentence_checkpoint(const Checkpoint& ckpt,
                                        const std::vector<corpus::ConsolidatedSentence>& data) {
    discriminator::Discriminator disc;
    embeddings::Vocabulary vocab;
    if (ckpt.kind() == discriminator::kDiscriminatorKind) {
        disc = discriminator::discriminator_from_checkpoint(ckpt);
        vocab = embeddings::vocab_from_json(ckpt.config.at("vocab"));
    }
    std::vector<int> truth, pred;
    for (const corpus::ConsolidatedSentence& s : data) {
        truth.push_back(static_cast<int>(s.cls));
        pred.push_back(predict_sentence_class(ckpt, &disc, &vocab, s));
    }
    return {{"kind", ckpt.kind()},
            {"sentence", metrics::weighted_prf(truth, pred).to_json()},
            {"confusion", metrics::confusion(truth, pred).to_json()}};
}

// ------------------------------------------------------------- commands ---

struct Flags {
    std::string in, out, config, model, variant, mode, cls, lexicon, pred, gold, text;
    std::vector<std::string> models; // tag accepts several checkpoints
    std::uint64_t seed = 1;
    std::size_t folds = 10;
    std::size_t n = 1;
    double tau = 0.5;

    // options of the parsed subcommand, resolved after parsing; nullptr when
    // the subcommand has no such flag
    const CLI::Option *seed_o = nullptr, *tau_o = nullptr, *variant_o = nullptr,
                      *mode_o = nullptr, *folds_o = nullptr, *n_o = nullptr, *cls_o = nullptr,
                      *lexicon_o = nullptr;

    void bind_options(const CLI::App& parsed) {
        seed_o = parsed.get_option_no_throw("--seed");
        tau_o = parsed.get_option_no_throw("--tau");
        variant_o = parsed.get_option_no_throw("--variant");
        mode_o = parsed.get_option_no_throw("--mode");
        folds_o = parsed.get_option_no_throw("--folds");
        n_o = parsed.get_option_no_throw("--n");
        cls_o = parsed.get_option_no_throw("--class");
        lexicon_o = parsed.get_option_no_throw("--lexicon");
    }
};

// Annotated fields default to empty on load, so a consolidated file would
// silently read as an unannotated corpus; reject it up front instead.
void require_annotated(const std::string& path) {
    if (looks_consolidated(path))
        throw DataError("'" + path + "' is already consolidated; expected an annotated corpus");
}

void cmd_consolidate(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, {"seed", "threshold", "lexicon"});
    std::string lexicon_path = f.lexicon;
    config_override(f.lexicon_o, lexicon_path, cfg, "lexicon");

    require_annotated(f.in);
    auto raw = corpus::load_corpus(f.in);
    std::size_t loaded = raw.size();
    if (!lexicon_path.empty())
        raw = corpus::filter_by_cues(raw, corpus::CueLexicon::load(lexicon_path));
    auto gold =
        corpus::consolidate_corpus(raw, cfg_get<std::size_t>(cfg, "threshold", 2));
    corpus::save_consolidated(f.out, gold);
    emit_json({{"sentences_in", loaded}, {"kept", raw.size()}, {"written", f.out}}, "", out);
}

void cmd_stats(const Flags& f, std::ostream& out) {
    load_config(f.config, {"seed"});
    require_annotated(f.in);
    emit_json(corpus::corpus_stats(corpus::load_corpus(f.in)).to_json(), f.out, out);
}

void cmd_split(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, {"seed", "folds", "val_fraction"});
    std::uint64_t seed = f.seed;
    std::size_t folds = f.folds;
    config_override(f.seed_o, seed, cfg, "seed");
    config_override(f.folds_o, folds, cfg, "folds");
    double val_fraction = cfg_get<double>(cfg, "val_fraction", 0.1);

    auto data = corpus::load_consolidated(f.in);
    auto splits = corpus::kfold_split(data.size(), folds, val_fraction, seed);
    nlohmann::json manifest = {{"folds", folds}, {"files", nlohmann::json::array()}};
    for (std::size_t k = 0; k < splits.size(); ++k) {
        const corpus::FoldSplit& fold = splits[k];
        for (const auto& [part, indices] :
             {std::pair<const char*, const std::vector<std::size_t>*>{"train", &fold.train},
              {"val", &fold.val},
              {"test", &fold.test}}) {
            std::vector<corpus::ConsolidatedSentence> subset;
            subset.reserve(indices->size());
            for (std::size_t i : *indices) subset.push_back(data[i]);
            std::string path = f.out + ".fold" + std::to_string(k) + "." + part + ".jsonl";
            corpus::save_consolidated(path, subset);
            manifest["files"].push_back({{"path", path}, {"sentences", subset.size()}});
        }
    }
    emit_json(manifest, "", out);
}

void cmd_train_embed(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, {"seed", "vocab_size", "dim", "window",
                                                "negatives", "epochs", "lr",
                                                "heldout_fraction"});
    std::uint64_t seed = f.seed;
    config_override(f.seed_o, seed, cfg, "seed");

    auto sentences = load_token_sentences(f.in);
    auto vocab = embeddings::Vocabulary::build(sentences,
                                               cfg_get<std::size_t>(cfg, "vocab_size", 10000));
    embeddings::SkipgramConfig scfg;
    scfg.dim = cfg_get<std::size_t>(cfg, "dim", scfg.dim);
    scfg.window = cfg_get<std::size_t>(cfg, "window", scfg.window);
    scfg.negatives = cfg_get<std::size_t>(cfg, "negatives", scfg.negatives);
    scfg.epochs = cfg_get<std::size_t>(cfg, "epochs", scfg.epochs);
    scfg.lr = cfg_get<double>(cfg, "lr", scfg.lr);
    scfg.heldout_fraction = cfg_get<double>(cfg, "heldout_fraction", scfg.heldout_fraction);
    scfg.seed = seed;
    embeddings::SkipgramResult res = embeddings::train_skipgram(sentences, vocab, scfg);
    embeddings::save_embeddings(f.out, vocab, res.embeddings);
    emit_json({{"written", f.out},
               {"vocab", vocab.size()},
               {"dim", res.embeddings.dim()},
               {"heldout_losses", res.heldout_losses}},
              "", out);
}

void cmd_train_word(const Flags& f, std::ostream& out) {
    nlohmann::json cfg =
        load_config(f.config, {"seed", "mode", "vocab_size", "dim", "hidden", "lr", "epochs",
                               "batch", "pos_weight", "val_fraction"});
    std::uint64_t seed = f.seed;
    std::string mode = f.mode.empty() ? "context-aware" : f.mode;
    config_override(f.seed_o, seed, cfg, "seed");
    config_override(f.mode_o, mode, cfg, "mode");

    auto data = corpus::load_consolidated(f.in);
    Checkpoint ckpt = train_word_model(data, mode, f.model, cfg, seed);
    ckpt.save(f.out);
    emit_json({{"written", f.out}, {"kind", ckpt.kind()}, {"sentences", data.size()}}, "", out);
}

const std::set<std::string>& sentence_config_keys() {
    static const std::set<std::string> keys = {
        "seed",    "mode",         "variant",  "tau",       "lexicon",  "vocab_size",
        "dim",     "epochs",       "batch",    "d_steps",   "g_steps",  "d_lr",
        "g_lr",    "val_fraction", "patience", "filters",   "hidden",   "lm_hidden",
        "lm_epochs", "lm_lr",      "lm_batch", "lm_val_fraction", "max_len", "generator_out"};
    return keys;
}

void cmd_train_sentence(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, sentence_config_keys());
    std::uint64_t seed = f.seed;
    std::string mode = f.mode.empty() ? gan::kFullMode : f.mode;
    std::string variant = f.variant;
    std::string lexicon_path = f.lexicon;
    double tau = f.tau;
    config_override(f.seed_o, seed, cfg, "seed");
    config_override(f.mode_o, mode, cfg, "mode");
    config_override(f.variant_o, variant, cfg, "variant");
    config_override(f.lexicon_o, lexicon_path, cfg, "lexicon");
    config_override(f.tau_o, tau, cfg, "tau");

    auto data = corpus::load_consolidated(f.in);
    SentenceTrainResult res =
        train_sentence_model(data, mode, variant, f.model, lexicon_path, cfg, tau, seed);
    res.classifier.save(f.out);
    // The per-step loss list dwarfs everything else; report its length only.
    if (res.log.contains("steps") && res.log["steps"].is_array())
        res.log["steps"] = res.log["steps"].size();
    nlohmann::json report = {{"written", f.out},
                             {"kind", res.classifier.kind()},
                             {"mode", mode},
                             {"log", res.log}};
    std::string generator_out = cfg_get<std::string>(cfg, "generator_out", "");
    if (!generator_out.empty()) {
        if (res.generator.config.empty())
            throw UsageError("generator_out is only available for adversarial modes");
        res.generator.save(generator_out);
        report["generator_written"] = generator_out;
    }
    emit_json(report, "", out);
}

void eval_pred_files(const Flags& f, std::ostream& out) {
    auto gold = corpus::load_consolidated(f.gold);
    auto pred = corpus::load_consolidated(f.pred);
    if (gold.size() != pred.size())
        throw DataError("eval: gold has " + std::to_string(gold.size()) +
                        " sentences but predictions have " + std::to_string(pred.size()));
    std::vector<int> truth_cls, pred_cls, truth_words, pred_words;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!gold[i].id.empty() && !pred[i].id.empty() && gold[i].id != pred[i].id)
            throw DataError("eval: sentence " + std::to_string(i) + " id mismatch: '" +
                            gold[i].id + "' vs '" + pred[i].id + "'");
        truth_cls.push_back(static_cast<int>(gold[i].cls));
        pred_cls.push_back(static_cast<int>(pred[i].cls));
        if (gold[i].word_labels.size() != pred[i].word_labels.size())
            throw DataError("eval: sentence " + std::to_string(i) +
                            " token counts differ between gold and predictions");
        truth_words.insert(truth_words.end(), gold[i].word_labels.begin(),
                           gold[i].word_labels.end());
        pred_words.insert(pred_words.end(), pred[i].word_labels.begin(),
                          pred[i].word_labels.end());
    }
    emit_json({{"sentence", metrics::weighted_prf(truth_cls, pred_cls).to_json()},
               {"confusion", metrics::confusion(truth_cls, pred_cls).to_json()},
               {"word", metrics::binary_prf(truth_words, pred_words).to_json()}},
              f.out, out);
}

void eval_checkpoint(const Flags& f, const nlohmann::json& cfg, std::ostream& out) {
    Checkpoint ckpt = Checkpoint::load(f.model);
    auto data = corpus::load_consolidated(f.in);
    if (data.empty()) throw DataError("eval: no sentences in '" + f.in + "'");
    if (is_word_kind(ckpt.kind()))
        emit_json(eval_word_checkpoint(ckpt, data, cfg_get<double>(cfg, "threshold", 0.5)),
                  f.out, out);
    else if (is_sentence_kind(ckpt.kind()))
        emit_json(eval_sentence_checkpoint(ckpt, data), f.out, out);
    else
        throw UsageError("eval: cannot score a checkpoint of kind '" + ckpt.kind() + "'");
}

void eval_folds(const Flags& f, const nlohmann::json& cfg, std::ostream& out) {
    std::uint64_t seed = f.seed;
    std::size_t folds = f.folds;
    std::string mode = f.mode;
    std::string variant = f.variant;
    std::string lexicon_path = f.lexicon;
    double tau = f.tau;
    config_override(f.seed_o, seed, cfg, "seed");
    config_override(f.mode_o, mode, cfg, "mode");
    config_override(f.variant_o, variant, cfg, "variant");
    config_override(f.lexicon_o, lexicon_path, cfg, "lexicon");
    config_override(f.tau_o, tau, cfg, "tau");
    if (mode.empty()) throw UsageError("eval --folds needs --mode");

    auto data = corpus::load_consolidated(f.in);
    double val_fraction = cfg_get<double>(cfg, "val_fraction", 0.1);
    auto splits = corpus::kfold_split(data.size(), folds, 0.0, seed);

    bool word_mode = mode == "context-aware" || mode == "context-agnostic";
    std::vector<metrics::PrfReport> sentence_reports;
    nlohmann::json per_fold = nlohmann::json::array();
    metrics::ConfusionMatrix total_confusion;
    double word_p = 0.0, word_r = 0.0, word_f = 0.0;

    for (std::size_t k = 0; k < splits.size(); ++k) {
        // the trainers carve their own validation split out of this
        std::vector<corpus::ConsolidatedSentence> train, test;
        for (std::size_t i : splits[k].train) train.push_back(data[i]);
        for (std::size_t i : splits[k].test) test.push_back(data[i]);
        std::uint64_t fold_seed = seed + 17 * (k + 1);
        nlohmann::json fold_cfg = cfg;
        fold_cfg["val_fraction"] = val_fraction;

        if (word_mode) {
            Checkpoint ckpt = train_word_model(train, mode, f.model, fold_cfg, fold_seed);
            nlohmann::json scores =
                eval_word_checkpoint(ckpt, test, cfg_get<double>(cfg, "threshold", 0.5));
            word_p += scores["word"]["precision"].get<double>();
            word_r += scores["word"]["recall"].get<double>();
            word_f += scores["word"]["f1"].get<double>();
            scores["fold"] = k;
            per_fold.push_back(scores);
            continue;
        }

        SentenceTrainResult res = train_sentence_model(train, mode, variant, f.model,
                                                       lexicon_path, fold_cfg, tau, fold_seed);
        discriminator::Discriminator disc;
        embeddings::Vocabulary vocab;
        if (res.classifier.kind() == discriminator::kDiscriminatorKind) {
            disc = discriminator::discriminator_from_checkpoint(res.classifier);
            vocab = embeddings::vocab_from_json(res.classifier.config.at("vocab"));
        }
        std::vector<int> truth, pred;
        for (const corpus::ConsolidatedSentence& s : test) {
            truth.push_back(static_cast<int>(s.cls));
            pred.push_back(predict_sentence_class(res.classifier, &disc, &vocab, s));
        }
        metrics::PrfReport report = metrics::weighted_prf(truth, pred);
        sentence_reports.push_back(report);
        metrics::ConfusionMatrix cm = metrics::confusion(truth, pred);
        for (std::size_t a = 0; a < corpus::kNumClasses; ++a)
            for (std::size_t b = 0; b < corpus::kNumClasses; ++b)
                total_confusion.counts[a][b] += cm.counts[a][b];
        per_fold.push_back({{"fold", k}, {"sentence", report.to_json()}});
    }

    nlohmann::json result = {{"folds", folds}, {"mode", mode}, {"per_fold", per_fold}};
    if (word_mode) {
        double n = double(splits.size());
        result["aggregate"] = {{"precision", word_p / n},
                               {"recall", word_r / n},
                               {"f1", word_f / n}};
    } else {
        result["aggregate"] = metrics::mean_reports(sentence_reports).to_json();
        result["confusion"] = total_confusion.to_json();
    }
    emit_json(result, f.out, out);
}

void cmd_eval(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, [] {
        std::set<std::string> keys = sentence_config_keys();
        keys.insert("folds");
        keys.insert("threshold");
        keys.insert("pos_weight");
        keys.insert("lr");
        return keys;
    }());
    bool pred_given = !f.pred.empty() || !f.gold.empty();
    if (pred_given) {
        if (f.pred.empty() || f.gold.empty())
            throw UsageError("eval needs both --pred and --gold to compare files");
        eval_pred_files(f, out);
        return;
    }
    if (f.in.empty()) throw UsageError("eval needs --in (or --pred/--gold)");
    bool folds_given = (f.folds_o != nullptr && f.folds_o->count() > 0) || cfg.contains("folds");
    if (folds_given) {
        eval_folds(f, cfg, out);
        return;
    }
    if (f.model.empty())
        throw UsageError("eval needs --model, --folds with --mode, or --pred/--gold");
    eval_checkpoint(f, cfg, out);
}

void cmd_generate(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, {"seed", "tau", "n", "class"});
    std::uint64_t seed = f.seed;
    double tau = f.tau;
    std::size_t n = f.n;
    std::string cls = f.cls;
    config_override(f.seed_o, seed, cfg, "seed");
    config_override(f.tau_o, tau, cfg, "tau");
    config_override(f.n_o, n, cfg, "n");
    config_override(f.cls_o, cls, cfg, "class");

    Checkpoint ckpt = Checkpoint::load(f.model);
    if (ckpt.kind() != generator::kGeneratorKind)
        throw UsageError("generate needs a generator checkpoint, got kind '" + ckpt.kind() +
                         "'");
    generator::LmGenerator gen = generator::generator_from_checkpoint(ckpt);
    embeddings::Vocabulary vocab = embeddings::vocab_from_json(ckpt.config.at("vocab"));
    generator::VaguenessBias bias = generator::checkpoint_has_bias(ckpt)
                                        ? generator::bias_from_checkpoint(ckpt)
                                        : generator::VaguenessBias::zeros(vocab.size());

    std::optional<corpus::VaguenessClass> requested;
    if (!cls.empty()) {
        try {
            requested = corpus::class_from_name(cls);
        } catch (const DataError& e) {
            throw UsageError(e.what()); // a bad flag value is a usage problem
        }
    }
    std::vector<corpus::VaguenessClass> classes;
    for (std::size_t i = 0; i < n; ++i)
        classes.push_back(requested ? *requested
                                    : static_cast<corpus::VaguenessClass>(i % corpus::kNumClasses));
    nn::Rng rng(seed);
    auto sentences = generator::generate_batch(gen, bias, classes, tau, rng);

    std::ostringstream lines;
    for (const generator::GeneratedSentence& s : sentences) {
        nlohmann::json rec = {{"class", corpus::class_name(s.cls)},
                              {"tokens", nlohmann::json::array()}};
        for (std::size_t id : s.hard_tokens)
            if (id != embeddings::kEosId) rec["tokens"].push_back(vocab.token(id));
        lines << rec.dump() << "\n";
    }
    if (f.out.empty()) {
        out << lines.str();
        return;
    }
    std::ofstream file(f.out, std::ios::binary);
    if (!file) throw DataError("cannot open '" + f.out + "' for writing");
    file << lines.str();
}

void cmd_tag(const Flags& f, std::ostream& out) {
    nlohmann::json cfg = load_config(f.config, {"seed", "threshold"});
    double threshold = cfg_get<double>(cfg, "threshold", 0.5);
    if (f.text.empty() == f.in.empty())
        throw UsageError("tag needs exactly one of --text or --in");

    const Checkpoint* word_ckpt = nullptr;
    const Checkpoint* sentence_ckpt = nullptr;
    std::vector<Checkpoint> loaded;
    loaded.reserve(f.models.size());
    for (const std::string& path : f.models) loaded.push_back(Checkpoint::load(path));
    for (const Checkpoint& ckpt : loaded) {
        if (is_word_kind(ckpt.kind())) {
            if (word_ckpt) throw UsageError("tag: more than one word model given");
            word_ckpt = &ckpt;
        } else if (is_sentence_kind(ckpt.kind())) {
            if (sentence_ckpt) throw UsageError("tag: more than one sentence model given");
            sentence_ckpt = &ckpt;
        } else {
            throw UsageError("tag cannot use a checkpoint of kind '" + ckpt.kind() + "'");
        }
    }

    std::vector<std::string> texts;
    if (!f.text.empty()) {
        texts.push_back(f.text);
    } else {
        std::ifstream in(f.in);
        if (!in) throw DataError("cannot open '" + f.in + "'");
        std::string line;
        while (std::getline(in, line))
            if (line.find_first_not_of(" \t\r") != std::string::npos) texts.push_back(line);
    }

    discriminator::Discriminator disc;
    embeddings::Vocabulary sentence_vocab;
    if (sentence_ckpt && sentence_ckpt->kind() == discriminator::kDiscriminatorKind) {
        disc = discriminator::discriminator_from_checkpoint(*sentence_ckpt);
        sentence_vocab = embeddings::vocab_from_json(sentence_ckpt->config.at("vocab"));
    }

    nlohmann::json report = {{"sentences", nlohmann::json::array()}};
    for (const std::string& text : texts) {
        std::vector<corpus::Token> tokens = corpus::tokenize(text);
        if (tokens.empty()) continue;
        std::vector<std::string> words;
        for (const corpus::Token& t : tokens) words.push_back(t.text);
        nlohmann::json entry = {{"tokens", words}};
        if (word_ckpt) {
            word_tagger::WordPrediction p =
                word_tagger::predict_word_labels(*word_ckpt, words, threshold);
            entry["word"] = p.to_json(words);
        }
        if (sentence_ckpt) {
            if (sentence_ckpt->kind() == kMajorityKind) {
                std::string name = sentence_ckpt->config.at("class").get<std::string>();
                nlohmann::json probs;
                for (std::size_t c = 0; c < corpus::kNumClasses; ++c) {
                    const char* cn = corpus::class_name(static_cast<corpus::VaguenessClass>(c));
                    probs[cn] = cn == name ? 1.0 : 0.0;
                }
                entry["sentence"] = {{"class", name}, {"probs", probs}};
            } else {
                std::vector<double> p = discriminator::predict_class_probs(
                    disc, sentence_vocab.encode(tokens));
                nlohmann::json probs;
                std::size_t arg = 0;
                for (std::size_t c = 0; c < corpus::kNumClasses; ++c) {
                    probs[corpus::class_name(static_cast<corpus::VaguenessClass>(c))] = p[c];
                    if (p[c] > p[arg]) arg = c;
                }
                entry["sentence"] = {
                    {"class", corpus::class_name(static_cast<corpus::VaguenessClass>(arg))},
                    {"probs", probs}};
            }
        }
        report["sentences"].push_back(entry);
    }
    emit_json(report, f.out, out);
}

} // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"vague word and sentence analysis for privacy-policy text"};
    app.require_subcommand(1);
    Flags f;
    std::string chosen;

    auto common = [&](CLI::App* sc) {
        sc->add_option("--config", f.config, "JSON file of defaults; flags win");
        sc->add_option("--seed", f.seed, "master random seed");
        sc->callback([&chosen, sc] { chosen = sc->get_name(); });
        return sc;
    };

    CLI::App* sc = common(app.add_subcommand(
        "consolidate", "merge annotator selections and scores into gold labels"));
    sc->add_option("--in", f.in, "annotated corpus JSONL")->required();
    sc->add_option("--out", f.out, "consolidated output JSONL")->required();
    sc->add_option("--lexicon", f.lexicon, "cue lexicon to pre-filter sentences");

    sc = common(app.add_subcommand("stats", "annotation agreement and distribution report"));
    sc->add_option("--in", f.in, "annotated corpus JSONL")->required();
    sc->add_option("--out", f.out, "report path (stdout when omitted)");

    sc = common(app.add_subcommand("split", "write shuffled cross-validation folds"));
    sc->add_option("--in", f.in, "consolidated corpus JSONL")->required();
    sc->add_option("--out", f.out, "output path prefix")->required();
    sc->add_option("--folds", f.folds, "number of folds");

    sc = common(app.add_subcommand("train-embed", "train skip-gram embeddings"));
    sc->add_option("--in", f.in, "corpus JSONL (annotated or consolidated)")->required();
    sc->add_option("--out", f.out, "embedding text file to write")->required();

    sc = common(app.add_subcommand("train-word", "train a vague-word classifier"));
    sc->add_option("--in", f.in, "consolidated corpus JSONL")->required();
    sc->add_option("--out", f.out, "checkpoint to write")->required();
    sc->add_option("--model", f.model, "pretrained embedding text file");
    sc->add_option("--mode", f.mode, "context-aware or context-agnostic");

    sc = common(app.add_subcommand("train-sentence", "train a sentence vagueness classifier"));
    sc->add_option("--in", f.in, "consolidated corpus JSONL")->required();
    sc->add_option("--out", f.out, "checkpoint to write")->required();
    sc->add_option("--model", f.model, "pretrained embedding text file");
    sc->add_option("--mode", f.mode,
                   "full, vagueness-only, baseline-cnn, baseline-lstm, or majority");
    sc->add_option("--variant", f.variant, "discriminator body: cnn or lstm");
    sc->add_option("--tau", f.tau, "sampling temperature");
    sc->add_option("--lexicon", f.lexicon, "cue lexicon for the vagueness bias");

    sc = common(app.add_subcommand("eval", "score predictions, checkpoints, or folds"));
    sc->add_option("--in", f.in, "consolidated corpus JSONL");
    sc->add_option("--out", f.out, "report path (stdout when omitted)");
    sc->add_option("--model", f.model, "checkpoint to score, or embeddings for --folds");
    sc->add_option("--pred", f.pred, "predictions JSONL to compare against --gold");
    sc->add_option("--gold", f.gold, "gold JSONL for --pred");
    sc->add_option("--folds", f.folds, "cross-validate with this many folds");
    sc->add_option("--mode", f.mode, "model family to train per fold");
    sc->add_option("--variant", f.variant, "discriminator body: cnn or lstm");
    sc->add_option("--tau", f.tau, "sampling temperature");
    sc->add_option("--lexicon", f.lexicon, "cue lexicon for adversarial modes");

    sc = common(app.add_subcommand("generate", "sample sentences from a trained generator"));
    sc->add_option("--model", f.model, "generator checkpoint")->required();
    sc->add_option("--out", f.out, "JSONL output (stdout when omitted)");
    sc->add_option("--n", f.n, "number of sentences");
    sc->add_option("--class", f.cls,
                   "clear, somewhat-clear, vague, or extremely-vague; "
                   "cycles through all four when omitted");
    sc->add_option("--tau", f.tau, "sampling temperature");

    sc = common(app.add_subcommand("tag", "annotate raw text with word and sentence vagueness"));
    sc->add_option("--model", f.models, "checkpoint(s): word and/or sentence model")
        ->required();
    sc->add_option("--text", f.text, "one sentence to analyze");
    sc->add_option("--in", f.in, "text file, one sentence per line");
    sc->add_option("--out", f.out, "report path (stdout when omitted)");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    f.bind_options(*app.get_subcommands().front());

    try {
        if (chosen == "consolidate") cmd_consolidate(f, out);
        else if (chosen == "stats") cmd_stats(f, out);
        else if (chosen == "split") cmd_split(f, out);
        else if (chosen == "train-embed") cmd_train_embed(f, out);
        else if (chosen == "train-word") cmd_train_word(f, out);
        else if (chosen == "train-sentence") cmd_train_sentence(f, out);
        else if (chosen == "eval") cmd_eval(f, out);
        else if (chosen == "generate") cmd_generate(f, out);
        else if (chosen == "tag") cmd_tag(f, out);
        return 0;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace vague::cli
