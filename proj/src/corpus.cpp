#include "vague/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "vague/rng.hpp"

namespace vague::corpus {

namespace {

bool is_ascii_punct(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void line_error(const std::string& path, std::size_t line_no,
                             const std::string& what) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
}

void validate_sentence(const AnnotatedSentence& s, const std::string& path,
                       std::size_t line_no) {
    if (s.tokens.empty()) line_error(path, line_no, "sentence has no tokens");
    for (const Token& t : s.tokens) {
        if (t.text.empty()) line_error(path, line_no, "empty token");
        for (char c : t.text)
            if (std::isspace(static_cast<unsigned char>(c)))
                line_error(path, line_no, "token '" + t.text + "' contains whitespace");
    }
    std::set<std::pair<std::string, std::pair<std::size_t, std::size_t>>> seen;
    for (const WordSelection& w : s.word_selections) {
        if (w.end <= w.start || w.end > s.tokens.size())
            line_error(path, line_no,
                       "span [" + std::to_string(w.start) + ", " + std::to_string(w.end) +
                           ") out of bounds for " + std::to_string(s.tokens.size()) +
                           " tokens");
        if (w.end - w.start > 5)
            line_error(path, line_no, "span longer than five tokens");
        if (!seen.insert({w.annotator, {w.start, w.end}}).second)
            line_error(path, line_no,
                       "duplicate span for annotator '" + w.annotator + "'");
    }
    for (const SentenceScore& sc : s.scores)
        if (!(sc.score >= 1.0 && sc.score <= 5.0))
            line_error(path, line_no,
                       "score " + std::to_string(sc.score) + " outside [1, 5]");
}

} // namespace

const char* class_name(VaguenessClass c) {
    switch (c) {
        case VaguenessClass::Clear: return "clear";
        case VaguenessClass::SomewhatClear: return "somewhat-clear";
        case VaguenessClass::Vague: return "vague";
        case VaguenessClass::ExtremelyVague: return "extremely-vague";
    }
    throw UsageError("class_name: bad class value");
}

VaguenessClass class_from_name(const std::string& name) {
    if (name == "clear") return VaguenessClass::Clear;
    if (name == "somewhat-clear") return VaguenessClass::SomewhatClear;
    if (name == "vague") return VaguenessClass::Vague;
    if (name == "extremely-vague") return VaguenessClass::ExtremelyVague;
    throw DataError("unknown vagueness class '" + name + "'");
}

VaguenessClass class_of_score(double mean_score) {
    if (!(mean_score >= 1.0 && mean_score <= 5.0))
        throw DataError("mean score " + std::to_string(mean_score) + " outside [1, 5]");
    if (mean_score < 2.0) return VaguenessClass::Clear;
    if (mean_score < 3.0) return VaguenessClass::SomewhatClear;
    if (mean_score < 4.0) return VaguenessClass::Vague;
    return VaguenessClass::ExtremelyVague;
}

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

CueLexicon CueLexicon::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cue lexicon: cannot open '" + path + "'");
    CueLexicon lex;
    std::string line;
    while (std::getline(is, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        lex.terms.insert(lowercase(t));
    }
    return lex;
}

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    auto push = [&out](const std::string& t) { out.push_back({t, out.size()}); };
    std::istringstream is(text);
    std::string chunk;
    while (is >> chunk) {
        std::size_t b = 0, e = chunk.size();
        while (b < e && is_ascii_punct(chunk[b])) ++b;
        while (e > b && is_ascii_punct(chunk[e - 1])) --e;
        for (std::size_t i = 0; i < b; ++i) push(std::string(1, chunk[i]));
        if (e > b) push(chunk.substr(b, e - b));
        for (std::size_t i = e; i < chunk.size(); ++i) push(std::string(1, chunk[i]));
    }
    return out;
}

std::vector<AnnotatedSentence> load_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("corpus: cannot open '" + path + "'");
    std::vector<AnnotatedSentence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            line_error(path, line_no, std::string("bad JSON: ") + e.what());
        }
        AnnotatedSentence s;
        try {
            s.id = j.at("id").get<std::string>();
            std::size_t idx = 0;
            for (const auto& t : j.at("tokens"))
                s.tokens.push_back({t.get<std::string>(), idx++});
            for (const auto& w : j.value("word_selections", nlohmann::json::array()))
                s.word_selections.push_back({w.at("annotator").get<std::string>(),
                                             w.at("start").get<std::size_t>(),
                                             w.at("end").get<std::size_t>()});
            for (const auto& sc : j.value("scores", nlohmann::json::array()))
                s.scores.push_back({sc.at("annotator").get<std::string>(),
                                    sc.at("score").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            line_error(path, line_no, std::string("bad record: ") + e.what());
        }
        validate_sentence(s, path, line_no);
        out.push_back(std::move(s));
    }
    return out;
}

void save_corpus(const std::string& path, const std::vector<AnnotatedSentence>& sentences) {
    std::ofstream os(path);
    if (!os) throw DataError("corpus: cannot open '" + path + "' for writing");
    for (const AnnotatedSentence& s : sentences) {
        nlohmann::json j;
        j["id"] = s.id;
        auto toks = nlohmann::json::array();
        for (const Token& t : s.tokens) toks.push_back(t.text);
        j["tokens"] = toks;
        auto sel = nlohmann::json::array();
        for (const WordSelection& w : s.word_selections)
            sel.push_back({{"annotator", w.annotator}, {"start", w.start}, {"end", w.end}});
        j["word_selections"] = sel;
        auto sc = nlohmann::json::array();
        for (const SentenceScore& x : s.scores)
            sc.push_back({{"annotator", x.annotator}, {"score", x.score}});
        j["scores"] = sc;
        os << j.dump() << '\n';
    }
    if (!os) throw DataError("corpus: write to '" + path + "' failed");
}

std::vector<ConsolidatedSentence> load_consolidated(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("corpus: cannot open '" + path + "'");
    std::vector<ConsolidatedSentence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            ConsolidatedSentence s;
            s.id = j.at("id").get<std::string>();
            std::size_t idx = 0;
            for (const auto& t : j.at("tokens"))
                s.tokens.push_back({t.get<std::string>(), idx++});
            s.word_labels = j.at("word_labels").get<std::vector<int>>();
            s.mean_score = j.at("mean_score").get<double>();
            s.cls = class_from_name(j.at("class").get<std::string>());
            if (s.word_labels.size() != s.tokens.size())
                line_error(path, line_no, "word_labels length differs from tokens");
            for (int l : s.word_labels)
                if (l != 0 && l != 1) line_error(path, line_no, "word label not in {0, 1}");
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            line_error(path, line_no, std::string("bad record: ") + e.what());
        }
    }
    return out;
}

void save_consolidated(const std::string& path,
                       const std::vector<ConsolidatedSentence>& sentences) {
    std::ofstream os(path);
    if (!os) throw DataError("corpus: cannot open '" + path + "' for writing");
    for (const ConsolidatedSentence& s : sentences) {
        nlohmann::json j;
        j["id"] = s.id;
        auto toks = nlohmann::json::array();
        for (const Token& t : s.tokens) toks.push_back(t.text);
        j["tokens"] = toks;
        j["word_labels"] = s.word_labels;
        j["mean_score"] = s.mean_score;
        j["class"] = class_name(s.cls);
        os << j.dump() << '\n';
    }
    if (!os) throw DataError("corpus: write to '" + path + "' failed");
}

std::vector<AnnotatedSentence> filter_by_cues(const std::vector<AnnotatedSentence>& sentences,
                                              const CueLexicon& lexicon) {
    std::vector<AnnotatedSentence> out;
    for (const AnnotatedSentence& s : sentences)
        for (const Token& t : s.tokens)
            if (lexicon.contains(lowercase(t.text))) {
                out.push_back(s);
                break;
            }
    return out;
}

std::vector<int> consolidate_word_labels(const AnnotatedSentence& s, std::size_t threshold) {
    if (threshold == 0) throw UsageError("consolidate: threshold must be positive");
    std::vector<std::set<std::string>> covering(s.tokens.size());
    for (const WordSelection& w : s.word_selections)
        for (std::size_t i = w.start; i < w.end; ++i) covering[i].insert(w.annotator);
    std::vector<int> labels(s.tokens.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = covering[i].size() >= threshold ? 1 : 0;
    return labels;
}

ConsolidatedSentence consolidate(const AnnotatedSentence& s, std::size_t threshold) {
    if (s.scores.empty())
        throw DataError("consolidate: sentence '" + s.id + "' has no scores");
    ConsolidatedSentence out;
    out.id = s.id;
    out.tokens = s.tokens;
    out.word_labels = consolidate_word_labels(s, threshold);
    double sum = 0;
    for (const SentenceScore& sc : s.scores) sum += sc.score;
    out.mean_score = sum / static_cast<double>(s.scores.size());
    out.cls = class_of_score(out.mean_score);
    return out;
}

std::vector<ConsolidatedSentence> consolidate_corpus(const std::vector<AnnotatedSentence>& corpus,
                                                     std::size_t threshold) {
    std::vector<ConsolidatedSentence> out;
    out.reserve(corpus.size());
    for (const AnnotatedSentence& s : corpus) out.push_back(consolidate(s, threshold));
    return out;
}

StatsReport corpus_stats(const std::vector<AnnotatedSentence>& corpus) {
    if (corpus.empty()) throw DataError("corpus_stats: empty corpus");
    StatsReport r;
    r.n_sentences = corpus.size();

    std::size_t scored = 0, agree3 = 0, agree4 = 0;
    std::map<VaguenessClass, std::size_t> class_counts;
    for (const AnnotatedSentence& s : corpus) {
        if (s.scores.empty()) continue;
        ++scored;
        std::array<std::size_t, kNumClasses> votes{};
        double sum = 0;
        for (const SentenceScore& sc : s.scores) {
            ++votes[static_cast<std::size_t>(class_of_score(sc.score))];
            sum += sc.score;
        }
        std::size_t top = *std::max_element(votes.begin(), votes.end());
        if (top >= 3) ++agree3;
        if (top >= 4) ++agree4;
        ++class_counts[class_of_score(sum / static_cast<double>(s.scores.size()))];
    }
    if (scored > 0) {
        r.sentence_agreement_ge3 = 100.0 * static_cast<double>(agree3) / scored;
        r.sentence_agreement_ge4 = 100.0 * static_cast<double>(agree4) / scored;
        for (const auto& [cls, count] : class_counts)
            r.class_distribution[class_name(cls)] =
                static_cast<double>(count) / static_cast<double>(scored);
    }

    std::size_t vague2 = 0, vague3 = 0, vague4 = 0;
    std::map<std::string, std::size_t> terms;
    std::map<std::size_t, std::size_t> histogram;
    for (const AnnotatedSentence& s : corpus) {
        std::vector<std::set<std::string>> covering(s.tokens.size());
        for (const WordSelection& w : s.word_selections)
            for (std::size_t i = w.start; i < w.end; ++i) covering[i].insert(w.annotator);
        std::size_t vague_count = 0;
        for (const auto& c : covering) {
            if (c.size() >= 2) {
                ++vague2;
                ++vague_count;
            }
            if (c.size() >= 3) ++vague3;
            if (c.size() >= 4) ++vague4;
        }
        ++histogram[vague_count];

        // exact spans chosen by at least two distinct annotators
        std::map<std::pair<std::size_t, std::size_t>, std::set<std::string>> span_votes;
        for (const WordSelection& w : s.word_selections)
            span_votes[{w.start, w.end}].insert(w.annotator);
        for (const auto& [span, annotators] : span_votes) {
            if (annotators.size() < 2) continue;
            std::string term;
            for (std::size_t i = span.first; i < span.second; ++i) {
                if (!term.empty()) term += ' ';
                term += lowercase(s.tokens[i].text);
            }
            ++terms[term];
        }
    }
    if (vague2 > 0) {
        r.word_agreement_ge3 = 100.0 * static_cast<double>(vague3) / vague2;
        r.word_agreement_ge4 = 100.0 * static_cast<double>(vague4) / vague2;
    }
    r.term_frequencies.assign(terms.begin(), terms.end());
    std::sort(r.term_frequencies.begin(), r.term_frequencies.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
              });
    r.vague_word_count_histogram.assign(histogram.begin(), histogram.end());
    return r;
}

nlohmann::json StatsReport::to_json() const {
    nlohmann::json j;
    j["n_sentences"] = n_sentences;
    j["sentence_agreement_ge3"] = sentence_agreement_ge3;
    j["sentence_agreement_ge4"] = sentence_agreement_ge4;
    j["word_agreement_ge3"] = word_agreement_ge3;
    j["word_agreement_ge4"] = word_agreement_ge4;
    auto tf = nlohmann::json::array();
    for (const auto& [term, count] : term_frequencies) tf.push_back({term, count});
    j["term_frequencies"] = tf;
    j["class_distribution"] = class_distribution;
    auto hist = nlohmann::json::array();
    for (const auto& [count, n] : vague_word_count_histogram) hist.push_back({count, n});
    j["vague_word_count_histogram"] = hist;
    return j;
}

std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t k, double val_fraction,
                                   std::uint64_t seed) {
    if (k < 2) throw UsageError("kfold_split: k must be at least 2");
    if (n < k)
        throw DataError("kfold_split: corpus of " + std::to_string(n) +
                        " is smaller than k = " + std::to_string(k));
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw UsageError("kfold_split: val_fraction must be in [0, 1)");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    nn::Rng rng(seed);
    rng.shuffle(order);

    // chunk sizes n/k with the remainder spread over the first chunks
    std::vector<FoldSplit> folds(k);
    std::size_t base = n / k, rem = n % k, pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t len = base + (f < rem ? 1 : 0);
        std::vector<std::size_t> test(order.begin() + pos, order.begin() + pos + len);
        std::vector<std::size_t> rest;
        rest.reserve(n - len);
        rest.insert(rest.end(), order.begin(), order.begin() + pos);
        rest.insert(rest.end(), order.begin() + pos + len, order.end());
        pos += len;

        nn::Rng fold_rng = rng.split(f + 1);
        fold_rng.shuffle(rest);
        std::size_t n_val = static_cast<std::size_t>(val_fraction * rest.size());
        FoldSplit& fs = folds[f];
        fs.test = std::move(test);
        fs.val.assign(rest.begin(), rest.begin() + n_val);
        fs.train.assign(rest.begin() + n_val, rest.end());
        std::sort(fs.test.begin(), fs.test.end());
        std::sort(fs.val.begin(), fs.val.end());
        std::sort(fs.train.begin(), fs.train.end());
    }
    return folds;
}

} // namespace vague::corpus
