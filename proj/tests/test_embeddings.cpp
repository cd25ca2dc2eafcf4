#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "vague/embeddings.hpp"
#include "vague/errors.hpp"

using namespace vague;
using embeddings::EmbeddingMatrix;
using embeddings::SkipgramConfig;
using embeddings::Vocabulary;

namespace {

std::vector<std::vector<std::string>> toy_corpus() {
    // "alpha" and "beta" share every context; the mineral words never
    // co-occur with them.
    std::vector<std::vector<std::string>> sents;
    for (int i = 0; i < 120; ++i) {
        sents.push_back({"the", "alpha", "runs", "very", "fast"});
        sents.push_back({"the", "beta", "runs", "very", "fast"});
        sents.push_back({"a", "alpha", "jumps", "quite", "high"});
        sents.push_back({"a", "beta", "jumps", "quite", "high"});
        sents.push_back({"rock", "stone", "cliff", "gravel", "slate"});
    }
    return sents;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/") + name;
}

} // namespace

TEST_CASE("vocabulary reserves special ids and orders by frequency") {
    std::vector<std::vector<std::string>> sents = {
        {"Apple", "banana", "apple"},
        {"cherry", "apple", "banana"},
    };
    Vocabulary v = Vocabulary::build(sents);
    CHECK(v.token(embeddings::kPadId) == embeddings::kPadToken);
    CHECK(v.token(embeddings::kUnkId) == embeddings::kUnkToken);
    CHECK(v.token(embeddings::kEosId) == embeddings::kEosToken);
    // apple x3, banana x2, cherry x1
    CHECK(v.token(3) == "apple");
    CHECK(v.token(4) == "banana");
    CHECK(v.token(5) == "cherry");
    CHECK(v.size() == 6);

    CHECK(v.id("APPLE") == 3);          // lowercased lookup
    CHECK(v.id("durian") == embeddings::kUnkId); // unknown falls back
    CHECK(v.find("durian") == std::nullopt);
    CHECK(v.find("Banana") == 4);

    std::vector<std::size_t> ids = v.encode(std::vector<std::string>{"apple", "durian"});
    CHECK(ids == std::vector<std::size_t>{3, embeddings::kUnkId});
}

TEST_CASE("vocabulary frequency ties break lexicographically") {
    std::vector<std::vector<std::string>> sents = {{"zebra", "ant", "mole", "ant", "zebra", "mole"}};
    Vocabulary v = Vocabulary::build(sents);
    CHECK(v.token(3) == "ant");
    CHECK(v.token(4) == "mole");
    CHECK(v.token(5) == "zebra");
}

TEST_CASE("vocabulary max_size keeps most frequent tokens") {
    std::vector<std::vector<std::string>> sents = {
        {"a", "a", "a", "b", "b", "c"},
    };
    Vocabulary v = Vocabulary::build(sents, 5);
    CHECK(v.size() == 5);
    CHECK(v.token(3) == "a");
    CHECK(v.token(4) == "b");
    CHECK(v.find("c") == std::nullopt);
    CHECK_THROWS_AS(Vocabulary::build(sents, 3), UsageError);
    CHECK_THROWS_AS(Vocabulary::build({}, 10), DataError);
}

TEST_CASE("vocabulary round-trips through its token list") {
    Vocabulary v = Vocabulary::build(toy_corpus());
    Vocabulary w = Vocabulary::from_tokens(v.tokens());
    CHECK(w.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(w.token(i) == v.token(i));
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<unk>"}), DataError);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"x", "<unk>", "<eos>"}), DataError);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<unk>", "<eos>", "a", "a"}), DataError);
}

TEST_CASE("random embeddings stay inside the init bound") {
    nn::Rng rng(7);
    EmbeddingMatrix e = embeddings::random_embeddings(20, 8, rng);
    CHECK(e.vocab_size() == 20);
    CHECK(e.dim() == 8);
    double bound = 0.5 / 8;
    for (std::size_t i = 0; i < e.matrix.size(); ++i) {
        CHECK(e.matrix[i] <= bound);
        CHECK(e.matrix[i] >= -bound);
    }
}

TEST_CASE("skip-gram groups words that share contexts") {
    auto sents = toy_corpus();
    Vocabulary v = Vocabulary::build(sents);
    SkipgramConfig cfg;
    cfg.dim = 16;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 4;
    cfg.seed = 11;
    auto result = embeddings::train_skipgram(sents, v, cfg);

    std::size_t alpha = *v.find("alpha");
    std::size_t beta = *v.find("beta");
    std::size_t rock = *v.find("rock");
    double same = embeddings::cosine(result.embeddings, alpha, beta);
    double diff = embeddings::cosine(result.embeddings, alpha, rock);
    CHECK(same > diff);
    CHECK(same > 0.5);
}

TEST_CASE("held-out loss falls as skip-gram trains") {
    auto sents = toy_corpus();
    Vocabulary v = Vocabulary::build(sents);
    SkipgramConfig cfg;
    cfg.dim = 16;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 3;
    cfg.seed = 5;
    auto result = embeddings::train_skipgram(sents, v, cfg);
    REQUIRE(result.heldout_losses.size() == cfg.epochs + 1);
    CHECK(result.heldout_losses.back() < result.heldout_losses.front());
}

TEST_CASE("zero epochs returns the deterministic initialization") {
    auto sents = toy_corpus();
    Vocabulary v = Vocabulary::build(sents);
    SkipgramConfig cfg;
    cfg.dim = 12;
    cfg.epochs = 0;
    cfg.seed = 9;
    auto result = embeddings::train_skipgram(sents, v, cfg);
    REQUIRE(result.heldout_losses.size() == 1);

    nn::Rng master(cfg.seed);
    nn::Rng init_rng = master.split(2);
    EmbeddingMatrix expect = embeddings::random_embeddings(v.size(), cfg.dim, init_rng);
    REQUIRE(result.embeddings.matrix.size() == expect.matrix.size());
    for (std::size_t i = 0; i < expect.matrix.size(); ++i)
        CHECK(result.embeddings.matrix[i] == expect.matrix[i]);
}

TEST_CASE("skip-gram training is deterministic") {
    auto sents = toy_corpus();
    Vocabulary v = Vocabulary::build(sents);
    SkipgramConfig cfg;
    cfg.dim = 8;
    cfg.window = 2;
    cfg.epochs = 2;
    cfg.seed = 3;
    auto a = embeddings::train_skipgram(sents, v, cfg);
    auto b = embeddings::train_skipgram(sents, v, cfg);
    REQUIRE(a.embeddings.matrix.size() == b.embeddings.matrix.size());
    for (std::size_t i = 0; i < a.embeddings.matrix.size(); ++i)
        CHECK(a.embeddings.matrix[i] == b.embeddings.matrix[i]);
    REQUIRE(a.heldout_losses.size() == b.heldout_losses.size());
    for (std::size_t i = 0; i < a.heldout_losses.size(); ++i)
        CHECK(a.heldout_losses[i] == b.heldout_losses[i]);
}

TEST_CASE("skip-gram rejects a corpus smaller than its window") {
    Vocabulary v = Vocabulary::build({{"one", "two"}});
    SkipgramConfig cfg;
    cfg.window = 5;
    CHECK_THROWS_AS(embeddings::train_skipgram({{"one", "two"}}, v, cfg), DataError);
}

TEST_CASE("embeddings round-trip through the text format") {
    auto sents = toy_corpus();
    Vocabulary v = Vocabulary::build(sents);
    nn::Rng rng(21);
    EmbeddingMatrix e = embeddings::random_embeddings(v.size(), 7, rng);
    std::string path = temp_path("emb_roundtrip.txt");
    embeddings::save_embeddings(path, v, e);

    nn::Rng fill(99);
    EmbeddingMatrix back = embeddings::load_embeddings(path, v, fill);
    REQUIRE(back.dim() == 7);
    REQUIRE(back.vocab_size() == v.size());
    for (std::size_t i = 0; i < e.matrix.size(); ++i)
        CHECK(back.matrix[i] == e.matrix[i]); // 17 digits is lossless
    std::remove(path.c_str());
}

TEST_CASE("loading fills vocabulary words missing from the file") {
    Vocabulary small = Vocabulary::from_tokens({"<pad>", "<unk>", "<eos>", "kept"});
    nn::Rng rng(5);
    EmbeddingMatrix e = embeddings::random_embeddings(small.size(), 3, rng);
    std::string path = temp_path("emb_partial.txt");
    embeddings::save_embeddings(path, small, e);

    Vocabulary bigger =
        Vocabulary::from_tokens({"<pad>", "<unk>", "<eos>", "kept", "novel"});
    nn::Rng fill(6);
    EmbeddingMatrix loaded = embeddings::load_embeddings(path, bigger, fill);
    REQUIRE(loaded.vocab_size() == 5);
    std::size_t kept = *bigger.find("kept");
    for (std::size_t d = 0; d < 3; ++d)
        CHECK(loaded.matrix.at(kept, d) == e.matrix.at(*small.find("kept"), d));
    // the novel row comes from the fill rng, inside the init bound
    std::size_t novel = *bigger.find("novel");
    for (std::size_t d = 0; d < 3; ++d)
        CHECK(std::abs(loaded.matrix.at(novel, d)) <= 0.5 / 3);
    std::remove(path.c_str());
}

TEST_CASE("loading ignores file tokens outside the vocabulary and keeps file dim") {
    std::string path = temp_path("emb_extra.txt");
    {
        std::ofstream os(path);
        os << "2 4\n";
        os << "kept 1 2 3 4\n";
        os << "stranger 9 9 9 9\n";
    }
    Vocabulary v = Vocabulary::from_tokens({"<pad>", "<unk>", "<eos>", "kept"});
    nn::Rng fill(1);
    EmbeddingMatrix loaded = embeddings::load_embeddings(path, v, fill);
    CHECK(loaded.dim() == 4);
    std::size_t kept = *v.find("kept");
    CHECK(loaded.matrix.at(kept, 0) == 1.0);
    CHECK(loaded.matrix.at(kept, 3) == 4.0);
    std::remove(path.c_str());
}

TEST_CASE("malformed embedding files fail with line numbers") {
    Vocabulary v = Vocabulary::from_tokens({"<pad>", "<unk>", "<eos>", "kept"});
    nn::Rng fill(1);
    std::string path = temp_path("emb_bad.txt");

    auto write_and_expect = [&](const std::string& body, const std::string& needle) {
        std::ofstream(path) << body;
        try {
            embeddings::load_embeddings(path, v, fill);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    write_and_expect("garbage header\nkept 1 2\n", ":1:");
    write_and_expect("1 3\nkept 1 2\n", ":2:");          // too few values
    write_and_expect("1 2\nkept 1 2 3\n", ":2:");        // too many values
    write_and_expect("3 2\nkept 1 2\n", "header declares 3");
    CHECK_THROWS_AS(embeddings::load_embeddings("/tmp/definitely_missing_emb.txt", v, fill),
                    DataError);
    std::remove(path.c_str());
}
