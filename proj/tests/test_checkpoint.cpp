#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "vague/checkpoint.hpp"
#include "vague/errors.hpp"
#include "vague/rng.hpp"

using namespace vague;

namespace {

Checkpoint sample_checkpoint() {
    Checkpoint ckpt;
    ckpt.config["kind"] = "word-tagger";
    ckpt.config["hidden"] = 32;
    ckpt.config["vocab"] = {"<pad>", "<unk>", "<eos>", "alpha"};

    nn::Rng rng(17);
    nn::Tensor w({3, 4});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-2.0, 2.0);
    nn::Tensor b({4});
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-2.0, 2.0);
    nn::Tensor s = nn::Tensor::scalar(0.125);
    ckpt.add("w", w);
    ckpt.add("b", b);
    ckpt.add("s", s);
    return ckpt;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/") + name;
}

} // namespace

TEST_CASE("checkpoint round-trips config and parameters bitwise") {
    Checkpoint ckpt = sample_checkpoint();
    std::string path = temp_path("ckpt_roundtrip.bin");
    ckpt.save(path);

    Checkpoint back = Checkpoint::load(path);
    CHECK(back.kind() == "word-tagger");
    CHECK(back.config["hidden"] == 32);
    CHECK(back.config["vocab"].size() == 4);

    REQUIRE(back.params.size() == ckpt.params.size());
    for (std::size_t p = 0; p < ckpt.params.size(); ++p) {
        CHECK(back.params[p].first == ckpt.params[p].first); // order preserved
        const nn::Tensor& a = ckpt.params[p].second;
        const nn::Tensor& b = back.params[p].second;
        REQUIRE(a.shape() == b.shape());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint lookup by name") {
    Checkpoint ckpt = sample_checkpoint();
    CHECK(ckpt.has("w"));
    CHECK(!ckpt.has("nope"));
    CHECK(ckpt.get("b").shape() == std::vector<std::size_t>{4});
    CHECK_THROWS_AS(ckpt.get("nope"), DataError);
    CHECK_THROWS_AS(ckpt.add("w", nn::Tensor::scalar(0.0)), UsageError);
}

TEST_CASE("checkpoint kind requires the config entry") {
    Checkpoint ckpt;
    CHECK_THROWS_AS(ckpt.kind(), DataError);
    ckpt.config["kind"] = "sentence-classifier";
    CHECK(ckpt.kind() == "sentence-classifier");
}

TEST_CASE("loading rejects a wrong magic") {
    std::string path = temp_path("ckpt_magic.bin");
    {
        Checkpoint ckpt = sample_checkpoint();
        ckpt.save(path);
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("BADMAGIC", 8);
    }
    CHECK_THROWS_AS(Checkpoint::load(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("loading rejects truncated files") {
    std::string full = temp_path("ckpt_full.bin");
    Checkpoint ckpt = sample_checkpoint();
    ckpt.save(full);

    std::ifstream in(full, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    in.close();

    std::string cut = temp_path("ckpt_cut.bin");
    // chop at several depths: inside magic, config, dims, and payload
    for (std::size_t keep : {4ul, 10ul, bytes.size() / 2, bytes.size() - 3}) {
        std::ofstream out(cut, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(keep));
        out.close();
        CHECK_THROWS_AS(Checkpoint::load(cut), DataError);
    }
    CHECK_THROWS_AS(Checkpoint::load("/tmp/definitely_missing_ckpt.bin"), DataError);
    std::remove(full.c_str());
    std::remove(cut.c_str());
}

TEST_CASE("loading rejects trailing garbage") {
    std::string path = temp_path("ckpt_trailing.bin");
    sample_checkpoint().save(path);
    {
        std::ofstream f(path, std::ios::binary | std::ios::app);
        f.write("xx", 2);
    }
    CHECK_THROWS_AS(Checkpoint::load(path), DataError);
    std::remove(path.c_str());
}
