#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "vague/errors.hpp"
#include "vague/generator.hpp"

using namespace vague;
using corpus::VaguenessClass;
using generator::GeneratorConfig;
using generator::LmGenerator;
using generator::VaguenessBias;

namespace {

std::vector<std::vector<std::string>> template_corpus(std::size_t n) {
    std::vector<std::vector<std::string>> base = {
        {"we", "collect", "your", "email", "address"},
        {"we", "may", "share", "some", "data"},
        {"you", "can", "delete", "your", "account"},
        {"we", "store", "certain", "information"},
    };
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(base[i % base.size()]);
    return out;
}

embeddings::Vocabulary vocab_of(const std::vector<std::vector<std::string>>& sents) {
    return embeddings::Vocabulary::build(sents);
}

LmGenerator tiny_generator(const embeddings::Vocabulary& vocab, std::size_t dim,
                           std::size_t hidden, std::uint64_t seed, std::size_t max_len = 10) {
    nn::Rng rng(seed);
    auto emb = embeddings::random_embeddings(vocab.size(), dim, rng);
    nn::Rng init(seed + 1);
    return LmGenerator::init(emb, hidden, max_len, init);
}

} // namespace

TEST_CASE("an untrained language model is exactly uniform") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 2);

    double ppl = generator::perplexity(gen, {vocab.encode(sents[0])});
    CHECK(ppl == doctest::Approx(vocab.size()).epsilon(1e-9)); // uniform = |V|

    // first-step distribution with no noise and lambda 0 is flat
    VaguenessBias bias = VaguenessBias::zeros(vocab.size());
    nn::Rng rng(3);
    nn::Tensor z({vocab.size()});
    auto step = generator::conditional_step(gen, bias, VaguenessClass::SomewhatClear,
                                            gen.cell.zero_state(), gen.bos, 1.0, rng, &z);
    for (std::size_t i = 0; i < vocab.size(); ++i)
        CHECK(step.soft.value()[i] == doctest::Approx(1.0 / vocab.size()).epsilon(1e-12));
}

TEST_CASE("lambda zero with no noise reduces to the unconditional model") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 4);
    nn::Rng wrng(5);
    for (std::size_t i = 0; i < gen.b.size(); ++i)
        gen.b.mutable_value()[i] = wrng.uniform(-1.0, 1.0);

    corpus::CueLexicon lex;
    lex.terms = {"may", "some", "certain"};
    VaguenessBias bias = VaguenessBias::init(vocab, lex);

    nn::Rng rng(6);
    nn::Tensor z({vocab.size()});
    auto step = generator::conditional_step(gen, bias, VaguenessClass::SomewhatClear,
                                            gen.cell.zero_state(), gen.bos, 1.0, rng, &z);
    auto logits = gen.step_logits(gen.cell.step(gen.bos, gen.cell.zero_state()));
    auto expect = nn::softmax(logits, 1.0);
    for (std::size_t i = 0; i < vocab.size(); ++i)
        CHECK(step.soft.value()[i] == doctest::Approx(expect.value()[i]).epsilon(1e-12));
}

TEST_CASE("a one-hot bias shifts the odds by e per lambda unit") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 7);
    // logits are all zero at init (zero projection), making arithmetic exact

    VaguenessBias bias = VaguenessBias::zeros(vocab.size());
    std::size_t k = vocab.id("may");
    bias.v.mutable_value()[k] = 1.0;

    nn::Rng rng(8);
    nn::Tensor z({vocab.size()});
    auto step = generator::conditional_step(gen, bias, VaguenessClass::Vague, // lambda 1
                                            gen.cell.zero_state(), gen.bos, 1.0, rng, &z);
    double pk = step.soft.value()[k];
    double pother = step.soft.value()[k == 0 ? 1 : 0];
    CHECK(pk / pother == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
    double expect = std::exp(1.0) / (std::exp(1.0) + (vocab.size() - 1));
    CHECK(pk == doctest::Approx(expect).epsilon(1e-9));
    CHECK(step.hard == k); // e beats 1 everywhere else
}

TEST_CASE("soft distributions are probability vectors and match the hard choice") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 9);
    nn::Rng wrng(10);
    for (std::size_t i = 0; i < gen.b.size(); ++i)
        gen.b.mutable_value()[i] = wrng.uniform(-2.0, 2.0);
    VaguenessBias bias = VaguenessBias::zeros(vocab.size());

    nn::Rng rng(11);
    for (double tau : {0.25, 0.5, 1.0, 3.0}) {
        for (int rep = 0; rep < 50; ++rep) {
            auto step = generator::conditional_step(gen, bias, VaguenessClass::Vague,
                                                    gen.cell.zero_state(), gen.bos, tau, rng);
            double sum = 0;
            std::size_t argmax = 0;
            for (std::size_t i = 0; i < vocab.size(); ++i) {
                double p = step.soft.value()[i];
                CHECK(p >= 0.0);
                sum += p;
                if (p > step.soft.value()[argmax]) argmax = i;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(argmax == step.hard); // tempered softmax preserves the argmax
        }
    }
}

TEST_CASE("temperature 0.01 concentrates nearly all mass on the hard token") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 12);
    VaguenessBias bias = VaguenessBias::zeros(vocab.size());

    // pinned seed: concentration needs a clear top-two score gap, and near
    // ties (which the continuous noise almost never produces) would dilute it
    nn::Rng rng(15);
    for (int rep = 0; rep < 20; ++rep) {
        auto step = generator::conditional_step(gen, bias, VaguenessClass::Clear,
                                                gen.cell.zero_state(), gen.bos, 0.01, rng);
        CHECK(step.soft.value()[step.hard] >= 0.99);
    }
}

TEST_CASE("hard-token frequencies follow the softmax of fixed logits") {
    // Gumbel-max equivalence: argmax(logits + gumbel) ~ softmax(logits)
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    std::vector<std::vector<std::string>> small = {{"a", "b", "c"}};
    auto v3 = embeddings::Vocabulary::build(small); // 6 ids
    LmGenerator gen = tiny_generator(v3, 4, 3, 14);
    std::vector<double> logits = {-0.5, 0.0, 0.8, 1.5, -1.0, 0.3};
    for (std::size_t i = 0; i < v3.size(); ++i) gen.b.mutable_value()[i] = logits[i];

    double lse = 0;
    for (double l : logits) lse += std::exp(l);
    VaguenessBias bias = VaguenessBias::zeros(v3.size());

    nn::Rng rng(15);
    const int draws = 20000;
    std::vector<int> counts(v3.size(), 0);
    for (int i = 0; i < draws; ++i) {
        auto step = generator::conditional_step(gen, bias, VaguenessClass::SomewhatClear,
                                                gen.cell.zero_state(), gen.bos, 1.0, rng);
        ++counts[step.hard];
    }
    for (std::size_t i = 0; i < v3.size(); ++i) {
        double expect = std::exp(logits[i]) / lse;
        CHECK(std::abs(counts[i] / double(draws) - expect) < 0.02);
    }
}

TEST_CASE("raising lambda never hurts biased tokens relative to unbiased ones") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 16);
    nn::Rng wrng(17);
    for (std::size_t i = 0; i < gen.b.size(); ++i)
        gen.b.mutable_value()[i] = wrng.uniform(-1.0, 1.0);

    corpus::CueLexicon lex;
    lex.terms = {"may", "some", "certain"};
    VaguenessBias bias = VaguenessBias::init(vocab, lex);
    std::size_t biased = vocab.id("may");
    std::size_t plain = vocab.id("we");

    nn::Rng rng(18);
    nn::Tensor z({vocab.size()});
    std::map<VaguenessClass, double> ratio;
    for (auto c : {VaguenessClass::Clear, VaguenessClass::SomewhatClear, VaguenessClass::Vague,
                   VaguenessClass::ExtremelyVague}) {
        auto step = generator::conditional_step(gen, bias, c, gen.cell.zero_state(), gen.bos,
                                                1.0, rng, &z);
        ratio[c] = step.soft.value()[biased] / step.soft.value()[plain];
    }
    CHECK(ratio[VaguenessClass::Clear] < ratio[VaguenessClass::SomewhatClear]);
    CHECK(ratio[VaguenessClass::SomewhatClear] < ratio[VaguenessClass::Vague]);
    CHECK(ratio[VaguenessClass::Vague] < ratio[VaguenessClass::ExtremelyVague]);
}

TEST_CASE("generation truncates, terminates, and repeats deterministically") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    VaguenessBias bias = VaguenessBias::zeros(vocab.size());

    LmGenerator gen = tiny_generator(vocab, 6, 5, 19, 1); // max_len 1
    nn::Rng rng(20);
    auto batch = generator::generate_batch(gen, bias, {VaguenessClass::Vague,
                                                       VaguenessClass::Clear}, 0.5, rng);
    REQUIRE(batch.size() == 2);
    for (const auto& s : batch) {
        CHECK(s.hard_tokens.size() == 1);
        CHECK(s.soft_dists.size() == 1);
    }
    CHECK(batch[0].cls == VaguenessClass::Vague);

    LmGenerator eos_gen = tiny_generator(vocab, 6, 5, 21, 10);
    eos_gen.b.mutable_value()[embeddings::kEosId] = 50.0; // dwarfs any noise
    nn::Rng rng2(22);
    auto eos_batch = generator::generate_batch(eos_gen, bias, {VaguenessClass::Clear}, 0.5,
                                               rng2);
    REQUIRE(eos_batch.size() == 1);
    CHECK(eos_batch[0].hard_tokens.size() == 1);
    CHECK(eos_batch[0].hard_tokens[0] == embeddings::kEosId);

    LmGenerator g2 = tiny_generator(vocab, 6, 5, 23, 8);
    std::vector<VaguenessClass> classes = {VaguenessClass::Vague, VaguenessClass::ExtremelyVague,
                                           VaguenessClass::Clear};
    nn::Rng ra(24), rb(24);
    auto a = generator::generate_batch(g2, bias, classes, 0.5, ra);
    auto b = generator::generate_batch(g2, bias, classes, 0.5, rb);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].hard_tokens == b[i].hard_tokens);
}

TEST_CASE("sampling-path gradients reach every generator parameter and the bias") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);

    for (std::uint64_t seed : {25u, 26u}) {
        nn::Rng rng(seed);
        embeddings::EmbeddingMatrix emb{nn::Tensor({vocab.size(), 4})};
        for (std::size_t i = 0; i < emb.matrix.size(); ++i)
            emb.matrix[i] = rng.uniform(-0.8, 0.8);
        nn::Rng init(seed + 100);
        LmGenerator gen = LmGenerator::init(emb, 3, 10, init);
        auto named = gen.named_params();
        for (auto& [name, v] : named) {
            if (name == "embedding") continue;
            for (std::size_t i = 0; i < v.size(); ++i)
                v.mutable_value()[i] = rng.uniform(-0.8, 0.8);
        }
        VaguenessBias bias = VaguenessBias::zeros(vocab.size());
        for (std::size_t i = 0; i < bias.v.size(); ++i)
            bias.v.mutable_value()[i] = rng.uniform(-0.5, 0.5);

        // two unrolled steps with frozen noise, hard recurrence detached
        nn::Rng zr(seed + 200);
        nn::Tensor z1 = nn::sample_gumbel({vocab.size()}, zr);
        nn::Tensor z2 = nn::sample_gumbel({vocab.size()}, zr);

        // fixed targets and a fixed recurrence token keep f continuous; the
        // hard path itself is non-differentiable by design
        auto f = [&]() {
            nn::Rng unused(0);
            auto s1 = generator::conditional_step(gen, bias, VaguenessClass::ExtremelyVague,
                                                  gen.cell.zero_state(), gen.bos, 0.7, unused,
                                                  &z1);
            nn::Var x = nn::detach(nn::embedding_row(gen.embedding, 4));
            auto s2 = generator::conditional_step(gen, bias, VaguenessClass::ExtremelyVague,
                                                  s1.state, x, 0.7, unused, &z2);
            return nn::scale(nn::add(nn::log(nn::pick(s1.soft, 3)),
                                     nn::log(nn::pick(s2.soft, 5))),
                             -0.5);
        };

        // the embedding feeds the recurrence only through detach, so finite
        // differences would see a path autodiff deliberately blocks; check
        // the differentiable parameters and then the blockage itself
        std::vector<nn::Var> params;
        for (const auto& [name, v] : named)
            if (name != "embedding") params.push_back(v);
        params.push_back(bias.v);
        CHECK(nn::grad_check(f, params, 1e-4) <= 1e-4);

        // bias gradient is live when lambda is nonzero...
        nn::zero_grads(params);
        gen.embedding.zero_grad();
        nn::backward(f());
        bool any = false;
        for (std::size_t i = 0; i < bias.v.grad().size(); ++i)
            if (bias.v.grad()[i] != 0.0) any = true;
        CHECK(any);
        // ...while the hard recurrence passes nothing back to the embedding
        for (std::size_t i = 0; i < gen.embedding.grad().size(); ++i)
            CHECK(gen.embedding.grad()[i] == 0.0);
    }
}

TEST_CASE("language-model loss gradients match finite differences") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    nn::Rng rng(27);
    embeddings::EmbeddingMatrix emb{nn::Tensor({vocab.size(), 4})};
    for (std::size_t i = 0; i < emb.matrix.size(); ++i)
        emb.matrix[i] = rng.uniform(-0.8, 0.8);
    nn::Rng init(28);
    LmGenerator gen = LmGenerator::init(emb, 3, 10, init);
    auto named = gen.named_params();
    for (auto& [name, v] : named) {
        if (name == "embedding") continue;
        for (std::size_t i = 0; i < v.size(); ++i)
            v.mutable_value()[i] = rng.uniform(-0.8, 0.8);
    }

    std::vector<std::size_t> ids = vocab.encode(sents[1]);
    auto f = [&]() { return gen.lm_loss(ids); };
    std::vector<nn::Var> params;
    for (const auto& [_, v] : named) params.push_back(v);
    CHECK(nn::grad_check(f, params, 1e-4) <= 1e-4);
}

TEST_CASE("pretraining memorizes a single repeated sentence") {
    std::vector<std::vector<std::string>> sents(30, {"we", "collect", "email"});
    auto vocab = vocab_of(sents);
    nn::Rng rng(29);
    auto emb = embeddings::random_embeddings(vocab.size(), 8, rng);

    GeneratorConfig cfg;
    cfg.hidden = 8;
    cfg.max_len = 10;
    cfg.epochs = 25;
    cfg.batch = 8;
    cfg.lr = 0.02;
    cfg.val_fraction = 0.1;
    cfg.seed = 30;
    auto result = generator::pretrain_lm(sents, vocab, emb, cfg);
    REQUIRE(result.heldout_perplexities.size() == cfg.epochs + 1);
    CHECK(result.heldout_perplexities.front() == doctest::Approx(vocab.size()).epsilon(1e-9));
    CHECK(result.heldout_perplexities.back() < 1.1); // memorization floor is 1.0
}

TEST_CASE("pretraining lowers held-out perplexity on a varied corpus") {
    auto sents = template_corpus(60);
    auto vocab = vocab_of(sents);
    nn::Rng rng(31);
    auto emb = embeddings::random_embeddings(vocab.size(), 8, rng);

    GeneratorConfig cfg;
    cfg.hidden = 10;
    cfg.max_len = 10;
    cfg.epochs = 8;
    cfg.batch = 8;
    cfg.lr = 0.02;
    cfg.val_fraction = 0.1;
    cfg.seed = 32;
    auto result = generator::pretrain_lm(sents, vocab, emb, cfg);
    CHECK(result.heldout_perplexities.back() <
          0.7 * result.heldout_perplexities.front());

    auto again = generator::pretrain_lm(sents, vocab, emb, cfg);
    REQUIRE(again.heldout_perplexities.size() == result.heldout_perplexities.size());
    for (std::size_t i = 0; i < again.heldout_perplexities.size(); ++i)
        CHECK(again.heldout_perplexities[i] == result.heldout_perplexities[i]);
}

TEST_CASE("generator checkpoints round-trip with the bias attached") {
    auto sents = template_corpus(8);
    auto vocab = vocab_of(sents);
    nn::Rng rng(33);
    auto emb = embeddings::random_embeddings(vocab.size(), 6, rng);
    GeneratorConfig cfg;
    cfg.hidden = 5;
    cfg.max_len = 7;
    cfg.epochs = 1;
    cfg.seed = 34;
    auto result = generator::pretrain_lm(sents, vocab, emb, cfg);

    Checkpoint ckpt = std::move(result.checkpoint);
    CHECK(!generator::checkpoint_has_bias(ckpt));
    corpus::CueLexicon lex;
    lex.terms = {"may", "some"};
    VaguenessBias bias = VaguenessBias::init(vocab, lex);
    bias.v.mutable_value()[3] = 0.25;
    generator::add_bias_to_checkpoint(ckpt, bias);
    CHECK(generator::checkpoint_has_bias(ckpt));

    std::string path = "/tmp/generator_ckpt.bin";
    ckpt.save(path);
    Checkpoint back = Checkpoint::load(path);
    std::remove(path.c_str());

    LmGenerator gen = generator::generator_from_checkpoint(back);
    CHECK(gen.max_len == cfg.max_len);
    std::vector<std::size_t> ids = vocab.encode(sents[0]);
    LmGenerator orig = generator::generator_from_checkpoint(ckpt);
    CHECK(gen.lm_loss(ids).value()[0] == orig.lm_loss(ids).value()[0]);

    VaguenessBias back_bias = generator::bias_from_checkpoint(back);
    REQUIRE(back_bias.v.size() == bias.v.size());
    for (std::size_t i = 0; i < bias.v.size(); ++i)
        CHECK(back_bias.v.value()[i] == bias.v.value()[i]);
    CHECK(back_bias.lambda(VaguenessClass::Clear) == -1.0);
    CHECK(back_bias.lambda(VaguenessClass::ExtremelyVague) == 2.0);
}

TEST_CASE("generator rejects bad configuration") {
    auto sents = template_corpus(4);
    auto vocab = vocab_of(sents);
    LmGenerator gen = tiny_generator(vocab, 6, 5, 35);
    VaguenessBias bias = VaguenessBias::zeros(vocab.size());
    nn::Rng rng(36);

    CHECK_THROWS_AS(generator::conditional_step(gen, bias, VaguenessClass::Clear,
                                                gen.cell.zero_state(), gen.bos, 0.0, rng),
                    UsageError);
    CHECK_THROWS_AS(generator::conditional_step(gen, bias, VaguenessClass::Clear,
                                                gen.cell.zero_state(), gen.bos, -1.0, rng),
                    UsageError);

    VaguenessBias wrong = VaguenessBias::zeros(vocab.size() + 2);
    CHECK_THROWS_AS(generator::conditional_step(gen, wrong, VaguenessClass::Clear,
                                                gen.cell.zero_state(), gen.bos, 1.0, rng),
                    UsageError);

    nn::Rng rng2(37);
    auto emb = embeddings::random_embeddings(vocab.size(), 4, rng2);
    GeneratorConfig cfg;
    cfg.batch = 0;
    CHECK_THROWS_AS(generator::pretrain_lm(sents, vocab, emb, cfg), UsageError);
    GeneratorConfig cfg2;
    CHECK_THROWS_AS(generator::pretrain_lm({}, vocab, emb, cfg2), DataError);
}
