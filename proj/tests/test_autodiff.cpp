#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vague/autodiff.hpp"
#include "vague/lstm.hpp"
#include "vague/optim.hpp"

using namespace vague;
using namespace vague::nn;

namespace {

constexpr double kTol = 1e-4;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.5,
                     double hi = 1.5) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

std::size_t random_dim(Rng& rng) { return 1 + rng.uniform_index(7); } // 1..7

} // namespace

TEST_CASE("forward values: softmax matches hand-computed probabilities") {
    Var x = constant(Tensor({3}, {1.0, 2.0, 3.0}));
    Var s = softmax(x);
    CHECK(s.value()[0] == doctest::Approx(0.09003057).epsilon(1e-6));
    CHECK(s.value()[1] == doctest::Approx(0.24472847).epsilon(1e-6));
    CHECK(s.value()[2] == doctest::Approx(0.66524096).epsilon(1e-6));

    double sum_p = s.value()[0] + s.value()[1] + s.value()[2];
    CHECK(sum_p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax temperature sharpens or flattens but keeps the argmax") {
    Var x = constant(Tensor({3}, {1.0, 2.0, 3.0}));
    Var sharp = softmax(x, 0.01);
    CHECK(sharp.value()[2] > 0.999999);
    Var flat = softmax(x, 100.0);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(flat.value()[i] - 1.0 / 3.0) < 0.01);
    CHECK_THROWS_AS(softmax(x, 0.0), UsageError);
    CHECK_THROWS_AS(softmax(x, -1.0), UsageError);
}

TEST_CASE("softmax is stable for extreme finite logits") {
    Var x = constant(Tensor({3}, {1e5, -1e5, 0.0}));
    Var s = softmax(x);
    CHECK(s.value().all_finite());
    CHECK(s.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
    double total = s.value()[0] + s.value()[1] + s.value()[2];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigmoid slope at zero is one quarter (finite difference)") {
    auto sig_at = [](double v) {
        return sigmoid(constant(Tensor::scalar(v))).value().item();
    };
    double h = 1e-6;
    double slope = (sig_at(h) - sig_at(-h)) / (2 * h);
    CHECK(slope == doctest::Approx(0.25).epsilon(1e-6));

    Var x = parameter(Tensor::scalar(0.0));
    Var loss = sum(sigmoid(x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward without zeroing accumulates: second call doubles leaf grads") {
    Rng rng(21);
    Var w = parameter(random_tensor({4}, rng));
    Var loss = mean(mul(w, w));
    backward(loss);
    Tensor g1 = w.grad();
    backward(loss);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(w.grad()[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
    w.zero_grad();
    backward(loss);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(w.grad()[i] == doctest::Approx(g1[i]).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar loss") {
    Rng rng(3);
    Var w = parameter(random_tensor({3}, rng));
    CHECK_THROWS_AS(backward(mul(w, w)), UsageError);
}

TEST_CASE("shape mismatches are rejected") {
    Var a = constant(Tensor({2}, {1, 2}));
    Var b = constant(Tensor({3}, {1, 2, 3}));
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
    CHECK_THROWS_AS(dot(a, b), ShapeError);
    Var m = constant(Tensor({2, 2}, {1, 2, 3, 4}));
    CHECK_THROWS_AS(matmul(m, b), ShapeError);
    CHECK_THROWS_AS(slice(b, 2, 2), ShapeError);
    CHECK_THROWS_AS(pick(b, 3), ShapeError);
}

TEST_CASE("non-finite op outputs raise divergence errors") {
    CHECK_THROWS_AS(exp(constant(Tensor::scalar(1000.0))), DivergenceError);
    CHECK_THROWS_AS(log(constant(Tensor::scalar(-1.0))), DivergenceError);
    CHECK_THROWS_AS(log(constant(Tensor::scalar(0.0))), DivergenceError);
}

TEST_CASE("frozen parameters receive literally zero gradient") {
    Rng rng(31);
    Var w = parameter(random_tensor({3}, rng));
    Var frozen = parameter(random_tensor({3}, rng));
    frozen.set_requires_grad(false);
    Var loss = sum(mul(w, frozen));
    backward(loss);
    CHECK(w.grad().size() == 3);
    // The frozen leaf never had a gradient buffer touched.
    CHECK(frozen.grad().size() == 0);
    frozen.set_requires_grad(true);
    Var loss2 = sum(mul(w, frozen));
    backward(loss2);
    CHECK(frozen.grad().size() == 3);
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(32);
    Var w = parameter(random_tensor({3}, rng));
    Var d = detach(sigmoid(w));
    Var loss = sum(mul(d, w));
    backward(loss);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(w.grad()[i] == doctest::Approx(d.value()[i]).epsilon(1e-12));
}

TEST_CASE("grad_check rejects nondeterministic functions") {
    Rng rng(33);
    Var w = parameter(random_tensor({2}, rng));
    int calls = 0;
    auto f = [&]() {
        ++calls;
        return scale(sum(w), 1.0 + 0.1 * calls);
    };
    CHECK_THROWS_AS(grad_check(f, {w}), UsageError);
}

TEST_CASE("grad_check flags a corrupted gradient rule") {
    Rng rng(34);
    Var x = parameter(random_tensor({4}, rng));
    auto f = [&]() {
        // forward identical to sigmoid, backward deliberately scaled by 1.5
        Tensor out = x.value();
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = 1.0 / (1.0 + std::exp(-out[i]));
        auto n = std::make_shared<Node>();
        n->value = out;
        n->requires_grad = true;
        n->parents = {x.node()};
        n->backprop = [](Node& node) {
            Node& p = *node.parents[0];
            p.ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i) {
                double s = node.value[i];
                p.grad[i] += 1.5 * node.grad[i] * s * (1.0 - s);
            }
        };
        return sum(Var(n));
    };
    CHECK(grad_check(f, {x}) >= 1e-2);
}

TEST_CASE("every op passes finite-difference gradient checks over 100 seeds") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);

        // elementwise binary / unary chains
        {
            std::size_t n = random_dim(rng);
            Var a = parameter(random_tensor({n}, rng));
            Var b = parameter(random_tensor({n}, rng));
            Tensor w = random_tensor({n}, rng, 0.2, 1.0);
            auto f = [&]() {
                Var y = add(mul(a, b), sub(a, b));
                return sum(mul(sigmoid(y), constant(w)));
            };
            CHECK(grad_check(f, {a, b}) < kTol);
        }

        // scale, tanh, relu, exp, log
        {
            std::size_t n = random_dim(rng);
            Var a = parameter(random_tensor({n}, rng, 0.3, 1.8));
            Tensor w = random_tensor({n}, rng, 0.2, 1.0);
            auto f = [&]() {
                Var y = add(tanh(scale(a, 0.7)), relu(sub(a, constant(Tensor::full({n}, 1.0)))));
                return sum(mul(add(y, log(exp(scale(a, 0.5)))), constant(w)));
            };
            CHECK(grad_check(f, {a}) < kTol);
        }

        // matmul in all three rank combinations, plus dot
        {
            std::size_t m = random_dim(rng), k = random_dim(rng), n = random_dim(rng);
            Var A = parameter(random_tensor({m, k}, rng));
            Var B = parameter(random_tensor({k, n}, rng));
            Var x = parameter(random_tensor({k}, rng));
            Var y = parameter(random_tensor({k}, rng));
            Tensor wmn = random_tensor({m, n}, rng, 0.2, 1.0);
            Tensor wm = random_tensor({m}, rng, 0.2, 1.0);
            Tensor wn = random_tensor({n}, rng, 0.2, 1.0);
            auto f = [&]() {
                Var mm = matmul(A, B);
                Var mv = matmul(A, x);
                Var vm = matmul(x, B);
                Var s = add(sum(mul(mm, constant(wmn))),
                            add(sum(mul(mv, constant(wm))), sum(mul(vm, constant(wn)))));
                return add(s, dot(x, y));
            };
            CHECK(grad_check(f, {A, B, x, y}) < kTol);
        }

        // concat, slice, stack_rows, pick, mean
        {
            std::size_t n1 = random_dim(rng), n2 = random_dim(rng);
            Var a = parameter(random_tensor({n1}, rng));
            Var b = parameter(random_tensor({n2}, rng));
            std::size_t off = rng.uniform_index(n1);
            std::size_t len = 1 + rng.uniform_index(n1 + n2 - off);
            std::size_t pick_i = rng.uniform_index(n1);
            auto f = [&]() {
                Var c = concat({a, b});
                Var s = slice(c, off, len);
                Var st = stack_rows({a, a});
                return add(add(mean(s), pick(a, pick_i)), mean(st));
            };
            CHECK(grad_check(f, {a, b}) < kTol);
        }

        // softmax (two temperatures) and log_softmax, vector and matrix
        {
            std::size_t n = 2 + rng.uniform_index(5);
            Var a = parameter(random_tensor({n}, rng));
            Var M = parameter(random_tensor({3, n}, rng));
            Tensor wv = random_tensor({n}, rng, 0.2, 1.0);
            Tensor wm = random_tensor({3, n}, rng, 0.2, 1.0);
            auto f = [&]() {
                Var s1 = softmax(a, 1.0);
                Var s2 = softmax(a, 0.5);
                Var ls = log_softmax(M);
                return add(sum(mul(add(s1, s2), constant(wv))), sum(mul(ls, constant(wm))));
            };
            CHECK(grad_check(f, {a, M}) < kTol);
        }

        // max_over_rows with a row limit
        {
            std::size_t rows = 2 + rng.uniform_index(4);
            std::size_t cols = random_dim(rng);
            std::size_t limit = 1 + rng.uniform_index(rows);
            Var M = parameter(random_tensor({rows, cols}, rng));
            Tensor w = random_tensor({cols}, rng, 0.2, 1.0);
            auto f = [&]() { return sum(mul(max_over_rows(M, limit), constant(w))); };
            CHECK(grad_check(f, {M}) < kTol);
        }

        // embedding gathers
        {
            std::size_t v = 3 + rng.uniform_index(5), d = random_dim(rng);
            Var E = parameter(random_tensor({v, d}, rng));
            std::vector<std::size_t> ids{rng.uniform_index(v), rng.uniform_index(v),
                                         rng.uniform_index(v)};
            Tensor w = random_tensor({ids.size(), d}, rng, 0.2, 1.0);
            Tensor wr = random_tensor({d}, rng, 0.2, 1.0);
            auto f = [&]() {
                return add(sum(mul(embedding_rows(E, ids), constant(w))),
                           sum(mul(embedding_row(E, ids[0]), constant(wr))));
            };
            CHECK(grad_check(f, {E}) < kTol);
        }

        // 1-D convolution over a (length, dim) input
        {
            std::size_t len = 3 + rng.uniform_index(4);
            std::size_t d = random_dim(rng);
            std::size_t width = 1 + rng.uniform_index(std::min<std::size_t>(len, 3));
            std::size_t nf = random_dim(rng);
            Var X = parameter(random_tensor({len, d}, rng));
            Var W = parameter(random_tensor({nf, width * d}, rng));
            Var b = parameter(random_tensor({nf}, rng));
            Tensor w = random_tensor({len - width + 1, nf}, rng, 0.2, 1.0);
            auto f = [&]() { return sum(mul(conv1d_valid(X, W, b, width), constant(w))); };
            CHECK(grad_check(f, {X, W, b}) < kTol);
        }

        // classification losses
        {
            std::size_t n = 2 + rng.uniform_index(5);
            Var logits = parameter(random_tensor({n}, rng));
            std::size_t target = rng.uniform_index(n);
            Tensor y({n}), w({n});
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
                w[i] = rng.uniform(0.5, 2.0);
            }
            auto f = [&]() {
                return add(cross_entropy(logits, target),
                           bce_with_logits(logits, y, w));
            };
            CHECK(grad_check(f, {logits}) < kTol);
        }
    }
}

TEST_CASE("lstm cell chain passes gradient checks") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        std::size_t d = 3, h = 4;
        LstmCell cell = LstmCell::init(d, h, rng);
        Var x0 = parameter(random_tensor({d}, rng));
        Var x1 = parameter(random_tensor({d}, rng));
        Var x2 = parameter(random_tensor({d}, rng));
        Tensor w = random_tensor({h}, rng, 0.2, 1.0);
        auto f = [&]() {
            auto s = cell.zero_state();
            s = cell.step(x0, s);
            s = cell.step(x1, s);
            s = cell.step(x2, s);
            return sum(mul(s.h, constant(w)));
        };
        std::vector<Var> params = cell.params();
        params.push_back(x0);
        params.push_back(x1);
        params.push_back(x2);
        CHECK(grad_check(f, params) < kTol);
    }
}

TEST_CASE("adam drives a quadratic to its minimum") {
    Rng rng(77);
    Var w = parameter(random_tensor({4}, rng));
    Tensor target({4}, {0.5, -1.0, 2.0, 0.0});
    Adam opt({w}, 0.05);
    for (int it = 0; it < 400; ++it) {
        opt.zero_grad();
        Var diff = sub(w, constant(target));
        backward(mean(mul(diff, diff)));
        opt.step();
    }
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(w.value()[i] == doctest::Approx(target[i]).epsilon(1e-3));
}
