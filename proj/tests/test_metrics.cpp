#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vague/metrics.hpp"
#include "vague/rng.hpp"

using namespace vague;
using namespace vague::metrics;

namespace {

// Independent oracle: same quantities computed from an explicit confusion
// matrix instead of streaming counters.
struct OracleResult {
    double wp = 0, wr = 0, wf = 0;
};

OracleResult oracle_weighted_prf(const std::vector<int>& t, const std::vector<int>& p) {
    double c[4][4] = {};
    for (std::size_t i = 0; i < t.size(); ++i) c[t[i]][p[i]] += 1.0;
    OracleResult r;
    double n = static_cast<double>(t.size());
    for (int k = 0; k < 4; ++k) {
        double tp = c[k][k], pred = 0, act = 0;
        for (int j = 0; j < 4; ++j) {
            pred += c[j][k];
            act += c[k][j];
        }
        double prec = pred > 0 ? tp / pred : 0.0;
        double rec = act > 0 ? tp / act : 0.0;
        double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        r.wp += act / n * prec;
        r.wr += act / n * rec;
        r.wf += act / n * f1;
    }
    return r;
}

double oracle_auc(const std::vector<int>& t, const std::vector<double>& s) {
    double u = 0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != 1) continue;
        ++pos;
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (t[j] == 1) continue;
            if (s[i] > s[j]) u += 1.0;
            else if (s[i] == s[j]) u += 0.5;
        }
    }
    for (int x : t)
        if (x == 0) ++neg;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

} // namespace

TEST_CASE("weighted prf matches a hand-computed example") {
    std::vector<int> truth{0, 0, 1, 1, 2};
    std::vector<int> pred{0, 1, 1, 1, 2};
    PrfReport r = weighted_prf(truth, pred);
    CHECK(r.per_class[0].precision == doctest::Approx(1.0));
    CHECK(r.per_class[0].recall == doctest::Approx(0.5));
    CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.per_class[1].recall == doctest::Approx(1.0));
    CHECK(r.per_class[2].f1 == doctest::Approx(1.0));
    CHECK(r.per_class[3].support == 0);
    CHECK(r.per_class[3].f1 == doctest::Approx(0.0));
    CHECK(r.weighted_precision == doctest::Approx(13.0 / 15.0));
    CHECK(r.weighted_recall == doctest::Approx(0.8));
    CHECK(r.weighted_f1 == doctest::Approx((2.0 * (2.0 / 3.0) + 2.0 * 0.8 + 1.0) / 5.0));
}

TEST_CASE("constant modal predictions reproduce the majority-baseline identity") {
    // class supports with the corpus prior ~(26.9%, 50.8%, 20.5%, 1.8%)
    const std::size_t supports[4] = {2690, 5077, 2050, 180};
    std::vector<int> truth, pred;
    for (int c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < supports[c]; ++i) {
            truth.push_back(c);
            pred.push_back(1); // modal class
        }
    PrfReport r = weighted_prf(truth, pred);
    // weighted precision = prior^2, recall = prior, f1 = prior * (2*prior/(1+prior))
    double prior = 5077.0 / 9997.0;
    CHECK(r.weighted_precision == doctest::Approx(prior * prior).epsilon(1e-12));
    CHECK(r.weighted_recall == doctest::Approx(prior).epsilon(1e-12));
    CHECK(r.weighted_f1 == doctest::Approx(prior * (2 * prior / (1 + prior))).epsilon(1e-12));
    CHECK(std::abs(100 * r.weighted_precision - 25.77) < 0.05);
    CHECK(std::abs(100 * r.weighted_recall - 50.77) < 0.05);
    CHECK(std::abs(100 * r.weighted_f1 - 34.19) < 0.05);
}

TEST_CASE("weighted prf agrees with the brute-force oracle on 200 random instances") {
    nn::Rng rng(99);
    for (int inst = 0; inst < 200; ++inst) {
        std::size_t n = 1 + rng.uniform_index(50);
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<int>(rng.uniform_index(4));
            p[i] = static_cast<int>(rng.uniform_index(4));
        }
        PrfReport r = weighted_prf(t, p);
        OracleResult o = oracle_weighted_prf(t, p);
        CHECK(std::abs(r.weighted_precision - o.wp) < 1e-9);
        CHECK(std::abs(r.weighted_recall - o.wr) < 1e-9);
        CHECK(std::abs(r.weighted_f1 - o.wf) < 1e-9);
    }
}

TEST_CASE("metrics validate their inputs") {
    CHECK_THROWS_AS(weighted_prf({}, {}), DataError);
    CHECK_THROWS_AS(weighted_prf({0, 1}, {0}), UsageError);
    CHECK_THROWS_AS(weighted_prf({0, 4}, {0, 0}), DataError);
    CHECK_THROWS_AS(binary_prf({0, 2}, {0, 1}), DataError);
    CHECK_THROWS_AS(mean_reports({}), DataError);
}

TEST_CASE("binary prf counts the positive class only") {
    std::vector<int> truth{1, 1, 1, 0, 0, 0, 0, 1};
    std::vector<int> pred{1, 0, 1, 1, 0, 0, 0, 0};
    BinaryPrf r = binary_prf(truth, pred);
    CHECK(r.true_positives == 2);
    CHECK(r.predicted_positives == 3);
    CHECK(r.actual_positives == 4);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall == doctest::Approx(0.5));
    CHECK(r.f1 == doctest::Approx(2 * (2.0 / 3.0) * 0.5 / ((2.0 / 3.0) + 0.5)));

    BinaryPrf none = binary_prf({0, 0}, {0, 0});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
}

TEST_CASE("confusion matrix counts and normalizations") {
    std::vector<int> truth{0, 0, 1, 1, 1, 2, 3, 3};
    std::vector<int> pred{0, 1, 1, 1, 0, 2, 1, 3};
    ConfusionMatrix m = confusion(truth, pred);
    CHECK(m.counts[0][0] == 1);
    CHECK(m.counts[0][1] == 1);
    CHECK(m.counts[1][1] == 2);
    CHECK(m.counts[1][0] == 1);
    CHECK(m.counts[2][2] == 1);
    CHECK(m.counts[3][1] == 1);
    CHECK(m.counts[3][3] == 1);

    auto rows = m.true_normalized();
    for (std::size_t t = 0; t < 4; ++t) {
        double sum = 0;
        for (std::size_t p = 0; p < 4; ++p) sum += rows[t][p];
        CHECK(sum == doctest::Approx(1.0));
    }
    CHECK(rows[1][1] == doctest::Approx(2.0 / 3.0));

    // system view: of everything predicted class 1, how much was truly each class
    auto sys = m.system_normalized();
    CHECK(sys[1][0] == doctest::Approx(0.25));
    CHECK(sys[1][1] == doctest::Approx(0.5));
    CHECK(sys[1][3] == doctest::Approx(0.25));
    double sum1 = sys[1][0] + sys[1][1] + sys[1][2] + sys[1][3];
    CHECK(sum1 == doctest::Approx(1.0));
}

TEST_CASE("roc auc equals the rank-statistic oracle on 200 random instances") {
    nn::Rng rng(123);
    const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int inst = 0; inst < 200; ++inst) {
        std::size_t n = 4 + rng.uniform_index(40);
        std::vector<int> t(n);
        std::vector<double> s(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.uniform() < 0.4 ? 1 : 0;
            (t[i] == 1 ? has_pos : has_neg) = true;
            // half the instances use heavily tied scores
            s[i] = inst % 2 == 0 ? levels[rng.uniform_index(5)] : rng.uniform();
        }
        if (!has_pos) t[0] = 1;
        if (!has_neg) t[n - 1] = 0;
        RocCurve c = roc_auc(t, s);
        CHECK(std::abs(c.auc - oracle_auc(t, s)) < 1e-9);
        CHECK(c.points.front() == std::pair<double, double>(0.0, 0.0));
        CHECK(c.points.back() == std::pair<double, double>(1.0, 1.0));
    }
}

TEST_CASE("roc auc hits 1.0 (0.0) for perfectly ordered (inverted) scores") {
    std::vector<int> t{1, 1, 1, 0, 0, 0};
    std::vector<double> s{0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
    CHECK(roc_auc(t, s).auc == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> inv{0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
    CHECK(roc_auc(t, inv).auc == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<double> flat(6, 0.5);
    CHECK(roc_auc(t, flat).auc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("roc auc is invariant under strictly monotone score transforms") {
    nn::Rng rng(5);
    std::vector<int> t;
    std::vector<double> s;
    for (int i = 0; i < 60; ++i) {
        t.push_back(rng.uniform() < 0.5 ? 1 : 0);
        s.push_back(rng.uniform());
    }
    t[0] = 1;
    t[1] = 0;
    double base = roc_auc(t, s).auc;
    std::vector<double> expd = s, affine = s;
    for (double& v : expd) v = std::exp(3.0 * v);
    for (double& v : affine) v = 7.0 * v - 2.0;
    CHECK(roc_auc(t, expd).auc == doctest::Approx(base).epsilon(1e-12));
    CHECK(roc_auc(t, affine).auc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("roc auc rejects degenerate label sets") {
    CHECK_THROWS_AS(roc_auc({1, 1}, {0.5, 0.6}), DataError);
    CHECK_THROWS_AS(roc_auc({0, 0}, {0.5, 0.6}), DataError);
    CHECK_THROWS_AS(roc_auc({0, 1}, {0.5}), UsageError);
    CHECK_THROWS_AS(roc_auc({0, 1}, {0.5, std::nan("")}), DataError);
}

TEST_CASE("pearson correlation on hand-checked examples") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {-2, -4, -6}) == doctest::Approx(-1.0));
    CHECK(pearson({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
    CHECK_THROWS_AS(pearson({1, 2}, {1}), UsageError);
    CHECK_THROWS_AS(pearson({1}, {1}), DataError);
    CHECK_THROWS_AS(pearson({1, 2, 3}, {5, 5, 5}), DataError);
}

TEST_CASE("pearson matches a direct covariance computation on random data") {
    nn::Rng rng(17);
    for (int inst = 0; inst < 50; ++inst) {
        std::size_t n = 3 + rng.uniform_index(30);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(-5, 5);
            y[i] = 0.3 * x[i] + rng.uniform(-1, 1);
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += x[i] / n;
            my += y[i] / n;
        }
        double a = 0, b = 0, c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            a += (x[i] - mx) * (y[i] - my);
            b += (x[i] - mx) * (x[i] - mx);
            c += (y[i] - my) * (y[i] - my);
        }
        CHECK(pearson(x, y) == doctest::Approx(a / std::sqrt(b * c)).epsilon(1e-9));
    }
}

TEST_CASE("mean_reports averages weighted metrics across folds") {
    PrfReport a = weighted_prf({0, 1, 2, 3}, {0, 1, 2, 3}); // all perfect
    PrfReport b = weighted_prf({0, 1}, {1, 0});             // all wrong
    PrfReport m = mean_reports({a, b});
    CHECK(m.weighted_f1 == doctest::Approx((a.weighted_f1 + b.weighted_f1) / 2));
    CHECK(m.total == 6);
}
