#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dpm/eval.hpp"
#include "dpm/scoring.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using Catch::Approx;

TEST_CASE("scores are dominated by a deeply negative offset", "[eval]") {
    dpm::ModelParams p;
    p.c = -15.0;
    p.phi = 0.5;
    p.alpha = {0.0};
    p.beta = {0.0};
    auto h = helpers::make_history("1", {{1}, {0}, {1}}, {{0}, {1}, {0}}, {0, 0, 0});
    dpm::FilterConfig cfg;
    cfg.particle_count = 500;
    auto scores = dpm::score_customer(p, h, cfg);
    REQUIRE(scores.size() == 4);
    for (double s : scores) {
        CHECK(s < 1e-4);
        CHECK(s > 0.0);
    }
}

TEST_CASE("scores have the prefix property: future labels cannot leak", "[eval]") {
    dpm::ModelParams p;
    p.c = -1.0;
    p.phi = 0.6;
    p.alpha = {0.7};
    p.beta = {0.4};
    auto h = helpers::make_history("same", {{1}, {0}, {2}, {0}, {1}, {0}},
                                   {{0}, {1}, {0}, {0}, {1}, {0}}, {0, 0, 0, 0, 0, 0});
    auto mutated = h;
    mutated.y[4] = 1;
    mutated.horizon = 5;  // truncate at the new purchase
    mutated.y.resize(5);
    mutated.r.resize(5);
    mutated.m.resize(5);

    dpm::FilterConfig cfg;
    cfg.particle_count = 800;
    cfg.seed = 17;
    auto a = dpm::score_customer(p, h, cfg);
    auto b = dpm::score_customer(p, mutated, cfg);
    // Days 1..5 are predicted from data strictly before them, which is
    // identical across the two histories.
    for (int t = 0; t < 5; ++t) CHECK(a[t] == b[t]);
}

TEST_CASE("scores match the grid oracle on a 3-day instance", "[eval]") {
    dpm::ModelParams p;
    p.c = -0.8;
    p.phi = 0.5;
    p.alpha = {0.9};
    p.beta = {0.6};
    auto h = helpers::make_history("g", {{1}, {0}, {2}}, {{0}, {1}, {0}}, {0, 0, 1});
    auto oracle = oracles::grid_filter(p, h);

    const int reps = 12;
    for (int day : {0, 1, 2, 3}) {
        std::vector<double> vals;
        for (int rep = 0; rep < reps; ++rep) {
            dpm::FilterConfig cfg;
            cfg.particle_count = 8000;
            cfg.seed = 100 + rep;
            vals.push_back(dpm::score_customer(p, h, cfg)[day]);
        }
        double m = 0.0;
        for (double v : vals) m += v;
        m /= reps;
        double sd = 0.0;
        for (double v : vals) sd += (v - m) * (v - m);
        sd = std::sqrt(sd / (reps - 1));
        CHECK(std::abs(m - oracle.scores[day]) < 3.0 * sd / std::sqrt(1.0 * reps) + 1e-9);
    }
}

TEST_CASE("roc on perfectly separated scores", "[eval]") {
    std::vector<double> s{0.9, 0.8, 0.7, 0.2, 0.1};
    std::vector<int> y{1, 1, 1, 0, 0};
    auto roc = dpm::roc_curve(s, y);
    CHECK(roc.auc == 1.0);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
}

TEST_CASE("roc on independent labels is a coin flip", "[eval]") {
    dpm::detail::Rng rng(4);
    const int n = 100000;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        s[i] = rng.uniform();
        y[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    auto roc = dpm::roc_curve(s, y);
    CHECK(roc.auc == Approx(0.5).margin(0.01));
}

TEST_CASE("trapezoid AUC equals the Mann-Whitney statistic exactly", "[eval]") {
    dpm::detail::Rng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 3 + static_cast<int>(rng.uniform_int(40));
        std::vector<double> s(n);
        std::vector<int> y(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // Coarse grid scores force plenty of ties.
            s[i] = static_cast<double>(rng.uniform_int(6)) / 5.0;
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
            pos += y[i];
        }
        if (pos == 0 || pos == n) {
            y[0] = 1 - y[0];
        }
        auto roc = dpm::roc_curve(s, y);
        const double want = oracles::mwu_auc(s, y);
        CHECK(roc.auc == want);  // bit-exact by construction
    }
}

TEST_CASE("roc points are monotone and auc is transform-invariant", "[eval]") {
    dpm::detail::Rng rng(23);
    const int n = 500;
    std::vector<double> s(n), s2(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        s[i] = -3.0 + 6.0 * rng.uniform();
        s2[i] = std::exp(0.7 * s[i]) + 2.0;  // strictly increasing transform
        y[i] = rng.bernoulli(dpm::detail::logistic(s[i])) ? 1 : 0;
    }
    if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
    if (std::count(y.begin(), y.end(), 0) == 0) y[0] = 0;
    auto r1 = dpm::roc_curve(s, y);
    auto r2 = dpm::roc_curve(s2, y);
    CHECK(r1.auc == r2.auc);
    for (std::size_t i = 1; i < r1.points.size(); ++i) {
        CHECK(r1.points[i].fpr >= r1.points[i - 1].fpr);
        CHECK(r1.points[i].tpr >= r1.points[i - 1].tpr);
    }
}

TEST_CASE("roc rejects degenerate inputs", "[eval]") {
    CHECK_THROWS_AS(dpm::roc_curve({0.5, 0.4}, {1, 1}), dpm::ContractViolation);
    CHECK_THROWS_AS(dpm::roc_curve({0.5}, {1, 0}), dpm::ContractViolation);
    CHECK_THROWS_AS(dpm::roc_curve({0.5, 0.4}, {1, 2}), dpm::ContractViolation);
}

TEST_CASE("last-touch histogram counts the most recent exposure", "[eval]") {
    dpm::Dataset data;
    data.k = 1;
    data.l = 1;
    // Purchaser touched on the purchase day only (r channel).
    data.customers.push_back(
        helpers::make_history("a", {{0}, {0}, {1}}, {{0}, {0}, {0}}, {0, 0, 1}));
    // Purchaser with an m touch two days before purchase - and an older one
    // that must be ignored.
    data.customers.push_back(
        helpers::make_history("b", {{0}, {0}, {0}, {0}}, {{1}, {1}, {0}, {0}}, {0, 0, 0, 1}));
    // Non-purchaser: contributes nothing.
    data.customers.push_back(
        helpers::make_history("c", {{1}, {1}, {1}}, {{1}, {1}, {1}}, {0, 0, 0}));

    auto hist = dpm::last_touch_histogram(data, 5);
    REQUIRE(hist.counts.size() == 2);
    CHECK(hist.counts[0][0] == 1);  // customer a, same-day touch
    for (int b = 1; b <= 5; ++b) CHECK(hist.counts[0][b] == 0);
    CHECK(hist.counts[1][2] == 1);  // customer b, lag-2 m touch
    CHECK(hist.counts[1][0] == 0);
    CHECK(hist.counts[1][3] == 0);  // older touch shadowed by the lag-2 one

    auto pooled = hist.pooled();
    CHECK(pooled[0] == 1);
    CHECK(pooled[2] == 1);
}

TEST_CASE("purchasers without a channel touch contribute to no bin", "[eval]") {
    dpm::Dataset data;
    data.k = 1;
    data.l = 1;
    data.customers.push_back(
        helpers::make_history("a", {{0}, {0}}, {{0}, {0}}, {0, 1}));
    auto hist = dpm::last_touch_histogram(data, 4);
    long total = 0;
    for (const auto& ch : hist.counts)
        for (long v : ch) total += v;
    CHECK(total == 0);
}

TEST_CASE("pooled scores mirror the lag-0 row construction", "[eval]") {
    auto purchaser = helpers::make_history("p", {{0}, {1}, {0}}, {{1}, {0}, {0}}, {0, 0, 1});
    std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
    auto pairs = dpm::pool_customer_scores(purchaser, scores);
    REQUIRE(pairs.size() == 2);  // days 2..3
    CHECK(pairs[0].day == 2);
    CHECK(pairs[0].score == 0.2);
    CHECK(pairs[0].label == 0);
    CHECK(pairs[1].day == 3);
    CHECK(pairs[1].label == 1);

    auto holdout = helpers::make_history("n", {{0}, {1}, {0}}, {{1}, {0}, {0}}, {0, 0, 0});
    auto pairs2 = dpm::pool_customer_scores(holdout, scores);
    REQUIRE(pairs2.size() == 3);  // days 2..4, final label 0 past the horizon
    CHECK(pairs2[2].day == 4);
    CHECK(pairs2[2].score == 0.4);
    CHECK(pairs2[2].label == 0);
}

TEST_CASE("score_dataset is invariant to the thread count", "[eval]") {
    dpm::ModelParams p;
    p.c = -2.0;
    p.phi = 0.5;
    p.alpha = {0.5};
    p.beta = {0.5};
    dpm::detail::Rng rng(6);
    dpm::Dataset data;
    data.k = 1;
    data.l = 1;
    for (int i = 0; i < 40; ++i)
        data.customers.push_back(helpers::random_history(rng, 12, 1, 1, 0.3));
    dpm::FilterConfig cfg;
    cfg.particle_count = 256;
    cfg.seed = 5;
    auto s1 = dpm::score_dataset(p, data, cfg, 1);
    auto s3 = dpm::score_dataset(p, data, cfg, 3);
    REQUIRE(s1.size() == s3.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        REQUIRE(s1[i].size() == s3[i].size());
        for (std::size_t t = 0; t < s1[i].size(); ++t) CHECK(s1[i][t] == s3[i][t]);
    }
}
