#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dpm/baselines.hpp"
#include "dpm/detail/math.hpp"
#include "dpm/detail/rng.hpp"
#include "dpm/simulate.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using Catch::Approx;

TEST_CASE("lag-0 design rows and dimensions", "[baselines]") {
    dpm::Dataset data;
    data.k = 2;
    data.l = 1;
    data.customers.push_back(
        helpers::make_history("1", {{1, 0}, {0, 2}, {1, 1}}, {{0}, {1}, {0}}, {0, 0, 0}));
    auto d = dpm::build_lagged_design(data, 0);
    CHECK(d.n_rows == 3);
    CHECK(d.dim == 1 + 2 + 1);
    CHECK(d.feature_names ==
          std::vector<std::string>{"c", "alpha.0.1", "alpha.0.2", "beta.0.1"});
    // Row for t=1 holds day-1 touches; its label is day-2's y.
    CHECK(d.row(0)[0] == 1.0);
    CHECK(d.row(0)[1] == 1.0);
    CHECK(d.row(0)[3] == 0.0);
    // The final row of a non-purchaser is labelled by the unobserved day T+1.
    CHECK(d.y[2] == 0);
}

TEST_CASE("lag-2 design needs two days of history", "[baselines]") {
    dpm::Dataset data;
    data.k = 1;
    data.l = 1;
    data.customers.push_back(
        helpers::make_history("1", {{1}, {2}, {0}}, {{0}, {1}, {1}}, {0, 0, 0}));
    auto d = dpm::build_lagged_design(data, 2);
    CHECK(d.n_rows == 1);
    CHECK(d.dim == 1 + 3 * 2);
    // Feature layout: [1, r_3, m_3, r_2, m_2, r_1, m_1].
    CHECK(d.row(0)[1] == 0.0);
    CHECK(d.row(0)[2] == 1.0);
    CHECK(d.row(0)[3] == 2.0);
    CHECK(d.row(0)[4] == 1.0);
    CHECK(d.row(0)[5] == 1.0);
    CHECK(d.row(0)[6] == 0.0);
}

TEST_CASE("purchasers contribute no post-purchase rows", "[baselines]") {
    dpm::Dataset data;
    data.k = 1;
    data.l = 0;
    data.customers.push_back(
        helpers::make_history("1", {{0}, {1}, {0}, {1}}, {{}, {}, {}, {}}, {0, 0, 0, 1}));
    auto d = dpm::build_lagged_design(data, 0);
    CHECK(d.n_rows == 3);  // t = 1..3; the t=3 row carries the purchase label
    CHECK(d.y[0] == 0);
    CHECK(d.y[1] == 0);
    CHECK(d.y[2] == 1);
}

TEST_CASE("an over-deep lag yields the empty-design error", "[baselines]") {
    dpm::Dataset data;
    data.k = 1;
    data.l = 0;
    data.customers.push_back(helpers::make_history("1", {{0}, {0}}, {{}, {}}, {0, 0}));
    CHECK_THROWS_AS(dpm::build_lagged_design(data, 2), dpm::DegenerateDesign);
}

TEST_CASE("intercept-only MLE equals the logit of the base rate", "[baselines]") {
    // One customer, horizon 10000, purchase on the final day: 9999 rows with
    // a single positive label.
    dpm::Dataset data;
    data.k = 0;
    data.l = 0;
    dpm::CustomerHistory h;
    h.id = "1";
    h.horizon = 10000;
    h.y.assign(10000, 0);
    h.y.back() = 1;
    data.customers.push_back(h);

    auto d = dpm::build_lagged_design(data, 0);
    REQUIRE(d.n_rows == 9999);
    auto fit = dpm::fit_glm(d, 200, 1e-12);
    CHECK(fit.converged);
    CHECK(fit.coefficients[0] == Approx(dpm::detail::logit(1.0 / 9999.0)).margin(1e-9));
    CHECK(fit.coefficients[0] == Approx(-9.21).margin(0.01));
}

TEST_CASE("memoryless simulation recovers glm coefficients within 3 sigma", "[baselines]") {
    // phi = 0 makes the generator exactly the lag-0 logistic model.
    const double c_true = -2.0, a_true = 0.8, b_true = -0.5;
    int covered = 0;
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
        dpm::SimConfig cfg;
        cfg.true_params.c = c_true;
        cfg.true_params.phi = 0.0;
        cfg.true_params.alpha = {a_true};
        cfg.true_params.beta = {b_true};
        cfg.r_rates = {0.4};
        cfg.r_caps = {3};
        cfg.m_rates = {0.4};
        cfg.m_caps = {3};
        cfg.n_customers = 150;
        cfg.horizon = 30;
        cfg.seed = 42000 + s;
        auto data = dpm::generate(cfg);
        try {
            auto d = dpm::build_lagged_design(data, 0);
            auto fit = dpm::fit_glm(d);
            const double want[3] = {c_true, a_true, b_true};
            bool ok = true;
            for (int j = 0; j < 3; ++j)
                if (std::abs(fit.coefficients[j] - want[j]) > 3.0 * fit.std_errors[j]) ok = false;
            covered += ok;
        } catch (const dpm::DegenerateDesign&) {
            // no purchases in this replicate; skip counts against coverage
        }
    }
    CHECK(covered >= 95);
}

TEST_CASE("IRLS matches the slow gradient-ascent oracle", "[baselines]") {
    dpm::detail::Rng rng(31);
    dpm::Dataset data;
    data.k = 1;
    data.l = 1;
    // 100 two-day customers -> 200 design rows.
    for (int i = 0; i < 100; ++i) {
        auto h = helpers::make_history(
            std::to_string(i),
            {{static_cast<int>(rng.uniform_int(2))}, {static_cast<int>(rng.uniform_int(2))}},
            {{static_cast<int>(rng.uniform_int(3))}, {static_cast<int>(rng.uniform_int(3))}},
            {0, 0});
        // Bernoulli labels from a moderate logistic model keep both classes
        // frequent so the optimum is interior.
        for (int t = 0; t < 2; ++t) {
            const double eta = 0.2 + 0.7 * h.r_day(t)[0] - 0.9 * h.m_day(t)[0];
            if (t == 1 && rng.bernoulli(dpm::detail::logistic(eta))) h.y[t] = 1;
        }
        data.customers.push_back(h);
    }
    auto d = dpm::build_lagged_design(data, 0);
    REQUIRE(d.n_rows >= 150);  // purchasers truncate at day 2
    auto fast = dpm::fit_glm(d, 100, 1e-10);
    auto slow = oracles::slow_glm(d, 1e-3, 1000000);
    REQUIRE(fast.converged);
    for (std::size_t j = 0; j < d.dim; ++j)
        CHECK(fast.coefficients[j] == Approx(slow[j]).margin(1e-4));
}

TEST_CASE("duplicating every row halves the squared standard errors", "[baselines]") {
    dpm::detail::Rng rng(8);
    // Two-day histories with the label on day 2.
    dpm::Dataset data2;
    data2.k = 1;
    data2.l = 0;
    for (int i = 0; i < 60; ++i) {
        const int r1 = static_cast<int>(rng.uniform_int(3));
        const int y2 = rng.bernoulli(dpm::detail::logistic(-0.5 + 0.8 * r1)) ? 1 : 0;
        data2.customers.push_back(
            helpers::make_history(std::to_string(i), {{r1}, {0}}, {{}, {}}, {0, y2}));
    }
    auto d1 = dpm::build_lagged_design(data2, 0);
    dpm::LaggedDesign d2 = d1;
    d2.n_rows *= 2;
    d2.x.insert(d2.x.end(), d1.x.begin(), d1.x.end());
    d2.y.insert(d2.y.end(), d1.y.begin(), d1.y.end());

    auto f1 = dpm::fit_glm(d1, 100, 1e-10);
    auto f2 = dpm::fit_glm(d2, 100, 1e-10);
    for (std::size_t j = 0; j < d1.dim; ++j) {
        CHECK(f2.coefficients[j] == Approx(f1.coefficients[j]).margin(1e-8));
        CHECK(f2.std_errors[j] == Approx(f1.std_errors[j] / std::sqrt(2.0)).margin(1e-8));
    }
}

TEST_CASE("single-class designs are rejected", "[baselines]") {
    dpm::Dataset data;
    data.k = 1;
    data.l = 0;
    data.customers.push_back(helpers::make_history("1", {{1}, {0}}, {{}, {}}, {0, 0}));
    auto d = dpm::build_lagged_design(data, 0);
    CHECK_THROWS_AS(dpm::fit_glm(d), dpm::DegenerateDesign);
}

TEST_CASE("predict_glm closed forms", "[baselines]") {
    dpm::GlmFit fit;
    fit.coefficients = {0.0, 0.0, 0.0};
    std::vector<double> row{1.0, 2.0, -1.0};
    CHECK(dpm::predict_glm(fit, row) == 0.5);

    // Published Product-B-style glm coefficients with the intercept pinned
    // to zero; a single first-channel exposure scores sigma(2.02031).
    dpm::GlmFit table;
    table.coefficients = {0.0, 2.02031, 2.74625, 3.16096, -0.59591, -0.32632, 1.30361};
    std::vector<double> exposure{1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(dpm::predict_glm(table, exposure) == Approx(0.8829).margin(5e-5));

    std::vector<double> flipped{1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    // The intercept is zero here, so negating the touch block mirrors the score.
    CHECK(dpm::predict_glm(table, flipped) == Approx(1.0 - 0.8829).margin(5e-5));
    CHECK_THROWS_AS(dpm::predict_glm(table, row), dpm::ContractViolation);
}

TEST_CASE("separation is flagged on runaway coefficients", "[baselines]") {
    // Perfectly separated labels: y = 1 exactly when r >= 1.
    dpm::Dataset data;
    data.k = 1;
    data.l = 0;
    for (int i = 0; i < 30; ++i) {
        const int r1 = i % 2;
        data.customers.push_back(helpers::make_history(std::to_string(i), {{r1}, {0}},
                                                       {{}, {}}, {0, r1}));
    }
    auto d = dpm::build_lagged_design(data, 0);
    auto fit = dpm::fit_glm(d, 200, 1e-12);
    CHECK(fit.separation_detected);
}
