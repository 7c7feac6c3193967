#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dpm/model.hpp"
#include "support/helpers.hpp"

using Catch::Approx;

namespace {

std::vector<double> dvec(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_CASE("predict_propensity identity propagation", "[model]") {
    dpm::ModelParams p;
    p.c = 0.0;
    p.phi = 1.0;
    p.alpha = {0.0, 0.0};
    p.beta = {0.0};
    CHECK(dpm::predict_propensity(p, 2.5, dvec({3, 7}), dvec({1})) == 2.5);
}

TEST_CASE("predict_propensity pure offset", "[model]") {
    dpm::ModelParams p;
    p.c = 0.7;
    p.phi = 0.0;
    p.alpha = {};
    p.beta = {};
    CHECK(dpm::predict_propensity(p, 5.0, dvec({}), dvec({})) == Approx(0.7));
}

TEST_CASE("predict_propensity with the Product B damping value", "[model]") {
    dpm::ModelParams p;
    p.c = -9.0;
    p.phi = 0.53;
    p.alpha = {1.0, 1.0, 1.0};
    p.beta = {1.0, 1.0, 1.0};
    const double s =
        dpm::predict_propensity(p, 1.0, dvec({1, 2, 0}), dvec({0, 0, 0}));
    CHECK(s == Approx(-5.47).epsilon(1e-12));
}

TEST_CASE("predict_propensity rejects dimension mismatches", "[model]") {
    dpm::ModelParams p;
    p.alpha = {1.0};
    p.beta = {};
    CHECK_THROWS_AS(dpm::predict_propensity(p, 0.0, dvec({1, 2}), dvec({})),
                    dpm::ContractViolation);
}

TEST_CASE("predict_propensity is jointly linear", "[model]") {
    dpm::detail::Rng rng(101);
    for (int rep = 0; rep < 50; ++rep) {
        dpm::ModelParams base = helpers::random_params(rng, 2, 2);
        const double a = -2.0 + 4.0 * rng.uniform(), b = -2.0 + 4.0 * rng.uniform();
        auto mix = [&](double u, double v) { return a * u + b * v; };

        dpm::ModelParams pu = base, pv = base, pm = base;
        const double cu = rng.normal(), cv = rng.normal();
        pu.c = cu;
        pv.c = cv;
        pm.c = mix(cu, cv);
        const double xu = rng.normal(), xv = rng.normal();
        std::vector<double> ru{rng.normal(), rng.normal()}, rv{rng.normal(), rng.normal()};
        std::vector<double> mu{rng.normal(), rng.normal()}, mv{rng.normal(), rng.normal()};
        std::vector<double> rm{mix(ru[0], rv[0]), mix(ru[1], rv[1])};
        std::vector<double> mm{mix(mu[0], mv[0]), mix(mu[1], mv[1])};

        const double lhs = dpm::predict_propensity(pm, mix(xu, xv), rm, mm);
        const double rhs = a * dpm::predict_propensity(pu, xu, ru, mu) +
                           b * dpm::predict_propensity(pv, xv, rv, mv);
        CHECK(lhs == Approx(rhs).margin(1e-10));
    }
}

TEST_CASE("purchase_prob closed forms and stability", "[model]") {
    CHECK(dpm::purchase_prob(0.0) == 0.5);
    CHECK(dpm::purchase_prob(std::log(3.0)) == Approx(0.75).epsilon(1e-12));
    const double tail = dpm::purchase_prob(-50.0);
    CHECK(tail == Approx(1.9287498479639178e-22).epsilon(1e-9));
    CHECK(tail > 0.0);
    CHECK(std::isfinite(dpm::purchase_prob(700.0)));
    CHECK(std::isfinite(dpm::purchase_prob(-700.0)));
    CHECK(dpm::purchase_prob(700.0) > 0.0);
    CHECK(dpm::purchase_prob(-700.0) > 0.0);
    CHECK_THROWS_AS(dpm::purchase_prob(std::numeric_limits<double>::infinity()),
                    dpm::ContractViolation);
}

TEST_CASE("purchase_prob symmetry", "[model]") {
    dpm::detail::Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const double s = -40.0 + 80.0 * rng.uniform();
        CHECK(std::abs(dpm::purchase_prob(s) + dpm::purchase_prob(-s) - 1.0) < 1e-12);
    }
}

TEST_CASE("log_joint single-day closed form", "[model]") {
    dpm::ModelParams p;
    p.c = 0.0;
    p.phi = 0.0;
    auto h = helpers::make_history("1", {{}}, {{}}, {0});
    dpm::PropensityPath path;
    path.x0 = 0.0;
    path.x = {0.0};
    path.s = dpm::recompute_predictions(p, h, path.x, path.x0);
    REQUIRE(path.s.size() == 2);
    CHECK(path.s[0] == 0.0);
    const double expected = std::log(0.5) - 0.5 * std::log(2.0 * M_PI);
    CHECK(dpm::log_joint(p, h, path) == Approx(expected).epsilon(1e-12));
    CHECK(expected == Approx(-1.612).margin(5e-4));
}

TEST_CASE("log_joint matches an independent termwise summation", "[model]") {
    // All-zero touches, c = 0, phi = 0: every s_t is 0, so the value must be
    // sum log sigma(-s_t) + sum log N(x_t; 0, 1) summed term by term.
    dpm::ModelParams p;
    p.c = 0.0;
    p.phi = 0.0;
    p.alpha = {0.0};
    p.beta = {0.0};
    const int t_len = 7;
    std::vector<std::vector<int>> zero(t_len, std::vector<int>{0});
    auto h = helpers::make_history("1", zero, zero, std::vector<int>(t_len, 0));
    dpm::detail::Rng rng(42);
    dpm::PropensityPath path;
    path.x0 = 0.0;
    for (int t = 0; t < t_len; ++t) path.x.push_back(rng.normal());
    path.s = dpm::recompute_predictions(p, h, path.x, path.x0);

    double expected = 0.0;
    for (int t = 0; t < t_len; ++t) {
        expected += std::log(1.0 - 1.0 / (1.0 + std::exp(-path.s[t])));
        expected += -0.5 * std::log(2.0 * M_PI) -
                    0.5 * (path.x[t] - path.s[t]) * (path.x[t] - path.s[t]);
    }
    CHECK(dpm::log_joint(p, h, path) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("log_joint boundary: x_T only moves the Gaussian term", "[model]") {
    dpm::detail::Rng rng(3);
    dpm::ModelParams p = helpers::random_params(rng, 1, 1);
    auto h = helpers::make_history("1", {{1}, {0}, {2}}, {{0}, {1}, {0}}, {0, 0, 0});
    dpm::PropensityPath path;
    path.x0 = 0.3;
    path.x = {0.1, -0.4, 0.8};
    path.s = dpm::recompute_predictions(p, h, path.x, path.x0);

    dpm::PropensityPath moved = path;
    moved.x[2] += 1.7;  // s held fixed: no emission exists past the horizon
    const double diff = dpm::log_joint(p, h, moved) - dpm::log_joint(p, h, path);
    const double gauss_diff = dpm::detail::log_normal_unit(moved.x[2], path.s[2]) -
                              dpm::detail::log_normal_unit(path.x[2], path.s[2]);
    CHECK(diff == Approx(gauss_diff).epsilon(1e-12));
}

TEST_CASE("log_joint strictly decreases when x_t leaves s_t", "[model]") {
    dpm::detail::Rng rng(9);
    dpm::ModelParams p = helpers::random_params(rng, 1, 1);
    auto h = helpers::make_history("1", {{0}, {1}}, {{1}, {0}}, {0, 1});
    dpm::PropensityPath path;
    path.x0 = 0.0;
    path.x = {0.5, 0.2};
    path.s = dpm::recompute_predictions(p, h, path.x, path.x0);
    dpm::PropensityPath at_max = path;
    at_max.x[0] = path.s[0];
    const double peak = dpm::log_joint(p, h, at_max);
    for (double delta : {-1.0, -0.25, 0.25, 1.0}) {
        dpm::PropensityPath off = at_max;
        off.x[0] = path.s[0] + delta;
        CHECK(dpm::log_joint(p, h, off) < peak);
    }
}

TEST_CASE("history validation enforces first-purchase truncation", "[model]") {
    auto ok = helpers::make_history("a", {{0}, {0}}, {{0}, {0}}, {0, 1});
    CHECK_NOTHROW(dpm::validate_history(ok));
    auto mid_purchase = helpers::make_history("b", {{0}, {0}}, {{0}, {0}}, {1, 0});
    CHECK_THROWS_AS(dpm::validate_history(mid_purchase), dpm::ValidationError);
    auto two = helpers::make_history("c", {{0}, {0}}, {{0}, {0}}, {1, 1});
    CHECK_THROWS_AS(dpm::validate_history(two), dpm::ValidationError);
}
