#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpm/detail/math.hpp"
#include "dpm/errors.hpp"

namespace dpm {

/// Model parameters theta = (c, phi, alpha, beta). The transition noise
/// scale is fixed to 1 and is not a parameter.
struct ModelParams {
    double c = 0.0;
    double phi = 0.0;
    std::vector<double> alpha;  // semi-targetable touch coefficients, length K
    std::vector<double> beta;   // targetable touch coefficients, length L

    int k() const { return static_cast<int>(alpha.size()); }
    int l() const { return static_cast<int>(beta.size()); }

    bool all_finite() const {
        if (!std::isfinite(c) || !std::isfinite(phi)) return false;
        for (double v : alpha)
            if (!std::isfinite(v)) return false;
        for (double v : beta)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// One customer's observation window: daily touch counts and purchase
/// indicators, truncated at the first purchase. Days are 1-based in the
/// math; storage is 0-based and day-major.
struct CustomerHistory {
    std::string id;
    std::optional<std::string> segment;
    int horizon = 0;               // T
    int k = 0;                     // semi-targetable channels
    int l = 0;                     // targetable channels
    std::vector<std::uint16_t> r;  // T x K, day-major
    std::vector<std::uint16_t> m;  // T x L, day-major
    std::vector<std::uint8_t> y;   // length T, values 0/1

    std::span<const std::uint16_t> r_day(int t) const {  // t in [0, T)
        return {r.data() + static_cast<std::size_t>(t) * k, static_cast<std::size_t>(k)};
    }
    std::span<const std::uint16_t> m_day(int t) const {
        return {m.data() + static_cast<std::size_t>(t) * l, static_cast<std::size_t>(l)};
    }

    bool purchased() const { return horizon > 0 && y[horizon - 1] == 1; }
};

/// Per-customer latent sequences: filtered propensity x_1..x_T plus the
/// prior anchor x0, and predictive propensity s_1..s_{T+1}.
struct PropensityPath {
    double x0 = 0.0;        // prior anchor state the first prediction is made from
    std::vector<double> x;  // length T
    std::vector<double> s;  // length T+1; s[t] emits y[t], s[T] is post-horizon
};

/// A loaded dataset: constant channel counts plus customer histories.
struct Dataset {
    int k = 0;
    int l = 0;
    std::vector<CustomerHistory> customers;

    std::size_t size() const { return customers.size(); }
    bool empty() const { return customers.empty(); }
};

/// Validates the CustomerHistory invariants; throws ValidationError naming
/// the customer on the first violation.
inline void validate_history(const CustomerHistory& h) {
    auto fail = [&](const std::string& what) {
        throw ValidationError("customer '" + h.id + "': " + what);
    };
    if (h.horizon < 1) fail("horizon must be >= 1");
    if (h.r.size() != static_cast<std::size_t>(h.horizon) * h.k) fail("r size mismatch");
    if (h.m.size() != static_cast<std::size_t>(h.horizon) * h.l) fail("m size mismatch");
    if (h.y.size() != static_cast<std::size_t>(h.horizon)) fail("y size mismatch");
    int purchases = 0;
    for (int t = 0; t < h.horizon; ++t) {
        if (h.y[t] > 1) fail("y out of {0,1} at day " + std::to_string(t + 1));
        purchases += h.y[t];
    }
    if (purchases > 1) fail("more than one purchase");
    if (purchases == 1 && h.y[h.horizon - 1] != 1)
        fail("history continues past the first purchase");
}

inline void check_dims(const ModelParams& p, std::size_t k, std::size_t l) {
    if (p.alpha.size() != k || p.beta.size() != l)
        throw ContractViolation("parameter/touch dimension mismatch: params are (" +
                                std::to_string(p.alpha.size()) + "," + std::to_string(p.beta.size()) +
                                "), touches are (" + std::to_string(k) + "," + std::to_string(l) + ")");
}

/// Touch contribution alpha'r_t + beta'm_t for one day.
template <typename RSpan, typename MSpan>
inline double touch_term(const ModelParams& p, const RSpan& r_t, const MSpan& m_t) {
    check_dims(p, r_t.size(), m_t.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < r_t.size(); ++j) acc += p.alpha[j] * static_cast<double>(r_t[j]);
    for (std::size_t j = 0; j < m_t.size(); ++j) acc += p.beta[j] * static_cast<double>(m_t[j]);
    return acc;
}

/// Next-day predictive propensity s_{t+1} = c + phi*x_t + alpha'r_t + beta'm_t.
/// Pure and deterministic.
template <typename RSpan, typename MSpan>
inline double predict_propensity(const ModelParams& p, double x_t, const RSpan& r_t, const MSpan& m_t) {
    if (!std::isfinite(x_t)) throw ContractViolation("predict_propensity: non-finite state");
    return p.c + p.phi * x_t + touch_term(p, r_t, m_t);
}

inline double predict_propensity(const ModelParams& p, double x_t,
                                 std::span<const double> r_t, std::span<const double> m_t) {
    return predict_propensity<>(p, x_t, r_t, m_t);
}

/// Purchase probability 1/(1+exp(-s)); stable for |s| well beyond 700.
inline double purchase_prob(double s) {
    if (!std::isfinite(s)) throw ContractViolation("purchase_prob: non-finite input");
    return detail::logistic(s);
}

/// Stationary distribution of the touch-free recursion x' = c + phi*x + eps.
/// Falls back to the standard normal when |phi| >= 1.
struct StationaryPrior {
    double mean = 0.0;
    double variance = 1.0;
    bool fallback = false;
};

inline StationaryPrior stationary_prior(const ModelParams& p) {
    if (std::abs(p.phi) < 1.0)
        return {p.c / (1.0 - p.phi), 1.0 / (1.0 - p.phi * p.phi), false};
    return {0.0, 1.0, true};
}

/// Recomputes the predictive sequence s_1..s_{T+1} from a filtered sequence:
/// s_1 = c + phi*x0 (no day-0 touches), s_{t+1} = predict(x_t, r_t, m_t).
inline std::vector<double> recompute_predictions(const ModelParams& params,
                                                 const CustomerHistory& h,
                                                 std::span<const double> x, double x0) {
    check_dims(params, h.k, h.l);
    if (x.size() != static_cast<std::size_t>(h.horizon))
        throw ContractViolation("recompute_predictions: path/history length mismatch");
    std::vector<double> s(h.horizon + 1);
    s[0] = params.c + params.phi * x0;
    for (int t = 0; t < h.horizon; ++t)
        s[t + 1] = predict_propensity(params, x[t], h.r_day(t), h.m_day(t));
    return s;
}

/// Per-customer term of the conditional-likelihood objective:
///   sum_t [ log Bernoulli(y_t; logistic(s_t)) + log N(x_t; s_t, 1) ].
/// Every observed y_t has an emitting s_t; there is no emission term for
/// s_{T+1} since no observation exists past the horizon.
inline double log_joint(const ModelParams& params, const CustomerHistory& h,
                        const PropensityPath& path) {
    check_dims(params, h.k, h.l);
    if (path.x.size() != static_cast<std::size_t>(h.horizon) ||
        path.s.size() != static_cast<std::size_t>(h.horizon) + 1)
        throw ContractViolation("log_joint: path/history length mismatch");
    double acc = 0.0;
    for (int t = 0; t < h.horizon; ++t) {
        double s = path.s[t];
        acc += h.y[t] ? detail::log_logistic(s) : detail::log_logistic(-s);
        acc += detail::log_normal_unit(path.x[t], s);
    }
    return acc;
}

}  // namespace dpm
