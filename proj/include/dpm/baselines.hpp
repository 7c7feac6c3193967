#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpm/detail/linalg.hpp"
#include "dpm/detail/math.hpp"
#include "dpm/errors.hpp"
#include "dpm/model.hpp"

namespace dpm {

/// Cross-sectional design for the lagged logistic baselines: one row per
/// eligible (customer, day) with features [1, r_t, m_t, ..., r_{t-lag},
/// m_{t-lag}] and next-day purchase label. Days run in customer order, then
/// by t; rows stop before the first purchase, and a label past the horizon
/// counts as no purchase.
struct LaggedDesign {
    int lag = 0;
    int k = 0;
    int l = 0;
    std::size_t dim = 0;
    std::size_t n_rows = 0;
    std::vector<double> x;        // n_rows * dim, row-major
    std::vector<std::uint8_t> y;  // labels
    std::vector<std::string> feature_names;

    std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
};

inline LaggedDesign build_lagged_design(const Dataset& data, int lag) {
    if (lag < 0) throw ContractViolation("lag must be >= 0");
    LaggedDesign d;
    d.lag = lag;
    d.k = data.k;
    d.l = data.l;
    d.dim = 1 + static_cast<std::size_t>(lag + 1) * (data.k + data.l);

    d.feature_names.push_back("c");
    for (int s = 0; s <= lag; ++s) {
        for (int j = 1; j <= data.k; ++j)
            d.feature_names.push_back("alpha." + std::to_string(s) + "." + std::to_string(j));
        for (int j = 1; j <= data.l; ++j)
            d.feature_names.push_back("beta." + std::to_string(s) + "." + std::to_string(j));
    }

    for (const auto& h : data.customers) {
        // 1-based feature days t in [lag+1, t_last]: purchasers contribute
        // until the row labelled by the purchase, non-purchasers also emit a
        // final row labelled by the unobserved (no-purchase) day T+1.
        const int t_last = h.purchased() ? h.horizon - 1 : h.horizon;
        for (int t = lag + 1; t <= t_last; ++t) {
            d.x.push_back(1.0);
            for (int s = 0; s <= lag; ++s) {
                auto r = h.r_day(t - 1 - s);
                auto m = h.m_day(t - 1 - s);
                for (int j = 0; j < data.k; ++j) d.x.push_back(static_cast<double>(r[j]));
                for (int j = 0; j < data.l; ++j) d.x.push_back(static_cast<double>(m[j]));
            }
            d.y.push_back(t < h.horizon ? h.y[t] : 0);
            ++d.n_rows;
        }
    }
    if (d.n_rows == 0)
        throw DegenerateDesign("empty design: lag " + std::to_string(lag) +
                               " leaves no eligible rows");
    return d;
}

/// IRLS fit of the Bernoulli log-likelihood with Wald standard errors.
struct GlmFit {
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> p_values;
    bool converged = false;
    int iterations = 0;
    bool separation_detected = false;
};

namespace detail {

inline double glm_loglik(const LaggedDesign& d, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        const double* row = d.x.data() + i * d.dim;
        double eta = 0.0;
        for (std::size_t j = 0; j < d.dim; ++j) eta += row[j] * b[j];
        acc += d.y[i] ? log_logistic(eta) : log_logistic(-eta);
    }
    return acc;
}

}  // namespace detail

/// Newton/IRLS maximization with step-halving. Convergence when the score's
/// max component or the step's max component drops below tol. Separation is
/// flagged on runaway coefficients or a near-singular information matrix.
inline GlmFit fit_glm(const LaggedDesign& d, int max_iters = 100, double tol = 1e-8) {
    std::size_t pos = 0;
    for (auto v : d.y) pos += v;
    if (pos == 0 || pos == d.n_rows)
        throw DegenerateDesign("single-class labels: cannot fit logistic model");

    const std::size_t dim = d.dim;
    GlmFit fit;
    fit.coefficients.assign(dim, 0.0);
    std::vector<double> grad(dim), hess(dim * dim), eta(d.n_rows);
    double ll = detail::glm_loglik(d, fit.coefficients);
    double cond = 1.0;

    for (fit.iterations = 1; fit.iterations <= max_iters; ++fit.iterations) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t i = 0; i < d.n_rows; ++i) {
            const double* row = d.x.data() + i * dim;
            double e = 0.0;
            for (std::size_t j = 0; j < dim; ++j) e += row[j] * fit.coefficients[j];
            const double p = detail::logistic(e);
            const double w = p * (1.0 - p);
            const double resid = static_cast<double>(d.y[i]) - p;
            for (std::size_t j = 0; j < dim; ++j) {
                grad[j] += resid * row[j];
                for (std::size_t j2 = 0; j2 <= j; ++j2) hess[j * dim + j2] += w * row[j] * row[j2];
            }
        }
        for (std::size_t j = 0; j < dim; ++j)
            for (std::size_t j2 = j + 1; j2 < dim; ++j2) hess[j * dim + j2] = hess[j2 * dim + j];

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < tol) {
            fit.converged = true;
            break;
        }

        detail::Cholesky chol(hess, static_cast<int>(dim));
        if (!chol.ok) {
            fit.separation_detected = true;
            break;
        }
        cond = chol.condition_estimate();
        std::vector<double> step = chol.solve(grad);

        // Step-halving keeps the log-likelihood non-decreasing.
        double smax = 0.0;
        for (double s : step) smax = std::max(smax, std::abs(s));
        std::vector<double> trial(dim);
        double new_ll = -std::numeric_limits<double>::infinity();
        for (int half = 0; half < 40; ++half) {
            for (std::size_t j = 0; j < dim; ++j) trial[j] = fit.coefficients[j] + step[j];
            new_ll = detail::glm_loglik(d, trial);
            if (new_ll >= ll - 1e-12) break;
            for (double& s : step) s *= 0.5;
        }
        fit.coefficients = trial;
        ll = new_ll;
        if (smax < tol) {
            fit.converged = true;
            break;
        }
    }

    for (double b : fit.coefficients)
        if (std::abs(b) > 15.0) fit.separation_detected = true;
    if (cond > 1e10) fit.separation_detected = true;

    // Wald standard errors from the observed information at the optimum.
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        const double* row = d.x.data() + i * dim;
        double e = 0.0;
        for (std::size_t j = 0; j < dim; ++j) e += row[j] * fit.coefficients[j];
        const double p = detail::logistic(e);
        const double w = p * (1.0 - p);
        for (std::size_t j = 0; j < dim; ++j)
            for (std::size_t j2 = 0; j2 <= j; ++j2) hess[j * dim + j2] += w * row[j] * row[j2];
    }
    for (std::size_t j = 0; j < dim; ++j)
        for (std::size_t j2 = j + 1; j2 < dim; ++j2) hess[j * dim + j2] = hess[j2 * dim + j];

    fit.std_errors.assign(dim, std::numeric_limits<double>::quiet_NaN());
    fit.p_values.assign(dim, std::numeric_limits<double>::quiet_NaN());
    detail::Cholesky chol(hess, static_cast<int>(dim));
    if (chol.ok) {
        if (chol.condition_estimate() > 1e10) fit.separation_detected = true;
        std::vector<double> var = chol.inverse_diagonal();
        for (std::size_t j = 0; j < dim; ++j) {
            fit.std_errors[j] = std::sqrt(std::max(var[j], 0.0));
            if (fit.std_errors[j] > 0.0) {
                const double z = std::abs(fit.coefficients[j]) / fit.std_errors[j];
                fit.p_values[j] = 2.0 * (1.0 - detail::norm_cdf(z));
            }
        }
    } else {
        fit.separation_detected = true;
    }
    return fit;
}

/// Logistic of the linear score for one design row.
inline double predict_glm(const GlmFit& fit, std::span<const double> row) {
    if (row.size() != fit.coefficients.size())
        throw ContractViolation("predict_glm: dimension mismatch");
    double eta = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) eta += row[j] * fit.coefficients[j];
    return detail::logistic(eta);
}

}  // namespace dpm
