#pragma once

#include <cmath>
#include <vector>

#include "dpm/errors.hpp"

namespace dpm::detail {

/// Dense symmetric positive-definite solver for the small systems that show
/// up in IRLS (dimension <= a few dozen). Row-major storage.
struct Cholesky {
    int n = 0;
    std::vector<double> l;  // lower triangular factor, row-major
    bool ok = false;

    explicit Cholesky(const std::vector<double>& a, int dim) : n(dim), l(a) {
        for (int j = 0; j < n; ++j) {
            double d = l[j * n + j];
            for (int k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
            if (!(d > 0.0) || !std::isfinite(d)) return;
            d = std::sqrt(d);
            l[j * n + j] = d;
            for (int i = j + 1; i < n; ++i) {
                double v = l[i * n + j];
                for (int k = 0; k < j; ++k) v -= l[i * n + k] * l[j * n + k];
                l[i * n + j] = v / d;
            }
        }
        ok = true;
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        std::vector<double> x(b);
        for (int i = 0; i < n; ++i) {
            double v = x[i];
            for (int k = 0; k < i; ++k) v -= l[i * n + k] * x[k];
            x[i] = v / l[i * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double v = x[i];
            for (int k = i + 1; k < n; ++k) v -= l[k * n + i] * x[k];
            x[i] = v / l[i * n + i];
        }
        return x;
    }

    /// Diagonal of the inverse of the factored matrix.
    std::vector<double> inverse_diagonal() const {
        std::vector<double> diag(n, 0.0);
        std::vector<double> e(n, 0.0);
        for (int j = 0; j < n; ++j) {
            std::fill(e.begin(), e.end(), 0.0);
            e[j] = 1.0;
            diag[j] = solve(e)[j];
        }
        return diag;
    }

    /// Crude condition estimate from the squared factor diagonal.
    double condition_estimate() const {
        double lo = l[0], hi = l[0];
        for (int j = 0; j < n; ++j) {
            lo = std::min(lo, l[j * n + j]);
            hi = std::max(hi, l[j * n + j]);
        }
        if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
        return (hi / lo) * (hi / lo);
    }
};

}  // namespace dpm::detail
