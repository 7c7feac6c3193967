#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace dpm::detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

/// Numerically stable logistic; sign-split so exp never overflows.
inline double logistic(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    double t = std::exp(s);
    return t / (1.0 + t);
}

/// log(logistic(s)), stable over the whole double range.
inline double log_logistic(double s) {
    if (s >= 0.0) return -std::log1p(std::exp(-s));
    return s - std::log1p(std::exp(s));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log N(x; mean, 1)
inline double log_normal_unit(double x, double mean) {
    double d = x - mean;
    return -0.5 * (kLog2Pi + d * d);
}

/// Standard normal CDF.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

/// Batched exp with a vectorizable polynomial kernel (no libm call in the
/// loop, so the compiler can unroll/vectorize it). Max relative error is
/// ~3e-10, plenty for particle weights; exact model-level probabilities use
/// std::exp. Inputs must be in (-700, 700).
inline void exp_batch(const double* in, double* out, int n) {
    constexpr double kLog2E = 1.4426950408889634074;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    for (int i = 0; i < n; ++i) {
        double x = in[i];
        double kd = __builtin_floor(kLog2E * x + 0.5);
        double r = (x - kd * kLn2Hi) - kd * kLn2Lo;
        double p = 2.48015872951767931e-05;
        p = p * r + 1.98412698809069797e-04;
        p = p * r + 1.38888888939977128e-03;
        p = p * r + 8.33333333332371417e-03;
        p = p * r + 4.16666666665409524e-02;
        p = p * r + 1.66666666666666019e-01;
        p = p * r + 0.5;
        p = p * r + 1.0;
        p = p * r + 1.0;
        auto ki = static_cast<std::int64_t>(kd);
        std::uint64_t bits;
        std::memcpy(&bits, &p, 8);
        bits += static_cast<std::uint64_t>(ki) << 52;
        double res;
        std::memcpy(&res, &bits, 8);
        out[i] = res;
    }
}

}  // namespace dpm::detail
