#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace dpm::detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Mix a base seed with up to two stream identifiers. Used to derive
/// independent, reproducible substreams (per customer, per iteration, ...).
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(base ^ 0x6a09e667f3bcc909ULL);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return h;
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

// Ziggurat tables for the standard normal (Marsaglia & Tsang, 128 layers).
struct ZigguratTables {
    double x[129];
    double y[129];
    std::uint64_t k[128];

    ZigguratTables() {
        const double r = 3.442619855899;
        const double v = 9.91256303526217e-3;
        x[0] = v / std::exp(-0.5 * r * r);
        x[1] = r;
        for (int i = 2; i < 128; ++i)
            x[i] = std::sqrt(-2.0 * std::log(v / x[i - 1] + std::exp(-0.5 * x[i - 1] * x[i - 1])));
        x[128] = 0.0;
        for (int i = 0; i < 129; ++i) y[i] = std::exp(-0.5 * x[i] * x[i]);
        for (int i = 0; i < 128; ++i)
            k[i] = static_cast<std::uint64_t>((x[i + 1] / x[i]) * 9007199254740992.0);  // 2^53
    }
};

inline const ZigguratTables& ziggurat() {
    static const ZigguratTables tables;
    return tables;
}

/// Deterministic random stream: xoshiro256++ core with inversion/ziggurat
/// samplers. Self-contained so that results are bit-stable across standard
/// library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& w : state_) {
            z = splitmix64(z);
            w = z;
        }
    }

    std::uint64_t next() {
        std::uint64_t r = rotl(state_[0] + state_[3], 23) + state_[0];
        std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return r;
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be >= 1.
    std::uint64_t uniform_int(std::uint64_t bound) {
        // Rejection sampling on the top bits; bias-free.
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal draw (ziggurat).
    double normal() {
        const ZigguratTables& t = ziggurat();
        for (;;) {
            std::uint64_t u = next();
            int i = static_cast<int>(u & 127);
            std::uint64_t uu = u >> 11;
            double sign = (u & 256) ? 1.0 : -1.0;
            if (uu < t.k[i]) return sign * (static_cast<double>(uu) * 0x1.0p-53) * t.x[i];
            if (i == 0) {
                const double r = 3.442619855899;
                double xx, yy;
                do {
                    xx = -std::log(1.0 - uniform()) / r;
                    yy = -std::log(1.0 - uniform());
                } while (yy + yy < xx * xx);
                return sign * (r + xx);
            }
            double xx = (static_cast<double>(uu) * 0x1.0p-53) * t.x[i];
            if (t.y[i] + uniform() * (t.y[i + 1] - t.y[i]) < std::exp(-0.5 * xx * xx))
                return sign * xx;
        }
    }

    /// Poisson draw by CDF inversion; intended for small means (< ~30).
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        double u = uniform();
        double p = std::exp(-mean);
        double c = p;
        int k = 0;
        while (u > c && k < 1000) {
            ++k;
            p *= mean / k;
            c += p;
        }
        return k;
    }

    /// New independent stream keyed by (a, b) on top of this stream's state.
    Rng derive(std::uint64_t a, std::uint64_t b = 0) const {
        return Rng(derive_seed(state_[0] ^ state_[2], a, b));
    }

private:
    std::uint64_t state_[4];
};

}  // namespace dpm::detail
