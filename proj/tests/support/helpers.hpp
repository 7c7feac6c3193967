#pragma once

#include <string>
#include <vector>

#include "dpm/detail/rng.hpp"
#include "dpm/model.hpp"

namespace helpers {

/// Hand-built history from day-major touch matrices.
inline dpm::CustomerHistory make_history(std::string id,
                                         const std::vector<std::vector<int>>& r_days,
                                         const std::vector<std::vector<int>>& m_days,
                                         const std::vector<int>& y) {
    dpm::CustomerHistory h;
    h.id = std::move(id);
    h.horizon = static_cast<int>(y.size());
    h.k = h.horizon ? static_cast<int>(r_days[0].size()) : 0;
    h.l = h.horizon ? static_cast<int>(m_days[0].size()) : 0;
    for (int t = 0; t < h.horizon; ++t) {
        for (int v : r_days[t]) h.r.push_back(static_cast<std::uint16_t>(v));
        for (int v : m_days[t]) h.m.push_back(static_cast<std::uint16_t>(v));
        h.y.push_back(static_cast<std::uint8_t>(y[t]));
    }
    return h;
}

/// Random small history: touch counts in [0, 2], optional purchase ending.
inline dpm::CustomerHistory random_history(dpm::detail::Rng& rng, int t_max, int k, int l,
                                           double purchase_prob = 0.5) {
    const int t_len = 1 + static_cast<int>(rng.uniform_int(t_max));
    dpm::CustomerHistory h;
    h.id = "rnd" + std::to_string(rng.next() % 100000);
    h.horizon = t_len;
    h.k = k;
    h.l = l;
    for (int t = 0; t < t_len; ++t) {
        for (int j = 0; j < k; ++j) h.r.push_back(static_cast<std::uint16_t>(rng.uniform_int(3)));
        for (int j = 0; j < l; ++j) h.m.push_back(static_cast<std::uint16_t>(rng.uniform_int(3)));
        h.y.push_back(0);
    }
    if (rng.uniform() < purchase_prob) h.y[t_len - 1] = 1;
    return h;
}

inline dpm::ModelParams random_params(dpm::detail::Rng& rng, int k, int l) {
    dpm::ModelParams p;
    p.c = -2.0 + 4.0 * rng.uniform();
    p.phi = -0.9 + 1.8 * rng.uniform();
    for (int j = 0; j < k; ++j) p.alpha.push_back(-1.0 + 2.0 * rng.uniform());
    for (int j = 0; j < l; ++j) p.beta.push_back(-1.0 + 2.0 * rng.uniform());
    return p;
}

}  // namespace helpers
