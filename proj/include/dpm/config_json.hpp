#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/errors.hpp"
#include "dpm/estimation.hpp"
#include "dpm/filter.hpp"
#include "dpm/simulate.hpp"

namespace dpm {

namespace detail {

inline void check_keys(const nlohmann::ordered_json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok)
            throw ContractViolation("unknown key '" + it.key() + "' in " + where +
                                    " config (strict schema)");
    }
}

template <typename T>
inline void maybe(const nlohmann::ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json params_to_json(const ModelParams& p) {
    return {{"c", p.c}, {"phi", p.phi}, {"alpha", p.alpha}, {"beta", p.beta}};
}

inline ModelParams params_from_json(const nlohmann::ordered_json& j) {
    detail::check_keys(j, {"c", "phi", "alpha", "beta"}, "params");
    ModelParams p;
    detail::maybe(j, "c", p.c);
    detail::maybe(j, "phi", p.phi);
    detail::maybe(j, "alpha", p.alpha);
    detail::maybe(j, "beta", p.beta);
    return p;
}

inline nlohmann::ordered_json sim_config_to_json(const SimConfig& c) {
    nlohmann::ordered_json j;
    j["params"] = params_to_json(c.true_params);
    j["n_customers"] = c.n_customers;
    j["horizon"] = c.horizon;
    j["r_rates"] = c.r_rates;
    j["m_rates"] = c.m_rates;
    j["r_caps"] = c.r_caps;
    j["m_caps"] = c.m_caps;
    j["seed"] = c.seed;
    j["targeting_strength"] = c.targeting_strength;
    j["targeting_lag"] = c.targeting_lag;
    j["disable_noise"] = c.disable_noise;
    return j;
}

/// Optional extra key "calibrate_target_rate": when present the CLI solves
/// for c before generating.
inline SimConfig sim_config_from_json(const nlohmann::ordered_json& j) {
    detail::check_keys(j,
                       {"params", "n_customers", "horizon", "r_rates", "m_rates", "r_caps",
                        "m_caps", "seed", "targeting_strength", "targeting_lag", "disable_noise",
                        "calibrate_target_rate"},
                       "simulate");
    SimConfig c;
    if (j.contains("params")) c.true_params = params_from_json(j.at("params"));
    detail::maybe(j, "n_customers", c.n_customers);
    detail::maybe(j, "horizon", c.horizon);
    detail::maybe(j, "r_rates", c.r_rates);
    detail::maybe(j, "m_rates", c.m_rates);
    detail::maybe(j, "r_caps", c.r_caps);
    detail::maybe(j, "m_caps", c.m_caps);
    detail::maybe(j, "seed", c.seed);
    detail::maybe(j, "targeting_strength", c.targeting_strength);
    detail::maybe(j, "targeting_lag", c.targeting_lag);
    detail::maybe(j, "disable_noise", c.disable_noise);
    if (c.r_caps.empty()) c.r_caps.assign(c.r_rates.size(), 3);
    if (c.m_caps.empty()) c.m_caps.assign(c.m_rates.size(), 3);
    return c;
}

inline nlohmann::ordered_json filter_config_to_json(const FilterConfig& c) {
    nlohmann::ordered_json j;
    j["particle_count"] = c.particle_count;
    j["resample_threshold"] = c.resample_threshold;
    j["path_mode"] = c.path_mode == PathMode::kMapAncestral ? "map-ancestral" : "posterior-mean";
    j["seed"] = c.seed;
    return j;
}

inline FilterConfig filter_config_from_json(const nlohmann::ordered_json& j) {
    detail::check_keys(j, {"particle_count", "resample_threshold", "path_mode", "seed"}, "filter");
    FilterConfig c;
    detail::maybe(j, "particle_count", c.particle_count);
    detail::maybe(j, "resample_threshold", c.resample_threshold);
    if (j.contains("path_mode")) {
        const std::string mode = j.at("path_mode").get<std::string>();
        if (mode == "posterior-mean")
            c.path_mode = PathMode::kPosteriorMean;
        else if (mode == "map-ancestral")
            c.path_mode = PathMode::kMapAncestral;
        else
            throw ContractViolation("path_mode must be posterior-mean or map-ancestral");
    }
    detail::maybe(j, "seed", c.seed);
    return c;
}

inline nlohmann::ordered_json sgd_config_to_json(const SgdConfig& c) {
    nlohmann::ordered_json j;
    j["gamma0"] = c.gamma0;
    j["schedule_exponent"] = c.schedule_exponent;
    j["max_iters"] = c.max_iters;
    j["pos_sample_prob"] = c.pos_sample_prob;
    j["convergence_window"] = c.convergence_window;
    j["convergence_tol"] = c.convergence_tol;
    j["thin"] = c.thin;
    j["reweight_gradients"] = c.reweight_gradients;
    j["filter"] = filter_config_to_json(c.filter);
    j["seed"] = c.seed;
    return j;
}

inline SgdConfig sgd_config_from_json(const nlohmann::ordered_json& j) {
    detail::check_keys(j,
                       {"gamma0", "schedule_exponent", "max_iters", "pos_sample_prob",
                        "convergence_window", "convergence_tol", "thin", "reweight_gradients",
                        "filter", "seed"},
                       "fit");
    SgdConfig c;
    detail::maybe(j, "gamma0", c.gamma0);
    detail::maybe(j, "schedule_exponent", c.schedule_exponent);
    detail::maybe(j, "max_iters", c.max_iters);
    detail::maybe(j, "pos_sample_prob", c.pos_sample_prob);
    detail::maybe(j, "convergence_window", c.convergence_window);
    detail::maybe(j, "convergence_tol", c.convergence_tol);
    detail::maybe(j, "thin", c.thin);
    detail::maybe(j, "reweight_gradients", c.reweight_gradients);
    if (j.contains("filter")) c.filter = filter_config_from_json(j.at("filter"));
    detail::maybe(j, "seed", c.seed);
    return c;
}

}  // namespace dpm
