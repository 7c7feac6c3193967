#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpm/detail/math.hpp"
#include "dpm/detail/rng.hpp"
#include "dpm/errors.hpp"
#include "dpm/model.hpp"

namespace dpm {

enum class PathMode { kPosteriorMean, kMapAncestral };

struct FilterConfig {
    int particle_count = 1000;
    double resample_threshold = 0.5;  // resample when ESS < threshold * P
    PathMode path_mode = PathMode::kPosteriorMean;
    std::uint64_t seed = 0;
    // Test hooks: zero-information filtering (all likelihood factors 1) and
    // noise-free propagation (all particles follow the deterministic recursion).
    bool disable_likelihood = false;
    bool disable_noise = false;

    void validate() const {
        if (particle_count < 2) throw ContractViolation("particle_count must be >= 2");
        if (!(resample_threshold > 0.0 && resample_threshold <= 1.0))
            throw ContractViolation("resample_threshold must be in (0,1]");
    }
};

/// Weighted Monte Carlo ensemble over the current latent state.
struct ParticleSet {
    std::vector<double> values;
    std::vector<double> weights;      // normalized, sum 1
    std::vector<std::uint32_t> ancestors;  // parent index from the previous step
    bool prior_fallback = false;      // init fell back to N(0,1) because |phi| >= 1

    std::size_t size() const { return values.size(); }
};

inline void validate_particles(const ParticleSet& ps) {
    if (ps.size() < 2) throw ContractViolation("particle set must have P >= 2");
    if (ps.weights.size() != ps.size()) throw ContractViolation("weights/values size mismatch");
    double sum = 0.0;
    for (double w : ps.weights) {
        if (!(w >= 0.0)) throw ContractViolation("negative particle weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractViolation("particle weights do not sum to 1");
}

namespace detail {

// Per-step buffers reused across days.
struct FilterScratch {
    std::vector<double> z;   // clamped logit argument per particle
    std::vector<double> ez;  // exp(z)
    std::vector<double> gathered;
    std::vector<std::uint32_t> parents;

    void resize(std::size_t p) {
        z.resize(p);
        ez.resize(p);
        gathered.resize(p);
        parents.resize(p);
    }
};

inline double ess(const std::vector<double>& w) {
    double s = 0.0, s2 = 0.0;
    for (double v : w) {
        s += v;
        s2 += v * v;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

// Systematic resampling; fills parents with the selected ancestor indices
// and resets weights to uniform. O(P), single uniform draw.
inline void systematic_resample(std::vector<double>& values, std::vector<double>& weights,
                                FilterScratch& scratch, Rng& rng) {
    const std::size_t p = values.size();
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t i = 0;
    for (std::size_t j = 0; j < p; ++j) {
        const double target = (u + static_cast<double>(j)) / static_cast<double>(p);
        while (cum + weights[i] < target && i + 1 < p) cum += weights[i++];
        scratch.parents[j] = static_cast<std::uint32_t>(i);
        scratch.gathered[j] = values[i];
    }
    values.swap(scratch.gathered);
    std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(p));
}

struct StepResult {
    double posterior_mean = 0.0;
    double pre_update_score = 0.0;  // sum_i w_pre_i * logistic(s_i)
    bool resampled = false;
};

// One filter day: propagate x -> s -> x', weight by the emission at s, and
// resample on low ESS. `day_const` is c + alpha'r + beta'm for the day.
// `day` is the 1-based index of the absorbed observation (for diagnostics).
inline StepResult filter_day(const ModelParams& params, std::vector<double>& values,
                             std::vector<double>& weights, double day_const, int y,
                             const FilterConfig& cfg, FilterScratch& scratch, Rng& rng,
                             int day, bool want_score) {
    const std::size_t p = values.size();
    const double phi = params.phi;
    const bool flip = (y == 0);

    double zmax = -std::numeric_limits<double>::infinity();
    StepResult out;
    for (std::size_t i = 0; i < p; ++i) {
        double s = day_const + phi * values[i];
        double z = flip ? -s : s;
        if (z > zmax) zmax = z;
        scratch.z[i] = std::clamp(z, -700.0, 700.0);
        // The one-step-ahead score must not depend on the day's own label,
        // so it gets its own bit-stable logistic evaluation.
        if (want_score) out.pre_update_score += weights[i] * logistic(s);
        values[i] = cfg.disable_noise ? s : s + rng.normal();
    }

    if (cfg.disable_likelihood) {
        double sw = 0.0, swx = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            sw += weights[i];
            swx += weights[i] * values[i];
        }
        out.posterior_mean = swx / sw;
        return out;
    }

    if (zmax < -700.0)
        throw DegenerateLikelihood(
            "all particle weights underflowed at day " + std::to_string(day), day);

    exp_batch(scratch.z.data(), scratch.ez.data(), static_cast<int>(p));

    double sw = 0.0, swx = 0.0, sw2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        const double ez = scratch.ez[i];
        const double f = ez / (1.0 + ez);  // Bernoulli(y; logistic(s)) of this particle
        const double w = weights[i] * f;
        weights[i] = w;
        sw += w;
        swx += w * values[i];
        sw2 += w * w;
    }
    if (!(sw > 0.0))
        throw DegenerateLikelihood(
            "all particle weights underflowed at day " + std::to_string(day), day);

    out.posterior_mean = swx / sw;

    const double ess_now = sw * sw / sw2;
    const double inv = 1.0 / sw;
    for (std::size_t i = 0; i < p; ++i) weights[i] *= inv;

    if (ess_now < cfg.resample_threshold * static_cast<double>(p)) {
        systematic_resample(values, weights, scratch, rng);
        out.resampled = true;
    }
    return out;
}

}  // namespace detail

/// Draws P particles i.i.d. from the stationary prior of the touch-free
/// recursion (Normal(c/(1-phi), 1/(1-phi^2)); standard normal fallback when
/// |phi| >= 1) with uniform weights.
inline ParticleSet init_particles(const ModelParams& params, const FilterConfig& config,
                                  detail::Rng& rng) {
    config.validate();
    const StationaryPrior prior = stationary_prior(params);
    const double sd = std::sqrt(prior.variance);
    ParticleSet ps;
    ps.prior_fallback = prior.fallback;
    ps.values.resize(config.particle_count);
    ps.weights.assign(config.particle_count, 1.0 / config.particle_count);
    ps.ancestors.resize(config.particle_count);
    for (int i = 0; i < config.particle_count; ++i) {
        ps.values[i] = config.disable_noise ? prior.mean : prior.mean + sd * rng.normal();
        ps.ancestors[i] = static_cast<std::uint32_t>(i);
    }
    return ps;
}

/// Advances the ensemble one day: propagate x' = s + eps with
/// s = predict_propensity(params, x, r_t, m_t), multiply weights by
/// Bernoulli(y_next; logistic(s)) evaluated at each particle's own s,
/// renormalize, and systematically resample when ESS < threshold * P.
template <typename RSpan, typename MSpan>
inline void filter_step(const ModelParams& params, ParticleSet& particles, const RSpan& r_t,
                        const MSpan& m_t, int y_next, const FilterConfig& config,
                        detail::Rng& rng, int day = -1) {
    validate_particles(particles);
    const double day_const = params.c + touch_term(params, r_t, m_t);
    detail::FilterScratch scratch;
    scratch.resize(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i)
        particles.ancestors[i] = static_cast<std::uint32_t>(i);
    detail::StepResult res = detail::filter_day(params, particles.values, particles.weights,
                                                day_const, y_next, config, scratch, rng, day,
                                                /*want_score=*/false);
    if (res.resampled) particles.ancestors = scratch.parents;
}

namespace detail {

struct ForwardPass {
    PropensityPath path;
    std::vector<double> scores;  // filled only when want_scores
    bool prior_fallback = false;
};

// Full forward filter over one history. Shared by estimate_path and
// score_customer so both consume randomness identically: P prior normals,
// then per day P propagation normals followed by at most one resample draw.
inline ForwardPass run_filter(const ModelParams& params, const CustomerHistory& h,
                              const FilterConfig& config, bool want_scores) {
    config.validate();
    check_dims(params, h.k, h.l);
    const int t_len = h.horizon;
    const std::size_t p = static_cast<std::size_t>(config.particle_count);

    Rng rng(derive_seed(config.seed, fnv1a64(h.id)));
    ParticleSet ps = init_particles(params, config, rng);

    FilterScratch scratch;
    scratch.resize(p);

    const bool map_mode = config.path_mode == PathMode::kMapAncestral;
    std::vector<std::vector<double>> value_hist;
    std::vector<std::vector<std::uint32_t>> parent_hist;
    if (map_mode) {
        value_hist.reserve(t_len);
        parent_hist.reserve(t_len);
    }

    ForwardPass out;
    out.prior_fallback = ps.prior_fallback;
    out.path.x0 = stationary_prior(params).mean;
    out.path.x.resize(t_len);
    if (want_scores) out.scores.resize(t_len + 1);

    for (int t = 0; t < t_len; ++t) {
        // s_{t+1} is driven by day-t touches; the first prediction s_1 sees
        // no touches (it is made from the prior anchor alone).
        double day_const = params.c;
        if (t > 0) day_const += touch_term(params, h.r_day(t - 1), h.m_day(t - 1));
        StepResult res = filter_day(params, ps.values, ps.weights, day_const, h.y[t], config,
                                    scratch, rng, t + 1, want_scores);
        out.path.x[t] = res.posterior_mean;
        if (want_scores) out.scores[t] = res.pre_update_score;
        if (map_mode) {
            value_hist.push_back(ps.values);
            if (res.resampled)
                parent_hist.push_back(scratch.parents);
            else {
                std::vector<std::uint32_t> identity(p);
                for (std::size_t i = 0; i < p; ++i) identity[i] = static_cast<std::uint32_t>(i);
                parent_hist.push_back(std::move(identity));
            }
        }
    }

    if (want_scores) {
        // Post-horizon one-step-ahead probability, driven by the final day's touches.
        double day_const = params.c;
        if (t_len > 0) day_const += touch_term(params, h.r_day(t_len - 1), h.m_day(t_len - 1));
        double acc = 0.0;
        for (std::size_t i = 0; i < p; ++i)
            acc += ps.weights[i] * logistic(day_const + params.phi * ps.values[i]);
        out.scores[t_len] = acc;
    }

    if (map_mode && t_len > 0) {
        std::size_t idx = 0;
        for (std::size_t i = 1; i < p; ++i)
            if (ps.weights[i] > ps.weights[idx]) idx = i;
        for (int t = t_len - 1; t >= 0; --t) {
            out.path.x[t] = value_hist[t][idx];
            idx = parent_hist[t][idx];
        }
    }

    out.path.s = recompute_predictions(params, h, out.path.x, out.path.x0);
    return out;
}

}  // namespace detail

/// Filters one customer and extracts the latent path per config.path_mode:
/// the per-day posterior mean (default) or the ancestral path of the final
/// highest-weight particle. path.s is recomputed deterministically from
/// path.x, with s_1 derived from the stationary prior mean.
inline PropensityPath estimate_path(const ModelParams& params, const CustomerHistory& h,
                                    const FilterConfig& config) {
    return detail::run_filter(params, h, config, /*want_scores=*/false).path;
}

}  // namespace dpm
