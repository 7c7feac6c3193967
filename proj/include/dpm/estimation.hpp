#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "dpm/baselines.hpp"
#include "dpm/detail/math.hpp"
#include "dpm/detail/rng.hpp"
#include "dpm/errors.hpp"
#include "dpm/filter.hpp"
#include "dpm/model.hpp"

namespace dpm {

struct SgdConfig {
    double gamma0 = 0.05;             // base step; gamma_v = gamma0 / (1+v)^exponent
    double schedule_exponent = 1.0;   // (0.5, 1] for almost-sure convergence
    int max_iters = 20000;
    double pos_sample_prob = 0.5;     // probability a draw comes from the purchaser stratum
    int convergence_window = 500;
    double convergence_tol = 1e-3;    // max per-coordinate relative change of windowed means
    int thin = 1;                     // trajectory snapshot stride
    int offset_burn_in = 300;         // c-only settling iterations before the main loop
    bool reweight_gradients = false;  // divide each stratum's gradient by its sampling inflation
    FilterConfig filter;
    std::uint64_t seed = 0;
    std::optional<ModelParams> init_override;  // used by multi-restart drivers

    double step_size(int v) const { return gamma0 / std::pow(1.0 + v, schedule_exponent); }

    void validate() const {
        if (!(gamma0 >= 0.0)) throw ContractViolation("gamma0 must be >= 0");
        if (!(schedule_exponent > 0.5 && schedule_exponent <= 1.0))
            throw ContractViolation("schedule_exponent must be in (0.5, 1]");
        if (max_iters < 1) throw ContractViolation("max_iters must be >= 1");
        if (!(pos_sample_prob >= 0.0 && pos_sample_prob <= 1.0))
            throw ContractViolation("pos_sample_prob must be in [0,1]");
        if (convergence_window < 1) throw ContractViolation("convergence_window must be >= 1");
        if (!(convergence_tol > 0.0)) throw ContractViolation("convergence_tol must be > 0");
        if (thin < 1) throw ContractViolation("thin must be >= 1");
        if (offset_burn_in < 0) throw ContractViolation("offset_burn_in must be >= 0");
        filter.validate();
    }
};

struct ParamGradient {
    double dc = 0.0;
    double dphi = 0.0;
    std::vector<double> dalpha;
    std::vector<double> dbeta;

    ParamGradient() = default;
    ParamGradient(std::size_t k, std::size_t l) : dalpha(k, 0.0), dbeta(l, 0.0) {}

    ParamGradient& operator+=(const ParamGradient& o) {
        dc += o.dc;
        dphi += o.dphi;
        for (std::size_t j = 0; j < dalpha.size(); ++j) dalpha[j] += o.dalpha[j];
        for (std::size_t j = 0; j < dbeta.size(); ++j) dbeta[j] += o.dbeta[j];
        return *this;
    }
    ParamGradient& operator*=(double a) {
        dc *= a;
        dphi *= a;
        for (double& v : dalpha) v *= a;
        for (double& v : dbeta) v *= a;
        return *this;
    }
};

struct GradientParts {
    ParamGradient emission;    // (y_t - logistic(s_t)) * ds_t/dtheta
    ParamGradient transition;  // (x_t - s_t) * ds_t/dtheta

    ParamGradient total() const {
        ParamGradient g = emission;
        g += transition;
        return g;
    }
};

/// Gradient of log_joint in theta with the path held fixed. Both terms share
/// ds_t/dtheta = (1, x_{t-1}, r_{t-1}, m_{t-1}); the first prediction is made
/// from the prior anchor with no touches, so ds_1/dtheta = (1, x0, 0, 0).
/// The emission factor is the analytically correct (y - logistic(s)).
inline GradientParts grad_log_joint_parts(const ModelParams& params, const CustomerHistory& h,
                                          const PropensityPath& path) {
    check_dims(params, h.k, h.l);
    if (path.x.size() != static_cast<std::size_t>(h.horizon) ||
        path.s.size() != static_cast<std::size_t>(h.horizon) + 1)
        throw ContractViolation("grad_log_joint: path/history length mismatch");

    GradientParts parts;
    parts.emission = ParamGradient(h.k, h.l);
    parts.transition = ParamGradient(h.k, h.l);

    for (int t = 0; t < h.horizon; ++t) {
        const double s = path.s[t];
        const double fe = (h.y[t] ? 1.0 : 0.0) - detail::logistic(s);
        const double ft = path.x[t] - s;
        const double ds_dphi = (t == 0) ? path.x0 : path.x[t - 1];
        parts.emission.dc += fe;
        parts.emission.dphi += fe * ds_dphi;
        parts.transition.dc += ft;
        parts.transition.dphi += ft * ds_dphi;
        if (t > 0) {
            auto r = h.r_day(t - 1);
            auto m = h.m_day(t - 1);
            for (int j = 0; j < h.k; ++j) {
                parts.emission.dalpha[j] += fe * r[j];
                parts.transition.dalpha[j] += ft * r[j];
            }
            for (int j = 0; j < h.l; ++j) {
                parts.emission.dbeta[j] += fe * m[j];
                parts.transition.dbeta[j] += ft * m[j];
            }
        }
    }
    return parts;
}

inline ParamGradient grad_log_joint(const ModelParams& params, const CustomerHistory& h,
                                    const PropensityPath& path) {
    return grad_log_joint_parts(params, h, path).total();
}

/// Purchaser / non-purchaser strata over a dataset, for oversampled draws.
class StratifiedSampler {
public:
    explicit StratifiedSampler(const Dataset& data) {
        for (std::size_t i = 0; i < data.customers.size(); ++i) {
            if (data.customers[i].purchased())
                purchasers_.push_back(i);
            else
                others_.push_back(i);
        }
    }

    bool purchasers_empty() const { return purchasers_.empty(); }
    bool others_empty() const { return others_.empty(); }
    std::size_t purchaser_count() const { return purchasers_.size(); }
    std::size_t total() const { return purchasers_.size() + others_.size(); }

    /// Draws a customer index: purchaser stratum with probability pos_prob,
    /// uniform within the stratum; falls back to the other stratum when one
    /// is empty. Sets *from_purchasers to the stratum actually used.
    std::size_t sample(double pos_prob, detail::Rng& rng, bool* from_purchasers = nullptr) const {
        if (total() == 0) throw ContractViolation("sample_customer: empty dataset");
        bool pos = rng.bernoulli(pos_prob);
        if (pos && purchasers_.empty()) pos = false;
        if (!pos && others_.empty()) pos = true;
        const auto& stratum = pos ? purchasers_ : others_;
        if (from_purchasers) *from_purchasers = pos;
        return stratum[rng.uniform_int(stratum.size())];
    }

private:
    std::vector<std::size_t> purchasers_;
    std::vector<std::size_t> others_;
};

inline const CustomerHistory& sample_customer(const Dataset& data, double pos_sample_prob,
                                              detail::Rng& rng) {
    StratifiedSampler sampler(data);
    return data.customers[sampler.sample(pos_sample_prob, rng)];
}

struct ParamSnapshot {
    int iteration = 0;
    ModelParams params;
};

/// Starting point for the stochastic gradient run.
///
/// The offset starts at the logit of the daily purchase rate the sampler
/// will actually see (purchaser oversampling inflates it), scaled by
/// (1 - phi0) so the stationary propensity level matches that rate from the
/// first iteration. Starting instead from the raw-rate logit leaves a gap of
/// several logits that the near-collinear (c, phi) kick field closes mostly
/// through phi, collapsing it far below its true value before the decaying
/// steps freeze. The touch coefficients warm-start at the lag-0 logistic
/// estimates; the decaying schedule can refine them but cannot carry them
/// from zero to O(1) in a sparse-event stream.
inline ModelParams initial_params(const Dataset& data, const SgdConfig& config) {
    long long days_pos = 0, days_neg = 0, purchasers = 0;
    for (const auto& h : data.customers) {
        if (h.purchased()) {
            ++purchasers;
            days_pos += h.horizon;
        } else {
            days_neg += h.horizon;
        }
    }
    const long long days = days_pos + days_neg;
    const double floor_rate = 0.5 / static_cast<double>(std::max<long long>(days, 1));

    double rate;
    const bool oversampled = !config.reweight_gradients && purchasers > 0 &&
                             purchasers < static_cast<long long>(data.customers.size());
    if (oversampled) {
        const double pos = config.pos_sample_prob;
        const double mean_t_pos = static_cast<double>(days_pos) / static_cast<double>(purchasers);
        const double mean_t_neg = static_cast<double>(days_neg) /
                                  static_cast<double>(data.customers.size() - purchasers);
        rate = pos / std::max(pos * mean_t_pos + (1.0 - pos) * mean_t_neg, 1.0);
    } else {
        rate = static_cast<double>(purchasers) / static_cast<double>(std::max<long long>(days, 1));
    }
    rate = std::clamp(rate, floor_rate, 1.0 - floor_rate);

    ModelParams theta;
    theta.phi = 0.5;
    theta.alpha.assign(data.k, 0.0);
    theta.beta.assign(data.l, 0.0);

    if (data.k + data.l > 0) {
        try {
            LaggedDesign design = build_lagged_design(data, 0);
            GlmFit glm = fit_glm(design, 25, 1e-6);
            if (!glm.separation_detected) {
                for (int j = 0; j < data.k; ++j)
                    theta.alpha[j] = std::clamp(glm.coefficients[1 + j], -2.0, 2.0);
                for (int j = 0; j < data.l; ++j)
                    theta.beta[j] = std::clamp(glm.coefficients[1 + data.k + j], -2.0, 2.0);
            }
        } catch (const DegenerateDesign&) {
            // No usable cross-section (single class / no rows): keep zeros.
        }
    }

    // Offset by moment matching in the rare-event regime: the average
    // predictive propensity must put E[logistic(s)] at the stream's rate.
    // s carries the discounted touch effects and the latent noise, so the
    // target level is corrected for their means and their exp-convexity.
    std::vector<double> lambda(data.k + data.l, 0.0);
    for (const auto& h : data.customers)
        for (int t = 0; t < h.horizon; ++t) {
            auto r = h.r_day(t);
            auto m = h.m_day(t);
            for (int j = 0; j < data.k; ++j) lambda[j] += r[j];
            for (int j = 0; j < data.l; ++j) lambda[data.k + j] += m[j];
        }
    for (double& v : lambda) v /= static_cast<double>(std::max<long long>(days, 1));

    double mean_touch = 0.0;
    for (int j = 0; j < data.k; ++j) mean_touch += theta.alpha[j] * lambda[j];
    for (int j = 0; j < data.l; ++j) mean_touch += theta.beta[j] * lambda[data.k + j];

    double convexity = theta.phi * theta.phi / (2.0 * (1.0 - theta.phi * theta.phi));
    for (int k = 0; k < 200; ++k) {
        const double disc = std::pow(theta.phi, k);
        double layer = 0.0;
        for (int j = 0; j < data.k + data.l; ++j) {
            const double coef = (j < data.k ? theta.alpha[j] : theta.beta[j - data.k]) * disc;
            layer += lambda[j] * (std::exp(coef) - 1.0 - coef);
        }
        convexity += layer;
        if (layer < 1e-6) break;
    }

    theta.c = (1.0 - theta.phi) * (detail::logit(rate) - convexity) - mean_touch;
    return theta;
}

struct FitReport {
    ModelParams final_params;           // mean over the last convergence window
    std::vector<ParamSnapshot> trajectory;
    int iterations_run = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> flatten(const ModelParams& p) {
    std::vector<double> v;
    v.reserve(2 + p.alpha.size() + p.beta.size());
    v.push_back(p.c);
    v.push_back(p.phi);
    v.insert(v.end(), p.alpha.begin(), p.alpha.end());
    v.insert(v.end(), p.beta.begin(), p.beta.end());
    return v;
}

inline ModelParams unflatten(const std::vector<double>& v, int k, int l) {
    ModelParams p;
    p.c = v[0];
    p.phi = v[1];
    p.alpha.assign(v.begin() + 2, v.begin() + 2 + k);
    p.beta.assign(v.begin() + 2 + k, v.begin() + 2 + k + l);
    return p;
}

}  // namespace detail

/// SGDPM: stochastic gradient ascent on the conditional likelihood, one
/// customer per iteration, with the latent path supplied by the particle
/// filter under the current parameters.
inline FitReport fit(const Dataset& data, const SgdConfig& config) {
    config.validate();
    if (data.empty()) throw ContractViolation("fit: empty dataset");

    const int k = data.k, l = data.l;
    StratifiedSampler sampler(data);

    ModelParams theta = config.init_override ? *config.init_override : initial_params(data, config);
    check_dims(theta, k, l);

    FitReport report;
    if (sampler.purchasers_empty())
        report.warnings.push_back("dataset has no purchasers; sampling non-purchasers only");
    if (sampler.others_empty())
        report.warnings.push_back("dataset has purchasers only; sampling purchasers only");
    const double pos_frac =
        static_cast<double>(sampler.purchaser_count()) / static_cast<double>(sampler.total());
    if (!config.reweight_gradients && !sampler.purchasers_empty() && !sampler.others_empty() &&
        std::abs(config.pos_sample_prob - pos_frac) > 0.01)
        report.warnings.push_back("c is sampling-biased: purchaser oversampling without reweighting");

    // Gradient inflation per stratum under the actual sampling scheme.
    double pos_inflation = 1.0, neg_inflation = 1.0;
    if (!sampler.purchasers_empty() && !sampler.others_empty()) {
        const double n = static_cast<double>(sampler.total());
        pos_inflation = config.pos_sample_prob * n / static_cast<double>(sampler.purchaser_count());
        neg_inflation = (1.0 - config.pos_sample_prob) * n /
                        static_cast<double>(sampler.total() - sampler.purchaser_count());
    }

    detail::Rng sample_rng(detail::derive_seed(config.seed, detail::fnv1a64("sgd-sample")));

    // Offset burn-in: the sampled stream's intercept equilibrium sits a few
    // logits above the raw-data level; settling c alone first keeps the
    // main loop's early large steps from rotating the near-collinear
    // (c, phi) pair. Skipped when the run cannot learn at all (gamma0 = 0).
    if (config.offset_burn_in > 0 && config.gamma0 > 0.0) {
        detail::Rng burn_rng(detail::derive_seed(config.seed, detail::fnv1a64("sgd-burnin")));
        double c_acc = 0.0;
        int c_cnt = 0;
        for (int v = 1; v <= config.offset_burn_in; ++v) {
            const std::size_t idx = sampler.sample(config.pos_sample_prob, burn_rng);
            try {
                FilterConfig fcfg = config.filter;
                fcfg.seed = detail::derive_seed(config.seed, detail::fnv1a64("burnin-filter"),
                                                static_cast<std::uint64_t>(v));
                PropensityPath path = estimate_path(theta, data.customers[idx], fcfg);
                ParamGradient g = grad_log_joint(theta, data.customers[idx], path);
                theta.c += 0.2 / std::pow(1.0 + v, 0.6) * g.dc;
            } catch (const DegenerateLikelihood&) {
            }
            if (2 * v > config.offset_burn_in) {
                c_acc += theta.c;
                ++c_cnt;
            }
        }
        if (c_cnt > 0) theta.c = c_acc / c_cnt;
    }

    const int window = config.convergence_window;
    std::deque<std::vector<double>> recent;  // last 2*window post-update iterates

    bool phi_warned = false;
    int consecutive_skips = 0;
    int v = 0;

    auto snapshot = [&](int iter) { report.trajectory.push_back({iter, theta}); };

    for (v = 1; v <= config.max_iters; ++v) {
        bool from_purchasers = false;
        const std::size_t idx = sampler.sample(config.pos_sample_prob, sample_rng, &from_purchasers);
        const CustomerHistory& h = data.customers[idx];

        bool skipped = false;
        try {
            FilterConfig fcfg = config.filter;
            fcfg.seed = detail::derive_seed(config.seed, detail::fnv1a64("sgd-filter"),
                                            static_cast<std::uint64_t>(v));
            PropensityPath path = estimate_path(theta, h, fcfg);
            ParamGradient g = grad_log_joint(theta, h, path);
            if (config.reweight_gradients) g *= 1.0 / (from_purchasers ? pos_inflation : neg_inflation);
            const double gamma = config.step_size(v);
            theta.c += gamma * g.dc;
            theta.phi += gamma * g.dphi;
            for (int j = 0; j < k; ++j) theta.alpha[j] += gamma * g.dalpha[j];
            for (int j = 0; j < l; ++j) theta.beta[j] += gamma * g.dbeta[j];
        } catch (const DegenerateLikelihood&) {
            skipped = true;
        }

        if (skipped) {
            if (++consecutive_skips > 100)
                throw DegenerateLikelihood(
                    "fit aborted after 100 consecutive degenerate filter runs at iteration " +
                    std::to_string(v));
        } else {
            consecutive_skips = 0;
        }

        if (!phi_warned && std::abs(theta.phi) >= 1.0) {
            phi_warned = true;
            report.warnings.push_back("|phi| >= 1 excursion at iteration " + std::to_string(v));
        }

        recent.push_back(detail::flatten(theta));
        if (static_cast<int>(recent.size()) > 2 * window) recent.pop_front();

        if (v % config.thin == 0) snapshot(v);

        if (v % window == 0 && static_cast<int>(recent.size()) == 2 * window) {
            const std::size_t dim = recent.front().size();
            std::vector<double> m1(dim, 0.0), m2(dim, 0.0);
            for (int i = 0; i < window; ++i)
                for (std::size_t j = 0; j < dim; ++j) m1[j] += recent[i][j];
            for (int i = window; i < 2 * window; ++i)
                for (std::size_t j = 0; j < dim; ++j) m2[j] += recent[i][j];
            double worst = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                m1[j] /= window;
                m2[j] /= window;
                const double scale = std::max({std::abs(m1[j]), std::abs(m2[j]), 0.01});
                worst = std::max(worst, std::abs(m2[j] - m1[j]) / scale);
            }
            if (worst < config.convergence_tol) {
                report.converged = true;
                break;
            }
        }
    }

    report.iterations_run = std::min(v, config.max_iters);
    if (report.trajectory.empty() || report.trajectory.back().iteration != report.iterations_run)
        snapshot(report.iterations_run);

    // Polyak-style average over the last window, accumulated in iteration order.
    const int tail = std::min<int>(window, static_cast<int>(recent.size()));
    std::vector<double> mean(detail::flatten(theta).size(), 0.0);
    for (int i = static_cast<int>(recent.size()) - tail; i < static_cast<int>(recent.size()); ++i)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += recent[i][j];
    for (double& x : mean) x /= tail;
    report.final_params = detail::unflatten(mean, k, l);
    return report;
}

}  // namespace dpm
