#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "dpm/estimation.hpp"
#include "dpm/eval.hpp"
#include "dpm/filter.hpp"
#include "dpm/model.hpp"

namespace dpm {

/// Scores every customer, optionally across threads. Each customer's filter
/// stream is derived from (config.seed, customer id), so the result is
/// independent of the thread count and of scheduling.
inline std::vector<std::vector<double>> score_dataset(const ModelParams& params,
                                                      const Dataset& data,
                                                      const FilterConfig& config,
                                                      int threads = 1) {
    std::vector<std::vector<double>> scores(data.customers.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < data.customers.size(); ++i)
            scores[i] = score_customer(params, data.customers[i], config);
        return scores;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= data.customers.size()) return;
            scores[i] = score_customer(params, data.customers[i], config);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return scores;
}

/// Pools per-day one-step-ahead scores with next-day labels across the whole
/// dataset (the lag-0 baseline's row set).
inline void pooled_roc_inputs(const Dataset& data,
                              const std::vector<std::vector<double>>& scores,
                              std::vector<double>& out_scores, std::vector<int>& out_labels) {
    out_scores.clear();
    out_labels.clear();
    for (std::size_t i = 0; i < data.customers.size(); ++i) {
        for (const auto& pair : pool_customer_scores(data.customers[i], scores[i])) {
            out_scores.push_back(pair.score);
            out_labels.push_back(pair.label);
        }
    }
}

/// Average per-customer log_joint over a fixed evaluation subsample, with
/// fresh paths estimated under the given parameters. Used to rank restarts.
inline double mean_log_joint(const Dataset& data, const ModelParams& params,
                             FilterConfig config, std::size_t max_customers,
                             std::uint64_t seed) {
    detail::Rng rng(detail::derive_seed(seed, detail::fnv1a64("eval-subsample")));
    std::vector<std::size_t> idx;
    if (data.customers.size() <= max_customers) {
        idx.resize(data.customers.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
        for (std::size_t i = 0; i < max_customers; ++i)
            idx.push_back(rng.uniform_int(data.customers.size()));
    }
    config.seed = detail::derive_seed(seed, detail::fnv1a64("eval-filter"));
    double acc = 0.0;
    for (auto i : idx) {
        const auto& h = data.customers[i];
        PropensityPath path = estimate_path(params, h, config);
        acc += log_joint(params, h, path);
    }
    return idx.empty() ? 0.0 : acc / static_cast<double>(idx.size());
}

}  // namespace dpm
