#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "dpm/errors.hpp"
#include "dpm/filter.hpp"
#include "dpm/model.hpp"

namespace dpm {

/// One-step-ahead purchase probabilities for days 1..T+1. Entry t-1 is the
/// weighted particle average of logistic(s_t) computed before the day-t
/// observation is absorbed, so each score conditions only on data strictly
/// before the day it predicts. The last entry is the post-horizon prediction.
inline std::vector<double> score_customer(const ModelParams& params, const CustomerHistory& h,
                                          const FilterConfig& config) {
    return detail::run_filter(params, h, config, /*want_scores=*/true).scores;
}

struct RocPoint {
    double threshold = 0.0;  // score at or above which a case is called positive
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// ROC curve over sorted unique score thresholds with tied scores grouped
/// into one step; AUC by the trapezoid rule, which with grouped ties equals
/// the midrank Mann-Whitney statistic exactly.
inline RocResult roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ContractViolation("roc_curve: scores/labels length mismatch");
    std::size_t n_pos = 0;
    for (int v : labels) {
        if (v != 0 && v != 1) throw ContractViolation("roc_curve: labels must be 0/1");
        n_pos += v;
    }
    const std::size_t n = scores.size();
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw ContractViolation("roc_curve: both label classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocResult out;
    out.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

    // Accumulate in count space; pos_k * (cum_neg + neg_k/2) terms are exact
    // in doubles, so the single final division matches the U-statistic bit
    // for bit.
    double cum_pos = 0.0, cum_neg = 0.0, u_num = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double thr = scores[order[i]];
        double tie_pos = 0.0, tie_neg = 0.0;
        while (i < n && scores[order[i]] == thr) {
            if (labels[order[i]])
                tie_pos += 1.0;
            else
                tie_neg += 1.0;
            ++i;
        }
        u_num += tie_pos * (cum_neg + 0.5 * tie_neg);
        cum_pos += tie_pos;
        cum_neg += tie_neg;
        out.points.push_back({thr, cum_neg / static_cast<double>(n_neg),
                              cum_pos / static_cast<double>(n_pos)});
    }
    const double pairs = static_cast<double>(n_pos) * static_cast<double>(n_neg);
    out.auc = (pairs - u_num) / pairs;
    return out;
}

/// Per-channel histogram of (purchase day - last touch day) over purchasers.
/// Channel indices 0..K-1 are the semi-targetable channels, K..K+L-1 the
/// targetable ones. Bin 0 is a touch on the purchase day itself.
struct LastTouchHistogram {
    int max_days = 0;
    std::vector<std::vector<long>> counts;  // (K+L) x (max_days+1)

    std::vector<long> pooled() const {
        std::vector<long> acc(max_days + 1, 0);
        for (const auto& ch : counts)
            for (int b = 0; b <= max_days; ++b) acc[b] += ch[b];
        return acc;
    }
};

inline LastTouchHistogram last_touch_histogram(const Dataset& data, int max_days) {
    if (max_days < 0) throw ContractViolation("max_days must be >= 0");
    LastTouchHistogram hist;
    hist.max_days = max_days;
    hist.counts.assign(data.k + data.l, std::vector<long>(max_days + 1, 0));

    for (const auto& h : data.customers) {
        if (!h.purchased()) continue;
        const int purchase_day = h.horizon - 1;  // 0-based
        for (int j = 0; j < data.k; ++j) {
            for (int t = purchase_day; t >= 0 && purchase_day - t <= max_days; --t) {
                if (h.r_day(t)[j] > 0) {
                    ++hist.counts[j][purchase_day - t];
                    break;
                }
            }
        }
        for (int j = 0; j < data.l; ++j) {
            for (int t = purchase_day; t >= 0 && purchase_day - t <= max_days; --t) {
                if (h.m_day(t)[j] > 0) {
                    ++hist.counts[data.k + j][purchase_day - t];
                    break;
                }
            }
        }
    }
    return hist;
}

/// Pooled cross-sectional (score, next-day label) pairs for one customer,
/// matching the lag-0 baseline's row construction: predicted days u run from
/// 2 to the purchase day (purchasers) or to the day after the horizon
/// (non-purchasers, labelled 0). Day 1 is excluded because no baseline can
/// predict it.
struct PooledPair {
    double score = 0.0;
    int label = 0;
    int day = 0;  // 1-based predicted day
};

inline std::vector<PooledPair> pool_customer_scores(const CustomerHistory& h,
                                                    const std::vector<double>& scores) {
    if (scores.size() != static_cast<std::size_t>(h.horizon) + 1)
        throw ContractViolation("pool_customer_scores: score length mismatch");
    std::vector<PooledPair> out;
    const int t_last = h.purchased() ? h.horizon : h.horizon + 1;
    for (int u = 2; u <= t_last; ++u)
        out.push_back({scores[u - 1], u <= h.horizon ? static_cast<int>(h.y[u - 1]) : 0, u});
    return out;
}

}  // namespace dpm
