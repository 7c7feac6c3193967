#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/detail/rng.hpp"
#include "dpm/errors.hpp"
#include "dpm/estimation.hpp"
#include "dpm/eval.hpp"
#include "dpm/model.hpp"

namespace dpm {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::optional<long> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// ISO yyyy-mm-dd to days since epoch; nullopt if not a valid date.
inline std::optional<long> parse_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto y = parse_int(s.substr(0, 4)), m = parse_int(s.substr(5, 2)), d = parse_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(*y)),
                                    std::chrono::month(static_cast<unsigned>(*m)),
                                    std::chrono::day(static_cast<unsigned>(*d))};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days(ymd).time_since_epoch().count();
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Writes content to path atomically (temp file in the same directory, then
/// rename).
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Loads and validates a dataset in the canonical CSV layout
/// (id,time,r.1..r.K,m.1..m.L,y). Times are ISO dates or integer day
/// indices, strictly increasing and gap-free within each id; rows are
/// grouped contiguously by id and stop at the first purchase. When
/// segment_column is given the column is expected right after `time`.
inline Dataset load_dataset(const std::filesystem::path& path,
                            const std::optional<std::string>& segment_column = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty dataset: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = detail::split_csv_line(line);
    std::size_t col = 0;
    auto expect = [&](const std::string& name) {
        if (col >= header.size() || header[col] != name)
            throw ValidationError("bad header: expected column '" + name + "' at position " +
                                  std::to_string(col + 1));
        ++col;
    };
    expect("id");
    expect("time");
    if (segment_column) expect(*segment_column);
    int k = 0, l = 0;
    while (col < header.size() && header[col] == "r." + std::to_string(k + 1)) {
        ++k;
        ++col;
    }
    while (col < header.size() && header[col] == "m." + std::to_string(l + 1)) {
        ++l;
        ++col;
    }
    expect("y");
    if (col != header.size()) throw ValidationError("bad header: trailing columns after 'y'");

    Dataset data;
    data.k = k;
    data.l = l;

    std::unordered_set<std::string> closed_ids;
    CustomerHistory cur;
    bool have_cur = false;
    long prev_time = 0;
    bool prev_is_date = false;
    long row_no = 1;

    auto fail = [&](const std::string& what) {
        throw ValidationError(path.string() + " row " + std::to_string(row_no) + ": " + what);
    };
    auto flush = [&]() {
        if (!have_cur) return;
        validate_history(cur);
        closed_ids.insert(cur.id);
        data.customers.push_back(std::move(cur));
        cur = CustomerHistory{};
        have_cur = false;
    };

    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != header.size()) fail("expected " + std::to_string(header.size()) +
                                            " fields, got " + std::to_string(f.size()));
        const std::string& id = f[0];
        if (id.empty()) fail("empty id");

        std::size_t base = segment_column ? 3 : 2;
        std::optional<long> day = detail::parse_int(f[1]);
        bool is_date = false;
        if (!day) {
            day = detail::parse_iso_date(f[1]);
            is_date = true;
            if (!day) fail("unparseable time '" + f[1] + "' (want integer day or yyyy-mm-dd)");
        }

        if (!have_cur || cur.id != id) {
            flush();
            if (closed_ids.count(id)) fail("id '" + id + "' reappears after its group ended");
            have_cur = true;
            cur.id = id;
            if (segment_column) cur.segment = f[2];
            cur.k = k;
            cur.l = l;
            cur.horizon = 0;
        } else {
            if (is_date != prev_is_date) fail("mixed time representations within id '" + id + "'");
            if (*day != prev_time + 1) {
                if (*day <= prev_time) fail("time not strictly increasing for id '" + id + "'");
                fail("time gap for id '" + id + "' (" + std::to_string(prev_time) + " -> " +
                     std::to_string(*day) + ")");
            }
            if (cur.y.back() == 1) fail("row after first purchase for id '" + id + "'");
            if (segment_column && cur.segment != std::optional<std::string>(f[2]))
                fail("segment changes within id '" + id + "'");
        }
        prev_time = *day;
        prev_is_date = is_date;

        for (int j = 0; j < k + l; ++j) {
            auto v = detail::parse_int(f[base + j]);
            if (!v || *v < 0) fail("non-integer or negative count '" + f[base + j] + "'");
            if (*v > 65535) fail("touch count out of range");
            if (j < k)
                cur.r.push_back(static_cast<std::uint16_t>(*v));
            else
                cur.m.push_back(static_cast<std::uint16_t>(*v));
        }
        auto yv = detail::parse_int(f[base + k + l]);
        if (!yv || (*yv != 0 && *yv != 1)) fail("y must be 0 or 1, got '" + f[base + k + l] + "'");
        cur.y.push_back(static_cast<std::uint8_t>(*yv));
        ++cur.horizon;
    }
    flush();
    if (data.customers.empty()) throw ValidationError("empty dataset: " + path.string());
    return data;
}

/// Serializes a dataset in the canonical CSV layout with integer day indices.
inline std::string dataset_to_csv(const Dataset& data) {
    std::ostringstream out;
    out << "id,time";
    for (int j = 1; j <= data.k; ++j) out << ",r." << j;
    for (int j = 1; j <= data.l; ++j) out << ",m." << j;
    out << ",y\n";
    for (const auto& h : data.customers) {
        for (int t = 0; t < h.horizon; ++t) {
            out << h.id << ',' << (t + 1);
            auto r = h.r_day(t);
            auto m = h.m_day(t);
            for (int j = 0; j < h.k; ++j) out << ',' << r[j];
            for (int j = 0; j < h.l; ++j) out << ',' << m[j];
            out << ',' << static_cast<int>(h.y[t]) << '\n';
        }
    }
    return out.str();
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    atomic_write(path, dataset_to_csv(data));
}

/// Persisted model: schema version, channel counts, parameters, and fit
/// metadata. Canonical JSON; save -> load -> save is byte-identical.
struct ModelFile {
    int schema_version = 1;
    int k = 0;
    int l = 0;
    ModelParams params;
    std::string config_digest;
    std::uint64_t seed = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

inline ordered_json model_to_json(const ModelFile& mf) {
    ordered_json j;
    j["schema_version"] = mf.schema_version;
    j["k"] = mf.k;
    j["l"] = mf.l;
    j["params"] = {{"c", mf.params.c},
                   {"phi", mf.params.phi},
                   {"alpha", mf.params.alpha},
                   {"beta", mf.params.beta}};
    j["fit"] = {{"config_digest", mf.config_digest},
                {"seed", mf.seed},
                {"iterations", mf.iterations},
                {"converged", mf.converged},
                {"warnings", mf.warnings}};
    return j;
}

inline void save_model(const std::filesystem::path& path, const ModelFile& mf) {
    atomic_write(path, model_to_json(mf).dump(2) + "\n");
}

inline ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("bad model JSON in " + path.string() + ": " + e.what());
    }
    ModelFile mf;
    try {
        mf.schema_version = j.at("schema_version").get<int>();
        if (mf.schema_version != 1)
            throw ValidationError("unsupported model schema_version in " + path.string());
        mf.k = j.at("k").get<int>();
        mf.l = j.at("l").get<int>();
        const auto& p = j.at("params");
        mf.params.c = p.at("c").get<double>();
        mf.params.phi = p.at("phi").get<double>();
        mf.params.alpha = p.at("alpha").get<std::vector<double>>();
        mf.params.beta = p.at("beta").get<std::vector<double>>();
        const auto& f = j.at("fit");
        mf.config_digest = f.at("config_digest").get<std::string>();
        mf.seed = f.at("seed").get<std::uint64_t>();
        mf.iterations = f.at("iterations").get<int>();
        mf.converged = f.at("converged").get<bool>();
        mf.warnings = f.at("warnings").get<std::vector<std::string>>();
    } catch (const ordered_json::exception& e) {
        throw ValidationError("bad model file " + path.string() + ": " + e.what());
    }
    if (static_cast<int>(mf.params.alpha.size()) != mf.k ||
        static_cast<int>(mf.params.beta.size()) != mf.l)
        throw ValidationError("model file " + path.string() + ": k/l do not match parameters");
    return mf;
}

/// FNV-1a digest of a canonical config dump; recorded in model files.
inline std::string config_digest(const ordered_json& j) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(j.dump())));
    return buf;
}

/// Customer-level stratified split: purchasers and non-purchasers are
/// shuffled and allocated separately so the purchaser proportion is
/// preserved. Returns (train, test) index lists in original dataset order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const Dataset& data, double train_frac, std::uint64_t seed) {
    if (!(train_frac >= 0.0 && train_frac <= 1.0))
        throw ContractViolation("train_frac must be in [0,1]");
    std::vector<std::size_t> strata[2];
    for (std::size_t i = 0; i < data.customers.size(); ++i)
        strata[data.customers[i].purchased() ? 1 : 0].push_back(i);

    detail::Rng rng(detail::derive_seed(seed, detail::fnv1a64("split")));
    std::vector<char> in_train(data.customers.size(), 0);
    for (auto& stratum : strata) {
        for (std::size_t i = stratum.size(); i > 1; --i)
            std::swap(stratum[i - 1], stratum[rng.uniform_int(i)]);
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_frac * static_cast<double>(stratum.size())));
        for (std::size_t i = 0; i < n_train; ++i) in_train[stratum[i]] = 1;
    }
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < data.customers.size(); ++i)
        (in_train[i] ? out.first : out.second).push_back(i);
    return out;
}

inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.k = data.k;
    out.l = data.l;
    out.customers.reserve(idx.size());
    for (auto i : idx) out.customers.push_back(data.customers[i]);
    return out;
}

/// Splits a dataset by segment key, preserving first-appearance order.
/// Per-segment fits derive their seeds as segment_seed(base, key).
inline std::vector<std::pair<std::string, Dataset>> partition_by_segment(const Dataset& data) {
    std::vector<std::pair<std::string, Dataset>> out;
    for (const auto& h : data.customers) {
        const std::string key = h.segment.value_or("");
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& p) { return p.first == key; });
        if (it == out.end()) {
            out.push_back({key, Dataset{data.k, data.l, {}}});
            it = out.end() - 1;
        }
        it->second.customers.push_back(h);
    }
    return out;
}

inline std::uint64_t segment_seed(std::uint64_t base, const std::string& segment) {
    return detail::derive_seed(base, detail::fnv1a64("segment"), detail::fnv1a64(segment));
}

// ---- CSV emitters ----------------------------------------------------------

inline std::string trajectory_to_csv(const FitReport& report, int k, int l) {
    std::ostringstream out;
    out << "iter,c,phi";
    for (int j = 1; j <= k; ++j) out << ",alpha." << j;
    for (int j = 1; j <= l; ++j) out << ",beta." << j;
    out << '\n';
    for (const auto& snap : report.trajectory) {
        out << snap.iteration << ',' << detail::format_double(snap.params.c) << ','
            << detail::format_double(snap.params.phi);
        for (double v : snap.params.alpha) out << ',' << detail::format_double(v);
        for (double v : snap.params.beta) out << ',' << detail::format_double(v);
        out << '\n';
    }
    return out.str();
}

inline std::string coefficients_to_csv(const std::vector<std::string>& names,
                                       const GlmFit& fit) {
    std::ostringstream out;
    out << "name,estimate,std_error,p_value\n";
    for (std::size_t j = 0; j < names.size(); ++j)
        out << names[j] << ',' << detail::format_double(fit.coefficients[j]) << ','
            << detail::format_double(fit.std_errors[j]) << ','
            << detail::format_double(fit.p_values[j]) << '\n';
    return out.str();
}

inline std::string roc_to_csv(const RocResult& roc) {
    std::ostringstream out;
    out << "threshold,fpr,tpr\n";
    for (const auto& pt : roc.points)
        out << detail::format_double(pt.threshold) << ',' << detail::format_double(pt.fpr) << ','
            << detail::format_double(pt.tpr) << '\n';
    return out.str();
}

inline std::string histogram_to_csv(const LastTouchHistogram& hist, int k, int l) {
    std::ostringstream out;
    out << "channel,days_before,count\n";
    for (std::size_t ch = 0; ch < hist.counts.size(); ++ch) {
        const std::string name = ch < static_cast<std::size_t>(k)
                                     ? "r." + std::to_string(ch + 1)
                                     : "m." + std::to_string(ch - k + 1);
        for (int b = 0; b <= hist.max_days; ++b)
            out << name << ',' << b << ',' << hist.counts[ch][b] << '\n';
    }
    return out.str();
}

/// Per-day score rows: day runs 1..T+1; label is the day's purchase flag (0
/// past the horizon); in_pool marks the rows the pooled ROC uses.
inline std::string scores_to_csv(const Dataset& data,
                                 const std::vector<std::vector<double>>& scores) {
    std::ostringstream out;
    out << "id,day,score,label,in_pool\n";
    for (std::size_t i = 0; i < data.customers.size(); ++i) {
        const auto& h = data.customers[i];
        const int t_last = h.purchased() ? h.horizon : h.horizon + 1;
        for (int day = 1; day <= h.horizon + 1; ++day) {
            const int label = day <= h.horizon ? h.y[day - 1] : 0;
            const bool pooled = day >= 2 && day <= t_last;
            out << h.id << ',' << day << ',' << detail::format_double(scores[i][day - 1]) << ','
                << label << ',' << (pooled ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace dpm
