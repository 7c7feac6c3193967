// Command-line front end: simulate, fit, fit-baseline, score, eval-roc,
// diag-lasttouch, split. All randomized subcommands are reproducible from
// --seed and invariant to --threads.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "dpm/baselines.hpp"
#include "dpm/config_json.hpp"
#include "dpm/estimation.hpp"
#include "dpm/eval.hpp"
#include "dpm/io.hpp"
#include "dpm/model.hpp"
#include "dpm/scoring.hpp"
#include "dpm/simulate.hpp"

namespace fs = std::filesystem;

namespace {

nlohmann::ordered_json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw dpm::ValidationError("cannot open config file: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw dpm::ValidationError("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

fs::path with_segment_suffix(const fs::path& path, const std::string& segment) {
    fs::path out = path;
    const std::string stem = out.stem().string();
    const std::string ext = out.extension().string();
    out.replace_filename(stem + "." + segment + ext);
    return out;
}

struct FitOutcome {
    dpm::FitReport report;
    dpm::SgdConfig config;
};

// Runs fit with optional random restarts; restart 0 is the configured run,
// later restarts perturb the starting point and reseed, and the best run by
// held-in mean log-joint wins.
FitOutcome fit_with_restarts(const dpm::Dataset& data, const dpm::SgdConfig& base, int restarts) {
    FitOutcome best;
    double best_score = 0.0;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        dpm::SgdConfig cfg = base;
        if (r > 0) {
            cfg.seed = dpm::detail::derive_seed(base.seed, dpm::detail::fnv1a64("restart"),
                                                static_cast<std::uint64_t>(r));
            dpm::detail::Rng rng(cfg.seed);
            dpm::ModelParams init;
            init.c = -6.0 + 4.0 * rng.normal();
            init.phi = std::clamp(0.5 + 0.4 * rng.normal(), -0.95, 0.95);
            init.alpha.assign(data.k, 0.0);
            init.beta.assign(data.l, 0.0);
            cfg.init_override = init;
        }
        dpm::FitReport rep = dpm::fit(data, cfg);
        double score = 0.0;
        if (restarts > 1)
            score = dpm::mean_log_joint(data, rep.final_params, cfg.filter, 500,
                                        dpm::detail::derive_seed(base.seed,
                                                                 dpm::detail::fnv1a64("restart-eval")));
        if (r == 0 || score > best_score) {
            best = {std::move(rep), cfg};
            best_score = score;
        }
    }
    return best;
}

void write_fit_outputs(const dpm::Dataset& data, const FitOutcome& outcome,
                       const fs::path& model_path, const std::optional<fs::path>& traj_path) {
    dpm::ModelFile mf;
    mf.k = data.k;
    mf.l = data.l;
    mf.params = outcome.report.final_params;
    mf.config_digest = dpm::config_digest(dpm::sgd_config_to_json(outcome.config));
    mf.seed = outcome.config.seed;
    mf.iterations = outcome.report.iterations_run;
    mf.converged = outcome.report.converged;
    mf.warnings = outcome.report.warnings;
    dpm::save_model(model_path, mf);
    if (traj_path)
        dpm::atomic_write(*traj_path, dpm::trajectory_to_csv(outcome.report, data.k, data.l));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic propensity modelling toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed_flag;
    int threads = 1;
    std::optional<std::string> segment_column;
    app.add_option("--seed", seed_flag, "Override the config/default RNG seed");
    app.add_option("--threads", threads, "Worker threads for per-customer scoring");
    app.add_option("--segment-column", segment_column,
                   "Dataset column holding the segment key; fit runs per segment");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset CSV");
    std::string sim_config_path, sim_out;
    bool sim_print = false;
    sim_cmd->add_option("--config", sim_config_path, "SimConfig JSON")->required();
    sim_cmd->add_option("--out", sim_out, "Output dataset CSV");
    sim_cmd->add_flag("--print-config", sim_print, "Print the effective config and exit");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit model parameters by stochastic gradient");
    std::string fit_data, fit_config_path, fit_out;
    std::string fit_traj;
    int restarts = 1;
    bool fit_print = false;
    fit_cmd->add_option("--data", fit_data, "Dataset CSV")->required();
    fit_cmd->add_option("--config", fit_config_path, "SgdConfig JSON");
    fit_cmd->add_option("--out", fit_out, "Output model JSON");
    fit_cmd->add_option("--trajectory", fit_traj, "Optional parameter trajectory CSV");
    fit_cmd->add_option("--restarts", restarts, "Independent restarts; best by mean log-joint");
    fit_cmd->add_flag("--print-config", fit_print, "Print the effective config and exit");

    // fit-baseline
    auto* glm_cmd = app.add_subcommand("fit-baseline", "Fit a lagged logistic baseline");
    std::string glm_data, glm_out;
    int lag = 0, glm_iters = 100;
    double glm_tol = 1e-8;
    glm_cmd->add_option("--data", glm_data, "Dataset CSV")->required();
    glm_cmd->add_option("--lag", lag, "Lag depth (0, 1, 2, ...)")->required();
    glm_cmd->add_option("--out", glm_out, "Coefficient table CSV")->required();
    glm_cmd->add_option("--max-iters", glm_iters, "IRLS iteration cap");
    glm_cmd->add_option("--tol", glm_tol, "IRLS convergence tolerance");

    // score
    auto* score_cmd = app.add_subcommand("score", "Per-day purchase probabilities for a dataset");
    std::string score_model, score_data, score_out;
    int score_particles = 1000;
    score_cmd->add_option("--model", score_model, "Model JSON")->required();
    score_cmd->add_option("--data", score_data, "Dataset CSV")->required();
    score_cmd->add_option("--out", score_out, "Score CSV")->required();
    score_cmd->add_option("--particles", score_particles, "Particle count for filtering");

    // eval-roc
    auto* roc_cmd = app.add_subcommand("eval-roc", "ROC curve and AUC from scores or a model");
    std::string roc_scores, roc_model, roc_data, roc_out;
    int roc_particles = 1000;
    roc_cmd->add_option("--scores", roc_scores, "Score CSV produced by `score`");
    roc_cmd->add_option("--model", roc_model, "Model JSON (with --data)");
    roc_cmd->add_option("--data", roc_data, "Dataset CSV (with --model)");
    roc_cmd->add_option("--out", roc_out, "ROC curve CSV")->required();
    roc_cmd->add_option("--particles", roc_particles, "Particle count for filtering");

    // diag-lasttouch
    auto* diag_cmd = app.add_subcommand("diag-lasttouch",
                                        "Histogram of days between last touch and purchase");
    std::string diag_data, diag_out;
    int max_days = 30;
    diag_cmd->add_option("--data", diag_data, "Dataset CSV")->required();
    diag_cmd->add_option("--out", diag_out, "Histogram CSV")->required();
    diag_cmd->add_option("--max-days", max_days, "Largest lag bin");

    // split
    auto* split_cmd = app.add_subcommand("split", "Stratified customer-level train/test split");
    std::string split_data, train_out, test_out;
    double train_frac = 0.5;
    split_cmd->add_option("--data", split_data, "Dataset CSV")->required();
    split_cmd->add_option("--train-frac", train_frac, "Training fraction of each stratum");
    split_cmd->add_option("--train-out", train_out, "Training CSV")->required();
    split_cmd->add_option("--test-out", test_out, "Test CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim_cmd) {
            auto j = read_json_file(sim_config_path);
            dpm::SimConfig cfg = dpm::sim_config_from_json(j);
            if (seed_flag) cfg.seed = *seed_flag;
            std::optional<double> target;
            if (j.contains("calibrate_target_rate"))
                target = j.at("calibrate_target_rate").get<double>();
            if (sim_print) {
                auto out = dpm::sim_config_to_json(cfg);
                if (target) out["calibrate_target_rate"] = *target;
                std::cout << out.dump(2) << "\n";
                return 0;
            }
            if (sim_out.empty()) throw dpm::ContractViolation("simulate: --out is required");
            if (target) {
                cfg.true_params.c = dpm::calibrate_offset(cfg, *target);
                std::cout << "calibrated c=" << cfg.true_params.c << "\n";
            }
            dpm::Dataset data = dpm::generate(cfg);
            dpm::write_dataset(sim_out, data);
            std::cout << "wrote " << data.customers.size() << " customers ("
                      << dpm::daily_purchase_rate(data) << " daily purchase rate) to " << sim_out
                      << "\n";
        } else if (*fit_cmd) {
            dpm::SgdConfig cfg;
            if (!fit_config_path.empty()) cfg = dpm::sgd_config_from_json(read_json_file(fit_config_path));
            if (seed_flag) cfg.seed = *seed_flag;
            if (fit_print) {
                std::cout << dpm::sgd_config_to_json(cfg).dump(2) << "\n";
                return 0;
            }
            if (fit_out.empty()) throw dpm::ContractViolation("fit: --out is required");
            dpm::Dataset data = dpm::load_dataset(fit_data, segment_column);
            std::optional<fs::path> traj =
                fit_traj.empty() ? std::nullopt : std::optional<fs::path>(fit_traj);
            if (segment_column) {
                for (auto& [key, part] : dpm::partition_by_segment(data)) {
                    dpm::SgdConfig seg_cfg = cfg;
                    seg_cfg.seed = dpm::segment_seed(cfg.seed, key);
                    FitOutcome outcome = fit_with_restarts(part, seg_cfg, restarts);
                    std::optional<fs::path> seg_traj;
                    if (traj) seg_traj = with_segment_suffix(*traj, key);
                    write_fit_outputs(part, outcome, with_segment_suffix(fit_out, key), seg_traj);
                    std::cout << "segment " << key << ": " << outcome.report.iterations_run
                              << " iterations, converged=" << outcome.report.converged << "\n";
                }
            } else {
                FitOutcome outcome = fit_with_restarts(data, cfg, restarts);
                write_fit_outputs(data, outcome, fit_out, traj);
                std::cout << "fit: " << outcome.report.iterations_run
                          << " iterations, converged=" << outcome.report.converged << "\n";
                for (const auto& w : outcome.report.warnings) std::cout << "warning: " << w << "\n";
            }
        } else if (*glm_cmd) {
            dpm::Dataset data = dpm::load_dataset(glm_data, segment_column);
            dpm::LaggedDesign design = dpm::build_lagged_design(data, lag);
            dpm::GlmFit fit = dpm::fit_glm(design, glm_iters, glm_tol);
            dpm::atomic_write(glm_out, dpm::coefficients_to_csv(design.feature_names, fit));
            std::cout << "fit-baseline lag=" << lag << ": " << design.n_rows << " rows, converged="
                      << fit.converged << ", separation=" << fit.separation_detected << "\n";
        } else if (*score_cmd) {
            dpm::ModelFile mf = dpm::load_model(score_model);
            dpm::Dataset data = dpm::load_dataset(score_data, segment_column);
            if (data.k != mf.k || data.l != mf.l)
                throw dpm::ContractViolation("model/dataset channel counts disagree");
            dpm::FilterConfig fcfg;
            fcfg.particle_count = score_particles;
            fcfg.seed = seed_flag.value_or(0);
            auto scores = dpm::score_dataset(mf.params, data, fcfg, threads);
            dpm::atomic_write(score_out, dpm::scores_to_csv(data, scores));
            std::cout << "scored " << data.customers.size() << " customers to " << score_out << "\n";
        } else if (*roc_cmd) {
            std::vector<double> s;
            std::vector<int> y;
            if (!roc_scores.empty()) {
                std::ifstream in(roc_scores);
                if (!in) throw dpm::ValidationError("cannot open scores file: " + roc_scores);
                std::string line;
                if (!std::getline(in, line) || line != "id,day,score,label,in_pool")
                    throw dpm::ValidationError("bad scores header in " + roc_scores);
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    auto f = dpm::detail::split_csv_line(line);
                    if (f.size() != 5) throw dpm::ValidationError("bad scores row: " + line);
                    if (f[4] == "1") {
                        s.push_back(std::stod(f[2]));
                        y.push_back(std::stoi(f[3]));
                    }
                }
            } else if (!roc_model.empty() && !roc_data.empty()) {
                dpm::ModelFile mf = dpm::load_model(roc_model);
                dpm::Dataset data = dpm::load_dataset(roc_data, segment_column);
                if (data.k != mf.k || data.l != mf.l)
                    throw dpm::ContractViolation("model/dataset channel counts disagree");
                dpm::FilterConfig fcfg;
                fcfg.particle_count = roc_particles;
                fcfg.seed = seed_flag.value_or(0);
                auto scores = dpm::score_dataset(mf.params, data, fcfg, threads);
                dpm::pooled_roc_inputs(data, scores, s, y);
            } else {
                throw dpm::ContractViolation("eval-roc needs --scores or --model with --data");
            }
            dpm::RocResult roc = dpm::roc_curve(s, y);
            dpm::atomic_write(roc_out, dpm::roc_to_csv(roc));
            std::cout << "auc=" << dpm::detail::format_double(roc.auc) << "\n";
        } else if (*diag_cmd) {
            dpm::Dataset data = dpm::load_dataset(diag_data, segment_column);
            dpm::LastTouchHistogram hist = dpm::last_touch_histogram(data, max_days);
            dpm::atomic_write(diag_out, dpm::histogram_to_csv(hist, data.k, data.l));
            std::cout << "wrote last-touch histogram to " << diag_out << "\n";
        } else if (*split_cmd) {
            dpm::Dataset data = dpm::load_dataset(split_data, segment_column);
            auto [train_idx, test_idx] =
                dpm::stratified_split(data, train_frac, seed_flag.value_or(0));
            // Re-emit the original rows verbatim so formatting (dates, ids)
            // survives the split.
            std::ifstream in(split_data, std::ios::binary);
            std::string header;
            std::getline(in, header);
            std::unordered_map<std::string, std::string> rows_by_id;
            std::vector<std::string> id_order;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::string id = line.substr(0, line.find(','));
                auto [it, inserted] = rows_by_id.try_emplace(id);
                if (inserted) id_order.push_back(id);
                it->second += line;
                it->second += '\n';
            }
            auto emit = [&](const std::vector<std::size_t>& idx, const std::string& path) {
                std::string out = header + "\n";
                for (auto i : idx) out += rows_by_id.at(data.customers[i].id);
                dpm::atomic_write(path, out);
            };
            emit(train_idx, train_out);
            emit(test_idx, test_out);
            std::cout << "split " << data.customers.size() << " customers into "
                      << train_idx.size() << " train / " << test_idx.size() << " test\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
