// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tokenprune/chair.hpp"
#include "tokenprune/complexity.hpp"
#include "tokenprune/dataio.hpp"
#include "tokenprune/harness.hpp"
#include "tokenprune/parallel.hpp"
#include "tokenprune/selectors.hpp"

namespace tokenprune::cli {

using nlohmann::json;

namespace detail {

inline json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

inline json selection_to_json(const PruneOutcome& outcome, Method method) {
    const auto& sel = outcome.selection;
    const auto& diag = sel.diagnostics;
    json diagnostics = {
        {"erank_retained", optional_number(diag.erank_retained)},
        {"erank_input", optional_number(diag.erank_input)},
        {"entropy_input", optional_number(diag.entropy_input)},
        {"thresholds_applied", diag.thresholds_applied},
        {"refilled", diag.refilled},
        {"mix_ratio", optional_number(diag.mix_ratio)},
        {"budget_used", diag.budget_used ? json(*diag.budget_used) : json(nullptr)},
    };
    json doc = {
        {"method", std::string(to_string(method))},
        {"k_effective", sel.k_effective},
        {"indices", sel.indices},
        {"selection_order", sel.selection_order},
        {"diagnostics", diagnostics},
    };
    if (outcome.trace) {
        json steps = json::array();
        for (const auto& s : outcome.trace->steps) {
            steps.push_back({{"token_index", s.token_index},
                             {"order", s.order},
                             {"tau", s.tau},
                             {"pruned_count", s.pruned_count}});
        }
        doc["trace"] = {{"steps", steps}, {"refilled_indices", outcome.trace->refilled_indices}};
    }
    return doc;
}

inline std::vector<Sample> load_corpus(const std::filesystem::path& source) {
    std::vector<Sample> corpus;
    for (const auto& path : resolve_dump_list(source)) {
        auto dump = read_dump(path);
        if (!dump.attention) {
            throw Error(ErrorCode::InvalidArgument, path.string() + " has no attention scores");
        }
        corpus.emplace_back(std::move(dump.matrix), std::move(*dump.attention));
    }
    return corpus;
}

inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            std::size_t used = 0;
            grid.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad grid value '" + item + "'");
        }
    }
    if (grid.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty tau-scale grid");
    }
    return grid;
}

/// Flags shared by prune and sweep for the corpus reference averages.
struct ReferenceFlags {
    std::optional<double> erank_avg;
    std::optional<double> entropy_avg;
    std::optional<double> mix_lo;
    std::optional<double> mix_hi;
    std::string stats_path;
    std::string signal = "erank";

    void add_to(CLI::App& cmd, bool with_mix) {
        cmd.add_option("--erank-avg", erank_avg, "Corpus mean erank");
        cmd.add_option("--entropy-avg", entropy_avg, "Corpus mean attention entropy");
        cmd.add_option("--stats", stats_path, "Stats JSON (erank_mean / entropy_mean keys)");
        cmd.add_option("--signal", signal, "Complexity signal: erank or entropy")
            ->check(CLI::IsMember({"erank", "entropy"}));
        if (with_mix) {
            cmd.add_option("--mix-lo", mix_lo, "Complexity at which the attention share is 1");
            cmd.add_option("--mix-hi", mix_hi, "Complexity at which the attention share is 0");
        }
    }

    void apply(PruneConfig& config) const {
        config.complexity_signal = parse_signal(signal);
        ReferenceStats stats;
        if (!stats_path.empty()) {
            stats = load_stats(stats_path);
        }
        config.erank_avg = erank_avg ? erank_avg : stats.erank_mean;
        config.entropy_avg = entropy_avg ? entropy_avg : stats.entropy_mean;
        const bool entropy = config.complexity_signal == ComplexitySignal::attention_entropy;
        const double lo_default = entropy ? stats.entropy_q1.value_or(clip_l_576::entropy_q1)
                                          : stats.erank_q1.value_or(clip_l_576::erank_q1);
        const double hi_default = entropy ? stats.entropy_q3.value_or(clip_l_576::entropy_q3)
                                          : stats.erank_q3.value_or(clip_l_576::erank_q3);
        config.mix_lo = mix_lo.value_or(lo_default);
        config.mix_hi = mix_hi.value_or(hi_default);
    }
};

}  // namespace detail

/// Entry point behind the tokenprune executable. Returns the process exit
/// code; all structured output goes to `out`, diagnostics to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Visual token pruning metrics and selectors", "tokenprune"};
    app.require_subcommand(1);

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Print erank (fast and SVD) and attention entropy of a dump");
    std::string metrics_dump;
    metrics->add_option("dump", metrics_dump, "TPK1 dump")->required();

    // prune
    auto* prune_cmd = app.add_subcommand("prune", "Select tokens from a dump and print the selection");
    std::string prune_dump;
    std::string method_name;
    std::size_t budget = 0;
    PruneConfig config;
    detail::ReferenceFlags prune_refs;
    std::optional<double> adaptive_budget_fraction;
    std::optional<std::size_t> start;
    prune_cmd->add_option("dump", prune_dump, "TPK1 dump")->required();
    prune_cmd->add_option("--method", method_name, "attention_topk | fps | hybrid_fixed | hybrid_adaptive | adaptive_threshold")
        ->required();
    prune_cmd->add_option("--budget", budget, "Token budget K")->required();
    prune_cmd->add_option("--tau-max", config.tau_max, "Threshold cap");
    prune_cmd->add_option("--tau-scale", config.tau_scale, "Threshold growth per selection");
    prune_cmd->add_option("--ratio", config.fixed_ratio, "Attention share for hybrid_fixed");
    prune_cmd->add_option("--adaptive-budget", adaptive_budget_fraction, "Adapt K by up to this fraction");
    prune_cmd->add_option("--start", start, "FPS start index (default: max-attention token)");
    prune_refs.add_to(*prune_cmd, true);

    // corpus-stats
    auto* stats_cmd = app.add_subcommand("corpus-stats", "Print erank / entropy means and quartiles of a corpus");
    std::string stats_source;
    stats_cmd->add_option("source", stats_source, "Directory of .tpk files, manifest .json, or list file")
        ->required();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Adaptive-threshold tau_scale sweep; prints CSV");
    std::string sweep_source;
    std::size_t sweep_budget = 0;
    std::string grid_text;
    double sweep_tau_max = PruneConfig{}.tau_max;
    detail::ReferenceFlags sweep_refs;
    sweep_cmd->add_option("dumps", sweep_source, "Directory of .tpk files, manifest .json, or list file")
        ->required();
    sweep_cmd->add_option("--budget", sweep_budget, "Token budget K")->required();
    sweep_cmd->add_option("--tau-scale-grid", grid_text, "Comma-separated tau_scale values")->required();
    sweep_cmd->add_option("--tau-max", sweep_tau_max, "Threshold cap");
    sweep_refs.add_to(*sweep_cmd, false);

    // chair
    auto* chair_cmd = app.add_subcommand("chair", "CHAIR hallucination metrics over a caption corpus");
    std::string captions_path;
    std::string lexicon_path;
    chair_cmd->add_option("--captions", captions_path, "Captions JSON-lines")->required();
    chair_cmd->add_option("--lexicon", lexicon_path, "Lexicon JSON (surface form -> object)")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus of TPK1 dumps plus manifest.json");
    std::string population = "complex";
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string out_dir;
    synth_cmd->add_option("--population", population, "simple or complex")
        ->check(CLI::IsMember({"simple", "complex"}));
    synth_cmd->add_option("--count", count, "Number of samples")->required();
    synth_cmd->add_option("--seed", seed, "First seed; sample i uses seed + i");
    synth_cmd->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*metrics) {
            const auto dump = read_dump(metrics_dump);
            json doc = {
                {"n_tokens", dump.matrix.rows()},
                {"dim", dump.matrix.cols()},
                {"erank_fast", erank_fast(dump.matrix)},
                {"erank_svd", erank_svd(dump.matrix)},
                {"attention_entropy", dump.attention ? json(attention_entropy(*dump.attention)) : json(nullptr)},
            };
            out << doc.dump(2) << '\n';
        } else if (*prune_cmd) {
            config.method = parse_method(method_name);
            config.budget = budget;
            config.fps_start = start;
            config.budget_adapt_fraction = adaptive_budget_fraction.value_or(0.0);
            prune_refs.apply(config);
            config.validate();
            const auto dump = read_dump(prune_dump);
            PruneOutcome outcome;
            if (dump.attention) {
                outcome = prune(dump.matrix, *dump.attention, config);
            } else if (config.method == Method::fps && config.budget_adapt_fraction == 0.0) {
                outcome.selection = select_fps(dump.matrix, config.budget, config.fps_start);
                outcome.selection.diagnostics.erank_input = erank(dump.matrix);
                outcome.selection.diagnostics.budget_used = config.budget;
                outcome.selection.diagnostics.erank_retained =
                    erank(dump.matrix.select_rows(outcome.selection.indices));
            } else {
                throw Error(ErrorCode::InvalidArgument,
                            prune_dump + " has no attention scores; only fps without --adaptive-budget can run");
            }
            out << detail::selection_to_json(outcome, config.method).dump(2) << '\n';
        } else if (*stats_cmd) {
            const auto corpus = detail::load_corpus(stats_source);
            out << stats_to_json(corpus_stats(corpus, thread_budget())).dump(2) << '\n';
        } else if (*sweep_cmd) {
            const auto grid = detail::parse_grid(grid_text);
            const auto corpus = detail::load_corpus(sweep_source);
            PruneConfig base;
            base.tau_max = sweep_tau_max;
            sweep_refs.apply(base);
            // Without a supplied reference, the sweep corpus is its own reference.
            if (!base.erank_avg || !base.entropy_avg) {
                const auto own = corpus_stats(corpus, thread_budget());
                base.erank_avg = base.erank_avg.value_or(own.erank_mean);
                base.entropy_avg = base.entropy_avg.value_or(own.entropy_mean);
            }
            const auto rows = harness::run_tau_sweep(corpus, sweep_budget, grid, base, thread_budget());
            out << "tau_scale,mean_erank_retained,mean_refilled\n";
            out << std::setprecision(std::numeric_limits<double>::max_digits10);
            for (const auto& r : rows) {
                out << r.tau_scale << ',' << r.mean_erank_retained << ',' << r.mean_refilled << '\n';
            }
        } else if (*chair_cmd) {
            const auto lexicon = load_lexicon(lexicon_path);
            const auto records = load_captions(captions_path, lexicon);
            const auto report = chair_metrics(records);
            json doc = {
                {"C_S", report.c_s},
                {"C_I", report.c_i},
                {"recall", report.recall},
                {"mean_len", report.mean_len},
                {"n_captions", report.n_captions},
                {"C_I_defined", report.c_i_defined},
                {"recall_defined", report.recall_defined},
            };
            out << doc.dump(2) << '\n';
        } else if (*synth_cmd) {
            namespace fs = std::filesystem;
            const auto pop = harness::parse_population(population);
            fs::create_directories(out_dir);
            json entries = json::array();
            for (std::size_t i = 0; i < count; ++i) {
                const auto spec = harness::default_spec(pop, seed + i);
                const auto [matrix, attn] = harness::generate(spec);
                std::ostringstream name;
                name << population << '_' << std::setw(4) << std::setfill('0') << i << ".tpk";
                write_dump(fs::path(out_dir) / name.str(), matrix, attn);
                entries.push_back({{"path", name.str()}, {"seed", spec.seed}});
            }
            json manifest = {{"population", population}, {"dumps", entries}};
            std::ofstream(fs::path(out_dir) / "manifest.json") << manifest.dump(2) << '\n';
            out << manifest.dump(2) << '\n';
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace tokenprune::cli
