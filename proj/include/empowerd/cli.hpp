#pragma once

#include "empowerd/config.hpp"
#include "empowerd/mi_bench.hpp"
#include "empowerd/oracle.hpp"
#include "empowerd/svg.hpp"
#include "empowerd/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

namespace empowerd {

namespace detail {

// Machine-readable results go to stdout as key=value lines; prose to stderr.
inline void emit(const std::string& key, const std::string& value) {
    std::cout << key << '=' << value << '\n';
}

inline void emit(const std::string& key, double value) {
    std::cout << key << '=' << format_double(value) << '\n';
}

inline void emit(const std::string& key, long value) { std::cout << key << '=' << value << '\n'; }

inline Mat channel_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("ba: cannot open channel file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("ba: JSON parse error: ") + e.what());
    }
    const nlohmann::json& rows = doc.is_object() && doc.contains("channel") ? doc["channel"] : doc;
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw InvalidInputError("ba: expected a 2D channel matrix");
    const size_t n_out = rows[0].size();
    Mat channel(rows.size(), n_out);
    for (size_t x = 0; x < rows.size(); ++x) {
        if (rows[x].size() != n_out) throw InvalidInputError("ba: ragged channel rows");
        for (size_t y = 0; y < n_out; ++y) channel(x, y) = rows[x][y].get<double>();
    }
    return channel;
}

inline std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw InvalidInputError("train: empty seed list");
    return seeds;
}

inline int run_train(const std::string& config_path, const std::vector<std::string>& overrides,
                     std::string output_dir, const std::string& seeds_csv) {
    RunConfig base = config_path.empty() ? parse_config_text("", overrides)
                                         : parse_config(config_path, overrides);
    if (const char* env_out = std::getenv("EMPOWERD_OUT")) output_dir = env_out;
    if (output_dir.empty()) output_dir = "runs";

    std::vector<uint64_t> seeds =
        seeds_csv.empty() ? std::vector<uint64_t>{base.seed} : parse_seed_list(seeds_csv);

    struct PerSeed {
        uint64_t seed;
        RunSummary summary;
        std::exception_ptr error;
    };
    std::vector<PerSeed> results(seeds.size());
    auto run_one = [&](size_t i) {
        results[i].seed = seeds[i];
        try {
            RunConfig config = base;
            config.seed = seeds[i];
            const std::string dir = seeds.size() == 1
                                        ? output_dir
                                        : output_dir + "/seed_" + std::to_string(seeds[i]);
            results[i].summary = train(config, dir);
        } catch (...) {
            results[i].error = std::current_exception();
        }
    };
    if (seeds.size() == 1) {
        run_one(0);
    } else {
        std::vector<std::thread> workers;
        for (size_t i = 0; i < seeds.size(); ++i) workers.emplace_back(run_one, i);
        for (auto& w : workers) w.join();
    }

    for (const auto& r : results) {
        if (r.error) std::rethrow_exception(r.error);
        const auto& s = r.summary;
        long last100 = 0;
        const size_t n = s.episode_returns.size();
        for (size_t i = n > 100 ? n - 100 : 0; i < n; ++i)
            if (s.episode_returns[i] > 0.0) ++last100;
        std::cout << "seed=" << r.seed << " steps=" << s.steps << " episodes=" << s.episodes
                  << " updates=" << s.updates << " target_syncs=" << s.target_syncs
                  << " final_epsilon=" << format_double(s.final_epsilon)
                  << " last100_successes=" << last100 << " metrics=" << s.metrics_path
                  << " checkpoint=" << s.checkpoint_dir << '\n';
    }
    return 0;
}

inline int run_plot(const std::string& input, const std::string& columns,
                    const std::string& output) {
    std::ifstream in(input);
    if (!in) throw InvalidInputError("plot: cannot open " + input);
    std::string header;
    if (!std::getline(in, header)) throw InvalidInputError("plot: empty file " + input);

    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string cell;
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    auto column_index = [&](const std::string& name) {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        throw InvalidInputError("plot: no column '" + name + "' in " + input);
    };

    const int x_idx = column_index("step");
    std::vector<Series> series;
    std::stringstream cols(columns);
    std::string col;
    std::vector<int> y_idx;
    while (std::getline(cols, col, ',')) {
        if (col.empty()) continue;
        y_idx.push_back(column_index(col));
        series.push_back({col, {}, {}});
    }
    if (series.empty()) throw InvalidInputError("plot: no columns requested");

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
        for (size_t k = 0; k < series.size(); ++k) {
            series[k].xs.push_back(cells.at(x_idx));
            series[k].ys.push_back(cells.at(y_idx[k]));
        }
    }
    write_svg(output, render_line_chart(series, input, "step"));
    emit("svg", output);
    return 0;
}

}  // namespace detail

// Subcommands: train, eval, scan, mi-bench, ba, plot. Exit codes: 0 success,
// 1 invalid input, 2 numeric fault.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"empowerment-driven exploration workbench"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "run the joint training loop");
    std::string config_path, output_dir, seeds_csv;
    std::vector<std::string> overrides;
    train_cmd->add_option("--config", config_path, "flat TOML config file");
    train_cmd->add_option("--output-dir", output_dir, "output directory (env EMPOWERD_OUT wins)");
    train_cmd->add_option("--seeds", seeds_csv, "comma-separated seeds, run concurrently");
    train_cmd->add_option("overrides", overrides, "key=value config overrides");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "greedy rollouts from a checkpoint");
    std::string eval_checkpoint, eval_env;
    int eval_episodes = 100;
    uint64_t eval_seed = 0;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
    eval_cmd->add_option("--episodes", eval_episodes, "number of rollouts");
    eval_cmd->add_option("--env", eval_env, "environment override");
    eval_cmd->add_option("--seed", eval_seed, "rng seed for slip environments");

    // scan
    auto* scan_cmd = app.add_subcommand("scan", "oracle vs estimate empowerment per state");
    std::string scan_checkpoint, scan_env, scan_source = "uniform", scan_out = "scan.csv";
    int scan_draws = 32;
    uint64_t scan_seed = 0;
    scan_cmd->add_option("--checkpoint", scan_checkpoint, "checkpoint directory")->required();
    scan_cmd->add_option("--env", scan_env, "environment override");
    scan_cmd->add_option("--source", scan_source, "action source: uniform or policy");
    scan_cmd->add_option("--draws", scan_draws, "joint samples per state");
    scan_cmd->add_option("--out", scan_out, "output CSV path");
    scan_cmd->add_option("--seed", scan_seed, "rng seed");

    // mi-bench
    auto* mi_cmd = app.add_subcommand("mi-bench", "Gaussian-pair DV estimator benchmark");
    std::vector<double> rhos{0.5};
    long mi_steps = 20000;
    int mi_batch = 64, mi_hidden = 128, mi_eval = 65536;
    double mi_lr = 1e-3;
    uint64_t mi_seed = 1;
    mi_cmd->add_option("--rho", rhos, "correlation coefficients (0 = independence)");
    mi_cmd->add_option("--steps", mi_steps, "training updates");
    mi_cmd->add_option("--batch", mi_batch, "batch size");
    mi_cmd->add_option("--hidden", mi_hidden, "hidden width");
    mi_cmd->add_option("--lr", mi_lr, "learning rate");
    mi_cmd->add_option("--seed", mi_seed, "rng seed");
    mi_cmd->add_option("--eval-samples", mi_eval, "held-out sample count for the final bound");

    // ba
    auto* ba_cmd = app.add_subcommand("ba", "Blahut-Arimoto capacity of a JSON channel");
    std::string ba_file;
    double ba_tol = 1e-9;
    int ba_iters = 10000;
    bool ba_bits = false;
    ba_cmd->add_option("--channel", ba_file, "JSON channel matrix")->required();
    ba_cmd->add_option("--tol", ba_tol, "convergence tolerance");
    ba_cmd->add_option("--max-iters", ba_iters, "iteration cap");
    ba_cmd->add_flag("--bits", ba_bits, "also print the capacity in bits");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "render CSV columns to an SVG line chart");
    std::string plot_in, plot_cols, plot_out = "plot.svg";
    plot_cmd->add_option("--input", plot_in, "metrics CSV")->required();
    plot_cmd->add_option("--columns", plot_cols, "comma-separated column names")->required();
    plot_cmd->add_option("--output", plot_out, "SVG output path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends
            std::cout << app.help();
            return 0;
        }
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (train_cmd->parsed())
            return detail::run_train(config_path, overrides, output_dir, seeds_csv);

        if (eval_cmd->parsed()) {
            const EvalResult r =
                evaluate_checkpoint(eval_checkpoint, eval_episodes, eval_seed, eval_env);
            detail::emit("episodes", static_cast<long>(eval_episodes));
            detail::emit("success_rate", r.success_rate);
            detail::emit("mean_return", r.mean_return);
            return 0;
        }

        if (scan_cmd->parsed()) {
            const Checkpoint ck = load_checkpoint(scan_checkpoint);
            GridRooms env = make_env(scan_env.empty() ? ck.config.env : scan_env,
                                     ck.config.max_steps, ck.config.slip);
            const ScanResult scan =
                empowerment_scan(ck, env, scan_source, scan_draws, scan_seed);
            write_scan_csv(scan, scan_out);
            detail::emit("states", static_cast<long>(scan.rows.size()));
            detail::emit("spearman", scan.spearman_rank_correlation);
            detail::emit("csv", scan_out);
            return 0;
        }

        if (mi_cmd->parsed()) {
            for (double rho : rhos) {
                const MiBenchResult r = run_mi_benchmark(rho, mi_steps, mi_batch, mi_seed,
                                                         mi_hidden, mi_lr, mi_eval);
                std::cout << "rho=" << detail::format_double(rho)
                          << " analytic_nats=" << detail::format_double(r.analytic_nats)
                          << " estimate_nats=" << detail::format_double(r.estimate_nats)
                          << " steps=" << r.steps << '\n';
            }
            return 0;
        }

        if (ba_cmd->parsed()) {
            const Mat channel = detail::channel_from_json_file(ba_file);
            const CapacityResult r = blahut_arimoto(channel, ba_tol, ba_iters);
            detail::emit("capacity_nats", r.capacity_nats);
            if (ba_bits) detail::emit("capacity_bits", r.capacity_nats / std::log(2.0));
            std::ostringstream src;
            for (int i = 0; i < r.optimal_source.size(); ++i) {
                if (i) src << ';';
                src << detail::format_double(r.optimal_source[i]);
            }
            detail::emit("optimal_source", src.str());
            detail::emit("iterations", static_cast<long>(r.iterations));
            return 0;
        }

        if (plot_cmd->parsed()) return detail::run_plot(plot_in, plot_cols, plot_out);
    } catch (const NumericFaultError& e) {
        std::cerr << "numeric fault: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

inline int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace empowerd
