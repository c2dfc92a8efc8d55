// qpole: offline training and closed-loop evaluation of a quantum cart-pole
// policy. One binary, subcommand style; a JSON manifest provides defaults
// and command-line flags override them.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qpole/dataset.hpp"
#include "qpole/errors.hpp"
#include "qpole/harness.hpp"
#include "qpole/parallel.hpp"
#include "qpole/trainer.hpp"
#include "qpole/version.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace qpole;
using cli::RunConfig;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

RunConfig resolve_config(const CommonArgs &args) {
    RunConfig config;
    if (!args.config_path.empty()) {
        config = cli::load_run_config(args.config_path);
    }
    if (args.seed) {
        config.seed = *args.seed;
    }
    if (args.workers) {
        config.workers = *args.workers;
    }
    config.train.seed = config.seed;
    config.train.workers = config.workers;
    config.dynamics.workers = config.workers;
    std::cerr << "qpole: seed " << config.seed << "\n";
    return config;
}

// Synthetic near-center start states for evaluation runs without a dataset:
// small position offset, small tilt, no velocity or action history.
std::vector<FeatureVector> centered_starts(const RunConfig &config, int n,
                                           std::uint64_t stream) {
    Rng rng = Rng::derive(config.seed, 0xe0a10000ULL + stream);
    std::vector<FeatureVector> starts;
    starts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        FeatureVector f;
        f.p = rng.uniform(-0.05, 0.05) * config.world.track_limit;
        const double theta = rng.uniform(-2.0, 2.0) * M_PI / 180.0;
        f.cos_theta = std::cos(theta);
        f.sin_theta = std::sin(theta);
        starts.push_back(f);
    }
    return starts;
}

int cmd_gen_data(const CommonArgs &common, int episodes,
                 const std::string &out) {
    const RunConfig config = resolve_config(common);
    const Dataset raw = generate_dataset(config.world, config.behavior,
                                         episodes, config.seed);
    const Dataset cleaned = clean_dataset(raw, config.world);
    write_dataset_csv(cleaned, out);
    std::cout << "records " << cleaned.size() << "\nepisodes "
              << cleaned.episode_count() << "\n";
    return 0;
}

int cmd_train_dynamics(const CommonArgs &common, const std::string &data,
                       std::optional<int> k_flag, const std::string &out) {
    RunConfig config = resolve_config(common);
    const int k = k_flag.value_or(config.dynamics_k);
    if (k < 1) {
        throw ConfigError("ensemble size must be >= 1");
    }
    const Dataset dataset = read_dataset_csv(data);
    const auto transitions = extract_transitions(dataset);
    std::cerr << "qpole: " << transitions.size() << " transitions, training "
              << k << " models\n";
    const TransitionEnsemble ensemble =
        train_ensemble(transitions, k, config.dynamics, config.seed);
    if (const fs::path dir = fs::path(out).parent_path(); !dir.empty()) {
        fs::create_directories(dir);
    }
    save_ensemble_checkpoint(ensemble, out);
    std::cout << "models " << ensemble.size() << "\nmanifest " << out << "\n";
    for (int i = 0; i < ensemble.size(); ++i) {
        std::cout << "mse[" << i << "] "
                  << format_double(ensemble.final_mse[static_cast<std::size_t>(i)])
                  << "\n";
    }
    return 0;
}

int cmd_train_policy(const CommonArgs &common, const std::string &ensemble_path,
                     const std::string &data, const std::string &out,
                     bool no_trainable_weights, std::optional<int> epochs_flag,
                     const std::string &report_flag,
                     const std::string &checkpoint_dir) {
    RunConfig config = resolve_config(common);
    if (no_trainable_weights) {
        config.policy.trainable_input_weights = false;
        config.policy.trainable_output_weight = false;
    }
    if (epochs_flag) {
        config.train.epochs = *epochs_flag;
    }
    const TransitionEnsemble ensemble = load_ensemble_checkpoint(ensemble_path);
    const Dataset dataset = read_dataset_csv(data);

    if (!checkpoint_dir.empty()) {
        fs::create_directories(checkpoint_dir);
    }
    const TrainResult result =
        train_policy(config.policy, config.normalization, config.world,
                     ensemble, dataset, config.train, checkpoint_dir);

    PolicyCheckpoint ckpt;
    ckpt.config = config.policy;
    ckpt.params = result.params;
    ckpt.normalization = config.normalization;
    ckpt.seed = config.seed;
    ckpt.step = static_cast<std::uint64_t>(config.train.epochs);
    if (const fs::path dir = fs::path(out).parent_path(); !dir.empty()) {
        fs::create_directories(dir);
    }
    save_policy_checkpoint(ckpt, out);

    const std::string report_path =
        report_flag.empty() ? (fs::path(out).replace_extension("").string() +
                               "_report.csv")
                            : report_flag;
    write_train_report_csv(result.report, report_path);

    std::cout << "checkpoint " << out << "\nreport " << report_path << "\n";
    if (!result.report.rows.empty()) {
        std::cout << "final_loss "
                  << format_double(result.report.rows.back().loss) << "\n";
    }
    return 0;
}

int cmd_eval(const CommonArgs &common, const std::string &policy_path,
             const std::string &mode, const std::string &ensemble_path,
             const std::string &data, bool bins, double latency_ms,
             double jitter_ms, std::optional<int> episodes_flag,
             std::optional<int> max_steps_flag, const std::string &out_dir) {
    RunConfig config = resolve_config(common);
    const PolicyCheckpoint ckpt = load_policy_checkpoint(policy_path);
    const ActionFn policy =
        make_policy_action(ckpt.config, ckpt.params, ckpt.normalization);
    const int episodes = episodes_flag.value_or(config.eval.episodes);
    const int max_steps = max_steps_flag.value_or(config.eval.max_steps);
    if (episodes < 1) {
        throw ConfigError("episodes must be >= 1");
    }
    fs::create_directories(out_dir);

    if (mode == "surrogate") {
        if (ensemble_path.empty()) {
            throw ConfigError("surrogate mode needs --ensemble");
        }
        const TransitionEnsemble ensemble =
            load_ensemble_checkpoint(ensemble_path);
        std::vector<FeatureVector> starts;
        if (!data.empty()) {
            starts = sample_initial_states(read_dataset_csv(data), episodes,
                                           config.seed);
        } else {
            starts = centered_starts(config, episodes, 1);
        }
        double total = 0.0;
        for (int i = 0; i < episodes; ++i) {
            const EpisodeTrace trace = surrogate_episode(
                policy, ensemble, config.world,
                starts[static_cast<std::size_t>(i)], max_steps,
                i % ensemble.size());
            total += trace.steps_balanced;
            const auto path =
                fs::path(out_dir) /
                ("surrogate_trace_" + std::to_string(i) + ".csv");
            write_trace_csv(trace, path.string());
            std::cout << "episode " << i << " steps " << trace.steps_balanced
                      << "\n";
        }
        std::cout << "mean_steps " << format_double(total / episodes) << "\n";
        return 0;
    }
    if (mode != "world") {
        throw ConfigError("mode must be surrogate or world");
    }

    config.latency.fixed_delay_ms = latency_ms;
    config.latency.jitter_ms = jitter_ms;
    if (bins) {
        BinsConfig bins_config;
        bins_config.bin_width = config.eval.bin_width;
        bins_config.runs_per_bin = config.eval.runs_per_bin;
        bins_config.max_start_angle = config.eval.max_start_angle;
        bins_config.max_steps = max_steps;
        const BinReport report =
            binned_evaluation(policy, config.world, bins_config, config.seed);
        const auto path = fs::path(out_dir) / "bin_report.csv";
        write_bin_report_csv(report, path.string());
        for (const auto &row : report.bins) {
            std::cout << "bin [" << format_double(row.start) << ", "
                      << format_double(row.end) << ") mean "
                      << format_double(row.mean_steps) << "\n";
        }
        std::cout << "report " << path.string() << "\n";
        return 0;
    }

    Rng start_rng = Rng::derive(config.seed, 0xe0a20000ULL);
    double total = 0.0;
    for (int i = 0; i < episodes; ++i) {
        PhysicalState start;
        start.p = start_rng.uniform(-0.05, 0.05) * config.world.track_limit;
        start.theta = start_rng.uniform(-2.0, 2.0) * M_PI / 180.0;
        const EpisodeTrace trace =
            run_episode(policy, config.world, start, config.latency, max_steps,
                        config.seed + static_cast<std::uint64_t>(i));
        total += trace.steps_balanced;
        const auto path =
            fs::path(out_dir) / ("world_trace_" + std::to_string(i) + ".csv");
        write_trace_csv(trace, path.string());
        std::cout << "episode " << i << " steps " << trace.steps_balanced
                  << "\n";
    }
    std::cout << "mean_steps " << format_double(total / episodes) << "\n";
    return 0;
}

int cmd_bench(const CommonArgs &common, const std::string &policy_path,
              int trials, int warmup, bool enforce, const std::string &out) {
    const RunConfig config = resolve_config(common);
    const PolicyCheckpoint ckpt = load_policy_checkpoint(policy_path);
    const ActionFn policy =
        make_policy_action(ckpt.config, ckpt.params, ckpt.normalization);
    // The benchmark is pinned to a single worker; nothing else runs.
    const LatencyStats stats =
        bench_inference(policy, trials, warmup, config.seed);
    std::cout << "mean_ms " << format_double(stats.mean_ms) << " std_ms "
              << format_double(stats.std_ms) << " p99_ms "
              << format_double(stats.p99_ms) << " samples " << stats.samples
              << "\n";
    if (!out.empty()) {
        std::ofstream csv(out, std::ios::binary);
        if (!csv) {
            throw DataError("cannot open benchmark output: " + out);
        }
        csv << "mean_ms,std_ms,p99_ms,samples\n";
        csv << format_double(stats.mean_ms) << ','
            << format_double(stats.std_ms) << ','
            << format_double(stats.p99_ms) << ',' << stats.samples << "\n";
    }
    if (enforce && stats.mean_ms >= 15.0) {
        std::cerr << "qpole: mean inference latency "
                  << format_double(stats.mean_ms)
                  << " ms exceeds the 15 ms real-time budget\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum-policy offline RL for cart-pole control"};
    app.set_version_flag("--version",
                         std::string("qpole ") + kVersion + " (" __DATE__ ")");
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    CommonArgs common;
    app.add_option("--config", common.config_path,
                   "JSON configuration manifest");
    app.add_option("--seed", common.seed, "global seed (overrides config)");
    app.add_option("--workers", common.workers,
                   "worker threads (0 = machine parallelism)");

    // gen-data
    auto *gen = app.add_subcommand("gen-data",
                                   "Generate and clean an offline dataset");
    int episodes = 50;
    std::string gen_out = "dataset.csv";
    gen->add_option("--episodes", episodes, "behavior episodes to run")
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output CSV path");

    // train-dynamics
    auto *dyn = app.add_subcommand("train-dynamics",
                                   "Train the transition-model ensemble");
    std::string dyn_data;
    std::optional<int> dyn_k;
    std::string dyn_out = "ensemble.json";
    dyn->add_option("--data", dyn_data, "dataset CSV")->required();
    dyn->add_option("--k", dyn_k, "ensemble size (default 20)");
    dyn->add_option("--out", dyn_out, "ensemble manifest path");

    // train-policy
    auto *train = app.add_subcommand("train-policy",
                                     "Optimize the quantum policy");
    std::string train_ensemble, train_data, train_report, train_ckpt_dir;
    std::string train_out = "policy.json";
    bool no_tw = false;
    std::optional<int> train_epochs;
    train->add_option("--ensemble", train_ensemble, "ensemble manifest")
        ->required();
    train->add_option("--data", train_data, "dataset CSV")->required();
    train->add_option("--out", train_out, "policy checkpoint path");
    train->add_flag("--no-trainable-weights", no_tw,
                    "freeze input and output weights");
    train->add_option("--epochs", train_epochs, "gradient steps");
    train->add_option("--report", train_report, "train report CSV path");
    train->add_option("--checkpoint-dir", train_ckpt_dir,
                      "directory for intermediate checkpoints");

    // eval
    auto *eval = app.add_subcommand("eval", "Closed-loop policy evaluation");
    std::string eval_policy, eval_mode = "world", eval_ensemble, eval_data;
    std::string eval_out_dir = "eval_out";
    bool eval_bins = false;
    double eval_latency_ms = 0.0, eval_jitter_ms = 0.0;
    std::optional<int> eval_episodes, eval_max_steps;
    eval->add_option("--policy", eval_policy, "policy checkpoint")->required();
    eval->add_option("--mode", eval_mode, "surrogate or world")
        ->check(CLI::IsMember({"surrogate", "world"}));
    eval->add_option("--ensemble", eval_ensemble,
                     "ensemble manifest (surrogate mode)");
    eval->add_option("--data", eval_data,
                     "dataset CSV for surrogate initial states");
    eval->add_flag("--bins", eval_bins, "binned start-position evaluation");
    eval->add_option("--latency-ms", eval_latency_ms,
                     "injected action delay in ms");
    eval->add_option("--jitter-ms", eval_jitter_ms,
                     "uniform latency jitter half-width in ms");
    eval->add_option("--episodes", eval_episodes, "episodes to run");
    eval->add_option("--max-steps", eval_max_steps, "episode step cap");
    eval->add_option("--out-dir", eval_out_dir, "directory for CSV outputs");

    // bench
    auto *bench = app.add_subcommand("bench", "Inference latency benchmark");
    std::string bench_policy, bench_out;
    int bench_trials = 1000, bench_warmup = 100;
    bool bench_enforce = false;
    bench->add_option("--policy", bench_policy, "policy checkpoint")
        ->required();
    bench->add_option("--trials", bench_trials, "measured samples (>= 100)");
    bench->add_option("--warmup", bench_warmup, "warmup calls to discard");
    bench->add_flag("--enforce", bench_enforce,
                    "exit nonzero if mean >= 15 ms");
    bench->add_option("--out", bench_out, "stats CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help / --version
        }
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_data(common, episodes, gen_out);
        }
        if (dyn->parsed()) {
            return cmd_train_dynamics(common, dyn_data, dyn_k, dyn_out);
        }
        if (train->parsed()) {
            return cmd_train_policy(common, train_ensemble, train_data,
                                    train_out, no_tw, train_epochs,
                                    train_report, train_ckpt_dir);
        }
        if (eval->parsed()) {
            return cmd_eval(common, eval_policy, eval_mode, eval_ensemble,
                            eval_data, eval_bins, eval_latency_ms,
                            eval_jitter_ms, eval_episodes, eval_max_steps,
                            eval_out_dir);
        }
        if (bench->parsed()) {
            if (bench_trials < 100) {
                throw ConfigError("bench needs at least 100 trials");
            }
            return cmd_bench(common, bench_policy, bench_trials, bench_warmup,
                             bench_enforce, bench_out);
        }
    } catch (const ConfigError &e) {
        std::cerr << "qpole: configuration error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UnsupportedError &e) {
        std::cerr << "qpole: unsupported: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError &e) {
        std::cerr << "qpole: data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError &e) {
        std::cerr << "qpole: numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception &e) {
        std::cerr << "qpole: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
