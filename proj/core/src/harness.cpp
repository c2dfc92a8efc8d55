#include "qpole/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "qpole/dataset.hpp"
#include "qpole/errors.hpp"
#include "qpole/rng.hpp"

namespace qpole {

ActionFn make_policy_action(const PolicyConfig &config,
                            const PolicyParams &params,
                            const NormalizationSpec &normalization) {
    return [config, params, normalization](const FeatureVector &raw) {
        return act(config, params, normalize_features(raw, normalization));
    };
}

void LatencyModel::validate() const {
    if (fixed_delay_ms < 0.0 || jitter_ms < 0.0 ||
        fixed_delay_ms - jitter_ms < 0.0) {
        throw ConfigError("latency model must produce non-negative delays");
    }
}

FeatureVector physical_to_features(const PhysicalState &state, double a_prev3,
                                   double a_prev2, double a_prev1) {
    FeatureVector f;
    f.p = state.p;
    f.p_dot = state.p_dot;
    f.cos_theta = std::cos(state.theta);
    f.sin_theta = std::sin(state.theta);
    f.theta_dot = state.theta_dot;
    f.a_prev3 = a_prev3;
    f.a_prev2 = a_prev2;
    f.a_prev1 = a_prev1;
    return f;
}

namespace {

struct PendingAction {
    double ready_ms = 0.0; // absolute time the result becomes available
    int issued_step = 0;
    double value = 0.0;
};

double timed_action(const ActionFn &policy, const FeatureVector &features,
                    double &inference_ms) {
    const auto t0 = std::chrono::steady_clock::now();
    const double action = policy(features);
    inference_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    return action;
}

} // namespace

EpisodeTrace run_episode(const ActionFn &policy, const WorldConfig &world,
                         const PhysicalState &start,
                         const LatencyModel &latency, int max_steps,
                         std::uint64_t seed) {
    world.validate();
    latency.validate();
    if (max_steps < 1) {
        throw ConfigError("max_steps must be >= 1");
    }
    if (std::abs(start.p) > world.track_limit) {
        throw ConfigError("episode start is off the track");
    }

    Rng jitter_rng = Rng::derive(seed, /*stream_id=*/0x6c617463); // "latc"
    const double dt_ms = world.dt * 1e3;

    EpisodeTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(max_steps));

    PhysicalState state = start;
    double history[3] = {0.0, 0.0, 0.0}; // a_{t-3}, a_{t-2}, a_{t-1}
    std::vector<PendingAction> pending;
    double applied = 0.0; // most recent available action; zero before first

    for (int t = 0; t < max_steps; ++t) {
        const double now_ms = double(t) * dt_ms;

        // Promote the most recently issued completed request; anything
        // older is stale and dropped. Jitter can finish requests out of
        // order, so the whole queue is scanned.
        std::ptrdiff_t newest_ready = -1;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (pending[i].ready_ms <= now_ms && pending[i].issued_step < t) {
                newest_ready = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (newest_ready >= 0) {
            applied = pending[static_cast<std::size_t>(newest_ready)].value;
            pending.erase(pending.begin(), pending.begin() + newest_ready + 1);
        }

        // Issue this period's request from the current observation.
        const FeatureVector features =
            physical_to_features(state, history[0], history[1], history[2]);
        double inference_ms = 0.0;
        const double computed = timed_action(policy, features, inference_ms);
        const double jitter =
            latency.jitter_ms > 0.0
                ? jitter_rng.uniform(-latency.jitter_ms, latency.jitter_ms)
                : 0.0;
        pending.push_back(
            {now_ms + inference_ms + latency.fixed_delay_ms + jitter, t,
             computed});

        // The plant runs on the applied (possibly stale) action. The logged
        // reward is the current state's, so traces recompute exactly.
        const double r = reward(world, state.p, state.theta, state.theta_dot);
        trace.steps.push_back({t, state, features, applied, r, inference_ms});
        const PhysicalState next = physics_step(state, applied, world);

        history[0] = history[1];
        history[1] = history[2];
        history[2] = applied;

        if (std::abs(next.theta) > world.fail_angle) {
            trace.steps_balanced = t + 1;
            trace.termination_cause = TerminationCause::PoleFell;
            return trace;
        }
        if (std::abs(next.p) > world.track_limit) {
            trace.steps_balanced = t + 1;
            trace.termination_cause = TerminationCause::TrackExceeded;
            return trace;
        }
        state = next;
    }
    trace.steps_balanced = max_steps;
    trace.termination_cause = TerminationCause::MaxSteps;
    return trace;
}

BinReport binned_evaluation(const ActionFn &policy, const WorldConfig &world,
                            const BinsConfig &bins, std::uint64_t seed) {
    world.validate();
    const double span = 2.0 * world.track_limit;
    const double width = bins.bin_width > 0.0 ? bins.bin_width : span / 10.0;
    const double ratio = span / width;
    const int n_bins = static_cast<int>(std::lround(ratio));
    if (n_bins < 1 || std::abs(ratio - double(n_bins)) > 1e-9) {
        throw ConfigError("bin width does not tile the track span");
    }
    if (bins.runs_per_bin < 1) {
        throw ConfigError("runs_per_bin must be >= 1");
    }

    BinReport report;
    report.bins.reserve(static_cast<std::size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) {
        const double lo = -world.track_limit + b * width;
        const double hi = lo + width;
        Rng rng = Rng::derive(seed, 0x62696e00ULL + static_cast<std::uint64_t>(b));

        BinRow row;
        row.start = lo;
        row.end = hi;
        row.min_steps = bins.max_steps;
        row.max_steps = 0;
        double total = 0.0;
        for (int run = 0; run < bins.runs_per_bin; ++run) {
            PhysicalState start;
            start.p = rng.uniform(lo, hi);
            // Keep the cart physically on the track at the outer bins.
            start.p = std::clamp(start.p, -world.track_limit + 1e-6,
                                 world.track_limit - 1e-6);
            start.theta = rng.uniform(-bins.max_start_angle,
                                      bins.max_start_angle);
            const std::uint64_t episode_seed =
                seed ^ (static_cast<std::uint64_t>(b) << 32 |
                        static_cast<std::uint64_t>(run));
            const EpisodeTrace trace =
                run_episode(policy, world, start, LatencyModel{},
                            bins.max_steps, episode_seed);
            total += trace.steps_balanced;
            row.min_steps = std::min(row.min_steps, trace.steps_balanced);
            row.max_steps = std::max(row.max_steps, trace.steps_balanced);
        }
        row.mean_steps = total / bins.runs_per_bin;
        report.bins.push_back(row);
    }
    return report;
}

EpisodeTrace surrogate_episode(const ActionFn &policy,
                               const TransitionEnsemble &ensemble,
                               const WorldConfig &world,
                               const FeatureVector &s0, int max_steps,
                               int model_index) {
    if (ensemble.models.empty()) {
        throw ConfigError("empty transition ensemble");
    }
    if (model_index < 0 || model_index >= ensemble.size()) {
        throw ConfigError("surrogate model index out of range");
    }
    if (max_steps < 1) {
        throw ConfigError("max_steps must be >= 1");
    }
    const TransitionNet &model =
        ensemble.models[static_cast<std::size_t>(model_index)];

    EpisodeTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(max_steps));
    FeatureVector state = s0;
    for (int t = 0; t < max_steps; ++t) {
        double inference_ms = 0.0;
        const double action = timed_action(policy, state, inference_ms);
        const Delta5 delta = net_forward(model, state, action);
        FeatureVector next;
        try {
            next = step_features(state, action, delta);
        } catch (const NumericError &) {
            trace.steps_balanced = t;
            trace.termination_cause = TerminationCause::PoleFell;
            return trace;
        }
        PhysicalState as_physical;
        as_physical.p = state.p;
        as_physical.p_dot = state.p_dot;
        as_physical.theta = state.theta();
        as_physical.theta_dot = state.theta_dot;
        const double r =
            reward(world, as_physical.p, as_physical.theta, as_physical.theta_dot);
        trace.steps.push_back({t, as_physical, state, action, r, inference_ms});

        if (std::abs(next.theta()) > world.fail_angle) {
            trace.steps_balanced = t + 1;
            trace.termination_cause = TerminationCause::PoleFell;
            return trace;
        }
        if (std::abs(next.p) > world.track_limit) {
            trace.steps_balanced = t + 1;
            trace.termination_cause = TerminationCause::TrackExceeded;
            return trace;
        }
        state = next;
    }
    trace.steps_balanced = max_steps;
    trace.termination_cause = TerminationCause::MaxSteps;
    return trace;
}

LatencyStats bench_inference(const ActionFn &policy, int n_trials, int warmup,
                             std::uint64_t seed) {
    if (n_trials < 100) {
        throw ConfigError("latency benchmark needs at least 100 trials");
    }
    if (warmup < 0) {
        throw ConfigError("warmup must be >= 0");
    }
    Rng rng = Rng::derive(seed, /*stream_id=*/0x62656e63); // "benc"
    auto random_features = [&] {
        FeatureVector f;
        f.p = rng.uniform(-2.0, 2.0);
        f.p_dot = rng.uniform(-2.0, 2.0);
        const double theta = rng.uniform(-0.2, 0.2);
        f.cos_theta = std::cos(theta);
        f.sin_theta = std::sin(theta);
        f.theta_dot = rng.uniform(-2.0, 2.0);
        f.a_prev3 = rng.uniform(-1.0, 1.0);
        f.a_prev2 = rng.uniform(-1.0, 1.0);
        f.a_prev1 = rng.uniform(-1.0, 1.0);
        return f;
    };

    for (int i = 0; i < warmup; ++i) {
        volatile double sink = policy(random_features());
        (void)sink;
    }

    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(n_trials));
    for (int i = 0; i < n_trials; ++i) {
        const FeatureVector f = random_features();
        const auto t0 = std::chrono::steady_clock::now();
        volatile double sink = policy(f);
        (void)sink;
        samples.push_back(std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
    }

    LatencyStats stats;
    stats.samples = n_trials;
    double sum = 0.0;
    for (double s : samples) {
        sum += s;
    }
    stats.mean_ms = sum / double(n_trials);
    double var = 0.0;
    for (double s : samples) {
        var += (s - stats.mean_ms) * (s - stats.mean_ms);
    }
    stats.std_ms = std::sqrt(var / double(n_trials));
    std::sort(samples.begin(), samples.end());
    const std::size_t p99_idx = static_cast<std::size_t>(
        std::min<double>(double(n_trials) - 1.0, std::ceil(0.99 * n_trials) - 1.0));
    stats.p99_ms = samples[p99_idx];
    return stats;
}

void write_trace_csv(const EpisodeTrace &trace, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open trace for writing: " + path);
    }
    out << "t,p,p_dot,theta,theta_dot,action,reward,inference_ms\n";
    for (const auto &step : trace.steps) {
        out << step.t << ',' << format_double(step.physical.p) << ','
            << format_double(step.physical.p_dot) << ','
            << format_double(step.physical.theta) << ','
            << format_double(step.physical.theta_dot) << ','
            << format_double(step.action) << ',' << format_double(step.reward)
            << ',' << format_double(step.inference_ms) << '\n';
    }
}

void write_bin_report_csv(const BinReport &report, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open bin report for writing: " + path);
    }
    out << "bin_start,bin_end,mean_steps,min_steps,max_steps\n";
    for (const auto &row : report.bins) {
        out << format_double(row.start) << ',' << format_double(row.end) << ','
            << format_double(row.mean_steps) << ',' << row.min_steps << ','
            << row.max_steps << '\n';
    }
}

} // namespace qpole
