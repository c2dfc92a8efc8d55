#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qpole/cartpole.hpp"
#include "qpole/ensemble.hpp"
#include "qpole/policy.hpp"

namespace qpole {

/// Any action source: raw features in, action out. The VQC policy, test
/// stubs and classical controllers all fit behind this.
using ActionFn = std::function<double(const FeatureVector &)>;

/// Wraps a policy checkpoint as an ActionFn that normalizes internally.
ActionFn make_policy_action(const PolicyConfig &config,
                            const PolicyParams &params,
                            const NormalizationSpec &normalization);

/// Injected delay before a computed action becomes available to the plant.
struct LatencyModel {
    double fixed_delay_ms = 0.0;
    double jitter_ms = 0.0; // half-width of uniform jitter

    void validate() const;
};

enum class TerminationCause { PoleFell, TrackExceeded, MaxSteps };

struct EpisodeStep {
    int t = 0;
    PhysicalState physical;
    FeatureVector features;
    double action = 0.0;
    double reward = 0.0;
    double inference_ms = 0.0;
};

struct EpisodeTrace {
    std::vector<EpisodeStep> steps;
    int steps_balanced = 0;
    TerminationCause termination_cause = TerminationCause::MaxSteps;
};

/// Closed-loop episode against the ground-truth simulator. Each control
/// period issues one policy request from the current state; the applied
/// action is the most recent request whose inference time plus injected
/// delay has elapsed, and zero until the first one lands. Terminates on
/// |theta| > fail_angle, |p| > track_limit, or max_steps.
EpisodeTrace run_episode(const ActionFn &policy, const WorldConfig &world,
                         const PhysicalState &start,
                         const LatencyModel &latency, int max_steps,
                         std::uint64_t seed = 0);

struct BinsConfig {
    double bin_width = 0.0; // 0 = track span / 10
    int runs_per_bin = 10;
    double max_start_angle = 3.0 * M_PI / 180.0;
    int max_steps = 500;
};

struct BinRow {
    double start = 0.0;
    double end = 0.0;
    double mean_steps = 0.0;
    int min_steps = 0;
    int max_steps = 0;
};

struct BinReport {
    std::vector<BinRow> bins;
};

/// Tiles [-track_limit, +track_limit] with equal bins and runs
/// runs_per_bin episodes per bin from uniform start positions with a small
/// random pole-angle perturbation. Throws ConfigError when the bin width
/// does not divide the track span.
BinReport binned_evaluation(const ActionFn &policy, const WorldConfig &world,
                            const BinsConfig &bins, std::uint64_t seed);

/// Rolls the policy through one ensemble member without gradients,
/// terminating on the same balance criteria evaluated in feature space.
EpisodeTrace surrogate_episode(const ActionFn &policy,
                               const TransitionEnsemble &ensemble,
                               const WorldConfig &world,
                               const FeatureVector &s0, int max_steps,
                               int model_index = 0);

struct LatencyStats {
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double p99_ms = 0.0;
    int samples = 0;
};

/// Wall-clock per-call statistics of the policy on random feature inputs,
/// after warmup discards. Requires n_trials >= 100.
LatencyStats bench_inference(const ActionFn &policy, int n_trials, int warmup,
                             std::uint64_t seed = 0);

/// CSV exports: trace `t,p,p_dot,theta,theta_dot,action,reward,inference_ms`,
/// bins `bin_start,bin_end,mean_steps,min_steps,max_steps`.
void write_trace_csv(const EpisodeTrace &trace, const std::string &path);
void write_bin_report_csv(const BinReport &report, const std::string &path);

/// Raw-state to feature-vector view used by the closed loop (history comes
/// from the episode's applied actions).
FeatureVector physical_to_features(const PhysicalState &state, double a_prev3,
                                   double a_prev2, double a_prev1);

} // namespace qpole
