#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpole/cartpole.hpp"
#include "qpole/ensemble.hpp"
#include "qpole/optimizer.hpp"
#include "qpole/policy.hpp"
#include "qpole/rng.hpp"

namespace qpole {

/// Policy-optimization settings. Defaults reproduce the published
/// configuration (Adam at 0.01, 400 initial states, discounted rollouts
/// through the frozen ensemble).
struct TrainConfig {
    double gamma = 0.99;
    int horizon = 100;
    int n_init = 400;
    int ensemble_batch = 64;  // (n, k) pairs per gradient step
    AdamConfig adam{};        // learning_rate 0.01 by default
    int epochs = 2000;        // gradient steps
    int checkpoint_every = 0; // 0 = epochs / 10
    double grad_clip_norm = 10.0;
    bool full_model_average = false; // average all K models per initial state
    unsigned workers = 0;            // 0 = machine parallelism
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrajectoryStep {
    FeatureVector state;
    double action = 0.0;
    double reward = 0.0;
};

/// One differentiable H-step rollout: trajectory, discounted return, and
/// d(return)/d(policy parameters).
struct RolloutResult {
    std::vector<TrajectoryStep> trajectory;
    double discounted_return = 0.0;
    PolicyGradient gradient;
    bool truncated = false; // numeric overflow cut the rollout short
};

/// Rolls `policy` through one transition model for up to config.horizon
/// steps, backpropagating through time across the policy, the model, the
/// feature-step update and the reward.
RolloutResult rollout(const PolicyConfig &policy_config,
                      const PolicyParams &params,
                      const NormalizationSpec &normalization,
                      const WorldConfig &world, const TransitionNet &model,
                      const FeatureVector &s0, const TrainConfig &config);

/// Monte Carlo estimate of the negative expected return and its gradient
/// over config.ensemble_batch (initial state, model) pairs sampled from
/// `rng`. With full_model_average set, every sampled initial state is
/// averaged over all K models instead.
struct LossAndGrad {
    double loss = 0.0;
    PolicyGradient gradient;
};

LossAndGrad loss_and_grad(const PolicyConfig &policy_config,
                          const PolicyParams &params,
                          const NormalizationSpec &normalization,
                          const WorldConfig &world,
                          const TransitionEnsemble &ensemble,
                          const std::vector<FeatureVector> &init_states,
                          const TrainConfig &config, Rng &rng);

/// One Adam step over the flattened policy parameters; frozen groups stay
/// untouched.
void adam_step(PolicyParams &params, const PolicyGradient &grad,
               AdamState &state, const AdamConfig &config);

/// Mean absolute magnitude per parameter group.
struct WeightStats {
    double input_weights = 0.0;
    double variational = 0.0;
    double output_weight = 0.0;
};

WeightStats weight_stats(const PolicyParams &params);

struct TrainCheckpointRow {
    std::uint64_t step = 0;
    double loss = 0.0;
    WeightStats stats;
    double wall_ms = 0.0;
};

/// Checkpoint history; exported as CSV
/// `step,loss,mean_abs_input_w,mean_abs_variational,mean_abs_output_w,wall_ms`.
struct TrainReport {
    std::vector<TrainCheckpointRow> rows;
};

void write_train_report_csv(const TrainReport &report, const std::string &path);

struct TrainResult {
    PolicyParams params;
    TrainReport report;
    std::vector<FeatureVector> init_states;
};

/// Full policy optimization: samples the initial-state pool once, then runs
/// `epochs` steps of loss_and_grad + gradient clip + adam_step. When
/// `checkpoint_dir` is non-empty, intermediate checkpoints are written
/// there as policy_step<N>.json. Bit-reproducible per config.seed (the
/// wall_ms report column aside).
TrainResult train_policy(const PolicyConfig &policy_config,
                         const NormalizationSpec &normalization,
                         const WorldConfig &world,
                         const TransitionEnsemble &ensemble,
                         const Dataset &dataset, const TrainConfig &config,
                         const std::string &checkpoint_dir = "");

} // namespace qpole
