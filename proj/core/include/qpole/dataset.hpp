#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpole/cartpole.hpp"
#include "qpole/features.hpp"

namespace qpole {

/// One recorded control step. Episodes are delimited purely by done flags;
/// t increments by one within an episode.
struct DatasetRecord {
    std::int64_t t = 0;
    double p = 0.0;
    double p_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;
    double action = 0.0;
    double reward = 0.0;
    bool done = false;
};

struct Dataset {
    std::vector<DatasetRecord> records;

    std::size_t size() const { return records.size(); }
    std::size_t episode_count() const;
};

/// Stochastic behavior policy for offline data collection: a uniform random
/// action with probability random_mix, otherwise a weak proportional
/// controller with additive exploration noise.
struct BehaviorSpec {
    double random_mix = 0.35;
    double k_theta = 6.0;
    double k_theta_dot = 1.2;
    double k_p = 0.12;
    double k_p_dot = 0.25;
    double action_noise = 0.15;
    int max_steps = 500;
    double start_p_span = 0.9;      // fraction of track_limit for |p0|
    double start_angle_span = 0.05; // rad for |theta0|
};

/// Runs `episodes` episodes of the behavior policy from randomized starts
/// and records every transition. Deterministic per seed.
Dataset generate_dataset(const WorldConfig &config, const BehaviorSpec &behavior,
                         int episodes, std::uint64_t seed);

/// Drops out-of-track, non-finite, and angle-discontinuous records
/// (wrapped |dtheta| >= 1 rad within an episode), re-closing episodes at
/// every drop point. Idempotent.
Dataset clean_dataset(const Dataset &raw, const WorldConfig &config);

/// Window length required before a record becomes an eligible initial
/// state (the record itself plus seven in-episode predecessors).
inline constexpr int kInitWindow = 8;

/// Indices of records eligible as rollout initial states.
std::vector<std::size_t> eligible_initial_indices(const Dataset &dataset);

/// Converts a window of kInitWindow consecutive in-episode records into a
/// FeatureVector: state from the last record, action history from the three
/// records before it. Throws DataError if the window is malformed.
FeatureVector to_features(const std::vector<DatasetRecord> &window);

/// Builds the feature vector for the eligible record at `index`.
FeatureVector features_at(const Dataset &dataset, std::size_t index);

/// Draws n eligible records uniformly without replacement. Throws DataError
/// when fewer than n records are eligible.
std::vector<FeatureVector> sample_initial_states(const Dataset &dataset, int n,
                                                 std::uint64_t seed);

/// (s_t, a_t, s_{t+1}) training triple for the transition models.
struct TransitionSample {
    FeatureVector s;
    double a = 0.0;
    FeatureVector s_next;
};

/// Extracts every in-episode transition whose endpoints both have full
/// action histories.
std::vector<TransitionSample> extract_transitions(const Dataset &dataset);

/// CSV contract: header `t,p,p_dot,theta,theta_dot,action,reward,done`,
/// floats in shortest round-trip decimal, done in {0,1}.
void write_dataset_csv(const Dataset &dataset, const std::string &path);
Dataset read_dataset_csv(const std::string &path);

/// Shortest round-trip decimal rendering shared by all CSV writers.
std::string format_double(double value);

} // namespace qpole
