#pragma once

#include <cstdint>
#include <string>

#include "qpole/cartpole.hpp"
#include "qpole/dataset.hpp"
#include "qpole/ensemble.hpp"
#include "qpole/harness.hpp"
#include "qpole/policy.hpp"
#include "qpole/trainer.hpp"

namespace qpole::cli {

struct EvalConfig {
    int episodes = 5;
    int max_steps = 500;
    double bin_width = 0.0; // 0 = track span / 10
    int runs_per_bin = 10;
    double max_start_angle = 3.0 * M_PI / 180.0;
};

/// Merged view of every module's configuration. Loaded from a JSON
/// manifest; command-line flags override individual fields.
struct RunConfig {
    std::uint64_t seed = 1;
    unsigned workers = 0; // 0 = machine parallelism
    WorldConfig world;
    NormalizationSpec normalization;
    PolicyConfig policy;
    TrainConfig train;
    EnsembleTrainConfig dynamics;
    int dynamics_k = 20;
    BehaviorSpec behavior;
    LatencyModel latency;
    EvalConfig eval;
};

/// Parses the JSON manifest at `path`. Unknown keys are configuration
/// errors so manifests stay typo-safe.
RunConfig load_run_config(const std::string &path);

} // namespace qpole::cli
