#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qpole/dataset.hpp"
#include "qpole/transition.hpp"

namespace qpole {

/// K independently trained transition models plus their seeds and final
/// training errors (MSE of standardized deltas).
struct TransitionEnsemble {
    std::vector<TransitionNet> models;
    std::vector<std::uint64_t> seeds;
    std::vector<double> final_mse;

    int size() const { return static_cast<int>(models.size()); }
};

struct EnsembleTrainConfig {
    int hidden = 64;
    double learning_rate = 1e-3;
    int batch_size = 256;
    int epochs = 40;          // full passes over each bootstrap resample
    double init_scale = 0.1;  // He-ish uniform init half-width scaling
    unsigned workers = 0;     // 0 = machine parallelism
};

/// Trains k models, each on its own bootstrap resample (with replacement)
/// and its own init seed, minimizing the MSE of standardized deltas with
/// Adam. Deterministic per seed, also across worker counts.
TransitionEnsemble train_ensemble(std::span<const TransitionSample> samples,
                                  int k, const EnsembleTrainConfig &config,
                                  std::uint64_t seed);

/// Mean over output dimensions of the (population) standard deviation of
/// the per-model delta predictions. Requires K >= 2.
double ensemble_disagreement(const TransitionEnsemble &ensemble,
                             const FeatureVector &s, double a);

/// SHA-256 over every model parameter and statistic, for frozen-model
/// checks.
std::string ensemble_param_hash(const TransitionEnsemble &ensemble);

/// Checkpoint I/O: one JSON document per model plus a manifest listing K,
/// seeds and the standardization statistics. `path` names the manifest;
/// model files live next to it.
void save_ensemble_checkpoint(const TransitionEnsemble &ensemble,
                              const std::string &path);
TransitionEnsemble load_ensemble_checkpoint(const std::string &path);

} // namespace qpole
