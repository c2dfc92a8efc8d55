#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qpole/circuit.hpp"
#include "qpole/features.hpp"

namespace qpole {

/// Shape of the quantum policy circuit. One qubit per feature (reduced
/// configurations encode only the first n_qubits features); each layer is
/// an RX(w_i x_i) encoding row (first layer always, later layers only with
/// data reuploading), a per-qubit RZ-RY-RZ rotation triple, and a CNOT
/// ring.
struct PolicyConfig {
    int n_qubits = 8;
    int n_layers = 2;
    bool data_reuploading = true;
    bool trainable_input_weights = true;
    bool trainable_output_weight = true;
    bool input_weights_per_layer = true;
    std::vector<int> observable_qubits{0};
    double action_clip = 1.0; // 0 disables clipping

    /// Number of encoding rows actually materialized.
    int input_weight_rows() const;
    /// Number of layers that carry an encoding row.
    int encoding_layers() const;

    void validate() const;
};

/// All trainable quantities of the policy. Flattened parameter order is
/// input weights (row-major), variational angles (layer, qubit, [RZ RY RZ]),
/// then the output weight, so the default 8-qubit 2-layer shape has
/// 2*8 + 2*8*3 + 1 = 65 parameters.
struct PolicyParams {
    std::vector<double> input_weights;
    std::vector<double> variational;
    double output_weight = 1.0;
    bool input_weights_trainable = true;
    bool output_weight_trainable = true;

    std::size_t circuit_param_count() const {
        return input_weights.size() + variational.size();
    }
    std::size_t param_count() const { return circuit_param_count() + 1; }

    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);

    bool all_finite() const;
};

/// Gradient (or any per-parameter quantity) in PolicyParams layout.
struct PolicyGradient {
    std::vector<double> input_weights;
    std::vector<double> variational;
    double output_weight = 0.0;

    static PolicyGradient zeros_like(const PolicyParams &params);
    std::vector<double> flatten() const;
};

/// Draws initial parameters: variational angles uniform in [0, 2pi),
/// input and output weights at 1. Deterministic per seed.
PolicyParams init_policy(const PolicyConfig &config, std::uint64_t seed);

/// Builds the ansatz for one (already normalized) feature vector. Encoding
/// gates bind input-weight params with scale x_i; variational gates bind
/// their angle params with scale 1.
Circuit build_circuit(const PolicyConfig &config, const FeatureVector &features,
                      const PolicyParams &params);

/// action = w_out * <Z>, clamped to [-clip, clip] when action_clip > 0.
/// Features are expected in encoding range (see normalize_features).
double act(const PolicyConfig &config, const PolicyParams &params,
           const FeatureVector &features);

/// Everything one evaluation can tell us: the expectation, the action, and
/// gradients of the *expectation* with respect to circuit parameters and
/// input features. Used by act(), policy_gradient() and the rollout BPTT.
struct PolicyEval {
    double expectation = 0.0;
    double action = 0.0;
    bool clipped = false;
    std::vector<double> d_expectation_d_circuit_params;
    std::array<double, FeatureVector::kDim> d_expectation_d_features{};
};

PolicyEval evaluate_policy(const PolicyConfig &config,
                           const PolicyParams &params,
                           const FeatureVector &features,
                           bool with_gradients);

/// dAction/d(params) with frozen groups reported as zeros.
PolicyGradient policy_gradient(const PolicyConfig &config,
                               const PolicyParams &params,
                               const FeatureVector &features);

/// Checkpoint I/O: self-describing JSON with config, parameter arrays in
/// row-major order, normalization bounds, seed and training step.
struct PolicyCheckpoint {
    PolicyConfig config;
    PolicyParams params;
    NormalizationSpec normalization;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

void save_policy_checkpoint(const PolicyCheckpoint &ckpt,
                            const std::string &path);
PolicyCheckpoint load_policy_checkpoint(const std::string &path);

} // namespace qpole
