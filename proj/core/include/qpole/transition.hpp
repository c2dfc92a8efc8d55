#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qpole/features.hpp"

namespace qpole {

/// Feed-forward transition model predicting next-state deltas over the five
/// physical feature components (p, p_dot, cos, sin, theta_dot) from the
/// 9-dimensional (features, action) input. Hidden layers use tanh; the
/// output layer is linear in standardized space.
struct TransitionNet {
    static constexpr int kInputDim = FeatureVector::kDim + 1;
    static constexpr int kOutputDim = 5;

    enum class Activation { Tanh, Identity };

    int hidden = 64;
    Activation activation = Activation::Tanh;

    // Row-major [rows x cols]: w1 [hidden x in], w2 [hidden x hidden],
    // w3 [out x hidden].
    std::vector<double> w1, b1, w2, b2, w3, b3;

    // Standardization statistics; std entries are clamped to >= 1e-8.
    std::array<double, kInputDim> in_mean{}, in_std{};
    std::array<double, kOutputDim> out_mean{}, out_std{};

    /// Zero weights, unit standardization.
    static TransitionNet zeros(int hidden = 64);

    std::size_t param_count() const;
    bool all_finite() const;
};

using Delta5 = std::array<double, TransitionNet::kOutputDim>;

/// Standardize -> MLP -> de-standardize. Throws NumericError on non-finite
/// inputs.
Delta5 net_forward(const TransitionNet &net, const FeatureVector &s, double a);

struct NetInputGradient {
    std::array<double, FeatureVector::kDim> d_state{};
    double d_action = 0.0;
};

/// Exact reverse-mode gradient of upstream . delta with respect to the raw
/// inputs (model parameters stay fixed). Recomputes the forward pass.
NetInputGradient net_backward(const TransitionNet &net, const FeatureVector &s,
                              double a, const Delta5 &upstream_delta_grad);

/// Advances a feature-space state by a predicted delta: physical parts
/// shift by the delta, (cos, sin) are renormalized to the unit circle, and
/// the action history rolls forward. Throws NumericError when the
/// pre-normalization (cos, sin) norm collapses below 1e-6.
FeatureVector step_features(const FeatureVector &s, double a,
                            const Delta5 &delta);

struct StepBackward {
    std::array<double, FeatureVector::kDim> d_state{};
    double d_action = 0.0;
    Delta5 d_delta{};
};

/// Reverse-mode of step_features; gradient flows through the (cos, sin)
/// renormalization.
StepBackward step_features_backward(
    const FeatureVector &s, double a, const Delta5 &delta,
    const std::array<double, FeatureVector::kDim> &upstream);

} // namespace qpole
