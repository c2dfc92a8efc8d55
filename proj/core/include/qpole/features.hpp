#pragma once

#include <array>
#include <cmath>

namespace qpole {

/// The 8-component policy input: physical state of the cart-pole plus the
/// three most recent actions. The pole angle enters as (cos, sin) so the
/// representation stays continuous across the wrap.
struct FeatureVector {
    double p = 0.0;
    double p_dot = 0.0;
    double cos_theta = 1.0;
    double sin_theta = 0.0;
    double theta_dot = 0.0;
    double a_prev3 = 0.0;
    double a_prev2 = 0.0;
    double a_prev1 = 0.0;

    static constexpr int kDim = 8;

    std::array<double, kDim> to_array() const {
        return {p,         p_dot,   cos_theta, sin_theta,
                theta_dot, a_prev3, a_prev2,   a_prev1};
    }

    static FeatureVector from_array(const std::array<double, kDim> &a) {
        return FeatureVector{a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
    }

    double theta() const { return std::atan2(sin_theta, cos_theta); }

    bool all_finite() const {
        for (double v : to_array()) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }
};

/// Per-component scaling bounds used to map raw features into [-pi, pi]
/// before RX encoding: x -> clamp(pi * x / bound). The cos/sin components
/// are already bounded and pass through unchanged.
struct NormalizationSpec {
    double bound_p = 2.4;
    double bound_p_dot = 3.0;
    double bound_theta_dot = 5.0;
    double bound_action = 1.0;
};

/// Maps raw features to encoding range. Throws ConfigError on a
/// non-positive bound.
FeatureVector normalize_features(const FeatureVector &raw,
                                 const NormalizationSpec &spec);

/// d(normalized_i)/d(raw_i) for each component: pi/bound inside the clamp,
/// 0 where clamped, 1 for the pass-through cos/sin entries.
std::array<double, FeatureVector::kDim>
normalize_features_jacobian_diag(const FeatureVector &raw,
                                 const NormalizationSpec &spec);

} // namespace qpole
