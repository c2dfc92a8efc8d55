#include "qpole/features.hpp"

#include <algorithm>
#include <numbers>

#include "qpole/errors.hpp"

namespace qpole {

namespace {

constexpr double kPi = std::numbers::pi;

void check_bounds(const NormalizationSpec &spec) {
    if (spec.bound_p <= 0.0 || spec.bound_p_dot <= 0.0 ||
        spec.bound_theta_dot <= 0.0 || spec.bound_action <= 0.0) {
        throw ConfigError("normalization bounds must be strictly positive");
    }
}

double scale_clamp(double x, double bound) {
    return std::clamp(kPi * x / bound, -kPi, kPi);
}

double scale_slope(double x, double bound) {
    const double scaled = kPi * x / bound;
    return (scaled > -kPi && scaled < kPi) ? kPi / bound : 0.0;
}

} // namespace

FeatureVector normalize_features(const FeatureVector &raw,
                                 const NormalizationSpec &spec) {
    check_bounds(spec);
    FeatureVector out = raw;
    out.p = scale_clamp(raw.p, spec.bound_p);
    out.p_dot = scale_clamp(raw.p_dot, spec.bound_p_dot);
    out.theta_dot = scale_clamp(raw.theta_dot, spec.bound_theta_dot);
    out.a_prev3 = scale_clamp(raw.a_prev3, spec.bound_action);
    out.a_prev2 = scale_clamp(raw.a_prev2, spec.bound_action);
    out.a_prev1 = scale_clamp(raw.a_prev1, spec.bound_action);
    return out;
}

std::array<double, FeatureVector::kDim>
normalize_features_jacobian_diag(const FeatureVector &raw,
                                 const NormalizationSpec &spec) {
    check_bounds(spec);
    return {scale_slope(raw.p, spec.bound_p),
            scale_slope(raw.p_dot, spec.bound_p_dot),
            1.0,
            1.0,
            scale_slope(raw.theta_dot, spec.bound_theta_dot),
            scale_slope(raw.a_prev3, spec.bound_action),
            scale_slope(raw.a_prev2, spec.bound_action),
            scale_slope(raw.a_prev1, spec.bound_action)};
}

} // namespace qpole
