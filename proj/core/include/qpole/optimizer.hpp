#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qpole {

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment buffers plus the step counter.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Standard bias-corrected Adam update, in place. Throws ConfigError on a
/// shape mismatch.
void adam_update(std::span<double> params, std::span<const double> grad,
                 AdamState &state, const AdamConfig &config);

/// Scales grad so its global L2 norm is at most max_norm (no-op otherwise).
void clip_global_norm(std::span<double> grad, double max_norm);

} // namespace qpole
