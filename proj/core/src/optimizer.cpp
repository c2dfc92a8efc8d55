#include "qpole/optimizer.hpp"

#include <cmath>

#include "qpole/errors.hpp"

namespace qpole {

void adam_update(std::span<double> params, std::span<const double> grad,
                 AdamState &state, const AdamConfig &config) {
    if (params.size() != grad.size() || params.size() != state.m.size()) {
        throw ConfigError("adam shape mismatch");
    }
    state.t += 1;
    const double bias1 = 1.0 - std::pow(config.beta1, double(state.t));
    const double bias2 = 1.0 - std::pow(config.beta2, double(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        params[i] -= config.learning_rate * m_hat /
                     (std::sqrt(v_hat) + config.epsilon);
    }
}

void clip_global_norm(std::span<double> grad, double max_norm) {
    if (max_norm <= 0.0) {
        return;
    }
    double sq = 0.0;
    for (double g : grad) {
        sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double &g : grad) {
            g *= scale;
        }
    }
}

} // namespace qpole
