#include "qpole/cartpole.hpp"

#include <algorithm>

#include "qpole/errors.hpp"

namespace qpole {

void WorldConfig::validate() const {
    if (cart_mass <= 0.0 || pole_mass <= 0.0 || pole_half_length <= 0.0 ||
        gravity <= 0.0 || force_scale <= 0.0 || track_limit <= 0.0 ||
        fail_angle <= 0.0) {
        throw ConfigError("world parameters must be positive");
    }
    if (dt < 0.001 || dt > 0.1) {
        throw ConfigError("dt must lie in [0.001, 0.1] s");
    }
}

double wrap_angle(double theta) {
    theta = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (theta <= 0.0) {
        theta += 2.0 * M_PI;
    }
    return theta - M_PI;
}

PhysicalState physics_step(const PhysicalState &state, double action,
                           const WorldConfig &config) {
    if (!state.all_finite() || !std::isfinite(action)) {
        throw NumericError("non-finite physics input");
    }
    const double force =
        config.force_scale * std::clamp(action, -1.0, 1.0);
    const double total_mass = config.cart_mass + config.pole_mass;
    const double l = config.pole_half_length;
    const double pole_mass_length = config.pole_mass * l;

    const double cos_t = std::cos(state.theta);
    const double sin_t = std::sin(state.theta);

    const double temp =
        (force + pole_mass_length * state.theta_dot * state.theta_dot * sin_t) /
        total_mass;
    const double theta_acc =
        (config.gravity * sin_t - cos_t * temp) /
        (l * (4.0 / 3.0 - config.pole_mass * cos_t * cos_t / total_mass));
    const double p_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

    // Semi-implicit Euler: velocities first, positions with the new
    // velocities.
    PhysicalState next;
    next.p_dot = state.p_dot + config.dt * p_acc;
    next.p = state.p + config.dt * next.p_dot;
    next.theta_dot = state.theta_dot + config.dt * theta_acc;
    next.theta = wrap_angle(state.theta + config.dt * next.theta_dot);
    return next;
}

double reward(const WorldConfig &config, double p, double theta,
              double theta_dot) {
    // Both quadratic penalties reach 1 at their failure bound, so keeping
    // the pole up and staying centered carry comparable weight inside the
    // operating envelope.
    const double pos_term = p / config.track_limit;
    const double angle_term = theta / config.fail_angle;
    double r = -(pos_term * pos_term) - (angle_term * angle_term);
    if (std::abs(theta) <= config.reward_angle_gate) {
        const double omega_term = theta_dot / config.reward_omega_ref;
        r -= config.reward_omega_weight * omega_term * omega_term;
    }
    return r;
}

RewardGradient reward_gradient(const WorldConfig &config, double p,
                               double theta, double theta_dot) {
    RewardGradient g;
    g.d_p = -2.0 * p / (config.track_limit * config.track_limit);
    g.d_theta = -2.0 * theta / (config.fail_angle * config.fail_angle);
    if (std::abs(theta) <= config.reward_angle_gate) {
        g.d_theta_dot = -2.0 * config.reward_omega_weight * theta_dot /
                        (config.reward_omega_ref * config.reward_omega_ref);
    }
    return g;
}

double mechanical_energy(const PhysicalState &state, const WorldConfig &config) {
    const double l = config.pole_half_length;
    const double cos_t = std::cos(state.theta);
    const double sin_t = std::sin(state.theta);
    // Pole center-of-mass velocity.
    const double vx = state.p_dot + l * state.theta_dot * cos_t;
    const double vy = -l * state.theta_dot * sin_t;
    const double inertia = config.pole_mass * l * l / 3.0;
    const double kinetic = 0.5 * config.cart_mass * state.p_dot * state.p_dot +
                           0.5 * config.pole_mass * (vx * vx + vy * vy) +
                           0.5 * inertia * state.theta_dot * state.theta_dot;
    const double potential = config.pole_mass * config.gravity * l * cos_t;
    return kinetic + potential;
}

} // namespace qpole
