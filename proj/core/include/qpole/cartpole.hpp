#pragma once

#include <cmath>

namespace qpole {

/// Ground-truth cart-pole state. theta is the pole angle measured from
/// upright, wrapped to (-pi, pi].
struct PhysicalState {
    double p = 0.0;
    double p_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;

    bool all_finite() const {
        return std::isfinite(p) && std::isfinite(p_dot) &&
               std::isfinite(theta) && std::isfinite(theta_dot);
    }
};

/// Physics and task parameters. Defaults are the classic benchmark values;
/// dt matches a 20 ms control loop.
struct WorldConfig {
    double cart_mass = 1.0;        // kg
    double pole_mass = 0.1;        // kg
    double pole_half_length = 0.5; // m
    double gravity = 9.8;          // m/s^2
    double force_scale = 10.0;     // N per unit action
    double dt = 0.020;             // s
    double track_limit = 2.4;      // |p| termination bound, m
    double fail_angle = 12.0 * M_PI / 180.0; // |theta| termination bound

    // Reward shape constants.
    double reward_omega_weight = 0.1;          // c_omega
    double reward_omega_ref = 2.0 * M_PI;      // rad/s normalizer
    double reward_angle_gate = 15.0 * M_PI / 180.0;

    void validate() const;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

/// One control period of the frictionless cart-pole equations of motion,
/// integrated with semi-implicit Euler. The applied force is
/// force_scale * clamp(action, -1, 1).
PhysicalState physics_step(const PhysicalState &state, double action,
                           const WorldConfig &config);

/// r = -[(p/track_limit)^2 + (theta/fail_angle)^2
///       + c_omega (theta_dot/omega_ref)^2 * 1{|theta| <= gate}] <= 0.
double reward(const WorldConfig &config, double p, double theta,
              double theta_dot);

/// Analytic partial derivatives of reward(); the gate indicator is
/// piecewise constant and contributes nothing of its own.
struct RewardGradient {
    double d_p = 0.0;
    double d_theta = 0.0;
    double d_theta_dot = 0.0;
};

RewardGradient reward_gradient(const WorldConfig &config, double p,
                               double theta, double theta_dot);

/// Total mechanical energy (kinetic + potential of the pole about the
/// upright datum); used by integration sanity checks.
double mechanical_energy(const PhysicalState &state, const WorldConfig &config);

} // namespace qpole
