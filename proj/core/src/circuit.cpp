#include "qpole/circuit.hpp"

#include <cmath>
#include <string>

#include "qpole/errors.hpp"

namespace qpole {

namespace {

StateVector::Axis rotation_axis(GateKind kind) {
    switch (kind) {
    case GateKind::RX:
        return StateVector::Axis::X;
    case GateKind::RY:
        return StateVector::Axis::Y;
    default:
        return StateVector::Axis::Z;
    }
}

double effective_angle(const GateOp &op, std::span<const double> params) {
    if (op.param_id < 0) {
        return op.angle;
    }
    return op.angle + op.param_scale * params[static_cast<std::size_t>(op.param_id)];
}

void apply_op(StateVector &state, const GateOp &op,
              std::span<const double> params, double extra_angle = 0.0,
              bool inverse = false) {
    if (op.kind == GateKind::CNOT) {
        state.apply_cnot(op.control, op.target);
        return;
    }
    double angle = effective_angle(op, params) + extra_angle;
    if (inverse) {
        angle = -angle;
    }
    state.apply_rotation(rotation_axis(op.kind), op.target, angle);
}

// lambda_i = psi_i * mean over observable qubits of (+1/-1).
void apply_observable(StateVector &state, const std::vector<int> &observable) {
    const double inv_m = 1.0 / static_cast<double>(observable.size());
    for (std::size_t i = 0; i < state.dim(); ++i) {
        double factor = 0.0;
        for (int q : observable) {
            factor += (i >> q) & 1 ? -1.0 : 1.0;
        }
        state.amplitude(i) *= factor * inv_m;
    }
}

double measure(const StateVector &state, const std::vector<int> &observable) {
    double acc = 0.0;
    for (int q : observable) {
        acc += state.expectation_z(q);
    }
    return acc / static_cast<double>(observable.size());
}

} // namespace

void validate_circuit(const Circuit &circuit, std::size_t n_params_bound) {
    if (circuit.n_qubits < 1 || circuit.n_qubits > StateVector::kMaxQubits) {
        throw ConfigError("circuit qubit count out of range");
    }
    if (circuit.observable.empty()) {
        throw ConfigError("circuit has no observable qubits");
    }
    for (int q : circuit.observable) {
        if (q < 0 || q >= circuit.n_qubits) {
            throw ConfigError("observable qubit out of range: " +
                              std::to_string(q));
        }
    }
    for (const auto &op : circuit.ops) {
        if (op.target < 0 || op.target >= circuit.n_qubits) {
            throw ConfigError("gate target out of range");
        }
        if (op.kind == GateKind::CNOT) {
            if (op.control < 0 || op.control >= circuit.n_qubits) {
                throw ConfigError("cnot control out of range");
            }
            if (op.control == op.target) {
                throw ConfigError("cnot control equals target");
            }
            if (op.param_id >= 0) {
                throw ConfigError("cnot cannot carry a param_id");
            }
        } else if (op.param_id >= 0) {
            if (op.param_id >= circuit.n_params ||
                static_cast<std::size_t>(op.param_id) >= n_params_bound) {
                throw ConfigError("unresolved param_id " +
                                  std::to_string(op.param_id));
            }
        }
    }
}

double run_circuit(const Circuit &circuit, std::span<const double> params) {
    StateVector state(circuit.n_qubits);
    return run_circuit_into(circuit, params, state);
}

double run_circuit_into(const Circuit &circuit, std::span<const double> params,
                        StateVector &state) {
    validate_circuit(circuit, params.size());
    state.reset();
    for (const auto &op : circuit.ops) {
        apply_op(state, op, params);
    }
    return measure(state, circuit.observable);
}

std::vector<double> grad_parameter_shift(const Circuit &circuit,
                                         std::span<const double> params) {
    validate_circuit(circuit, params.size());
    std::vector<double> grad(params.size(), 0.0);
    StateVector state(circuit.n_qubits);

    auto run_with_shift = [&](std::size_t shifted_op, double shift) {
        state.reset();
        for (std::size_t k = 0; k < circuit.ops.size(); ++k) {
            apply_op(state, circuit.ops[k], params,
                     k == shifted_op ? shift : 0.0);
        }
        return measure(state, circuit.observable);
    };

    constexpr double half_pi = 1.5707963267948966;
    for (std::size_t k = 0; k < circuit.ops.size(); ++k) {
        const auto &op = circuit.ops[k];
        if (!op.is_trainable()) {
            continue;
        }
        if (!op.is_rotation()) {
            throw UnsupportedError("parameter-shift rule needs rotation gates");
        }
        const double plus = run_with_shift(k, half_pi);
        const double minus = run_with_shift(k, -half_pi);
        grad[static_cast<std::size_t>(op.param_id)] +=
            op.param_scale * 0.5 * (plus - minus);
    }
    return grad;
}

std::vector<double> adjoint_angle_gradients(const Circuit &circuit,
                                            std::span<const double> params,
                                            double *expectation_out) {
    validate_circuit(circuit, params.size());
    for (const auto &op : circuit.ops) {
        if (op.is_trainable() && !op.is_rotation()) {
            throw UnsupportedError("adjoint differentiation needs rotation gates");
        }
    }

    // Forward pass: phi = U_N ... U_1 |0>.
    StateVector phi(circuit.n_qubits);
    for (const auto &op : circuit.ops) {
        apply_op(phi, op, params);
    }
    if (expectation_out != nullptr) {
        *expectation_out = measure(phi, circuit.observable);
    }

    // lambda = O phi, then sweep backwards. Before handling gate k,
    // phi = U_{k-1}...U_1|0> and lambda = U_{k+1}^..U_N^ O U_N...U_1|0>.
    StateVector lambda = phi;
    apply_observable(lambda, circuit.observable);

    std::size_t n_trainable = 0;
    for (const auto &op : circuit.ops) {
        n_trainable += op.is_trainable() ? 1 : 0;
    }
    std::vector<double> angle_grads(n_trainable, 0.0);
    std::size_t slot = n_trainable;

    StateVector mu(circuit.n_qubits);
    for (std::size_t idx = circuit.ops.size(); idx-- > 0;) {
        const auto &op = circuit.ops[idx];
        apply_op(phi, op, params, 0.0, /*inverse=*/true);
        if (op.is_trainable()) {
            // dU/dtheta = (-i/2) P U(theta); with mu = U P phi the gradient
            // is 2 Re((-i/2) <lambda|mu>) = Im <lambda|mu>.
            mu = phi;
            mu.apply_pauli(rotation_axis(op.kind), op.target);
            apply_op(mu, op, params);
            angle_grads[--slot] = StateVector::inner_product(lambda, mu).imag();
        }
        apply_op(lambda, op, params, 0.0, /*inverse=*/true);
    }
    return angle_grads;
}

std::vector<double> grad_adjoint(const Circuit &circuit,
                                 std::span<const double> params) {
    const std::vector<double> angle_grads =
        adjoint_angle_gradients(circuit, params);
    std::vector<double> grad(params.size(), 0.0);
    std::size_t slot = 0;
    for (const auto &op : circuit.ops) {
        if (op.is_trainable()) {
            grad[static_cast<std::size_t>(op.param_id)] +=
                op.param_scale * angle_grads[slot++];
        }
    }
    return grad;
}

} // namespace qpole
