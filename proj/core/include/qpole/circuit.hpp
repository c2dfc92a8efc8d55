#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qpole/statevector.hpp"

namespace qpole {

enum class GateKind { RX, RY, RZ, CNOT };

/// One gate in a circuit. A rotation is trainable when param_id >= 0; its
/// effective angle is then angle + param_scale * params[param_id], which
/// covers both plain variational angles (scale 1) and scaled encodings such
/// as RX(w * x) with scale x. CNOT carries neither angle nor param_id.
struct GateOp {
    GateKind kind = GateKind::RX;
    int target = 0;
    int control = -1;
    double angle = 0.0;
    int param_id = -1;
    double param_scale = 1.0;

    bool is_rotation() const { return kind != GateKind::CNOT; }
    bool is_trainable() const { return param_id >= 0; }
};

/// Ordered gate list plus the set of qubits measured in the Z basis.
/// With several observable qubits the circuit value is the mean of the
/// single-qubit <Z> values.
struct Circuit {
    int n_qubits = 0;
    int n_params = 0;
    std::vector<GateOp> ops;
    std::vector<int> observable{0};
};

/// Validates indices, angles and param bindings. Throws ConfigError.
void validate_circuit(const Circuit &circuit, std::size_t n_params_bound);

/// Applies all ops to |0...0> and returns the observable value.
double run_circuit(const Circuit &circuit, std::span<const double> params);

/// Like run_circuit but leaves the final state in `state` (which is reset
/// first) and returns the observable value.
double run_circuit_into(const Circuit &circuit, std::span<const double> params,
                        StateVector &state);

/// d<Z>/d(param k) by the two-point shift rule, one pair of evaluations per
/// trainable gate occurrence, chain-ruled through param_scale. Requires all
/// trainable gates to be rotations (UnsupportedError otherwise).
std::vector<double> grad_parameter_shift(const Circuit &circuit,
                                         std::span<const double> params);

/// Same value contract as grad_parameter_shift, computed with one forward
/// and one backward statevector sweep.
std::vector<double> grad_adjoint(const Circuit &circuit,
                                 std::span<const double> params);

/// Adjoint sweep that reports d<Z>/d(effective angle) for every trainable
/// gate occurrence, in op order. This is the building block both for the
/// per-parameter gradient and for input gradients of encoding angles.
/// If `expectation_out` is non-null it receives the forward value.
std::vector<double> adjoint_angle_gradients(const Circuit &circuit,
                                            std::span<const double> params,
                                            double *expectation_out = nullptr);

} // namespace qpole
