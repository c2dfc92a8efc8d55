#pragma once

#include <cmath>
#include <vector>

#include "qpole/circuit.hpp"
#include "qpole/rng.hpp"

namespace qpole::test {

// Central finite differences of the circuit expectation, the independent
// oracle for both gradient implementations.
inline std::vector<double> finite_difference_gradient(
    const Circuit &circuit, const std::vector<double> &params,
    double h = 1e-5) {
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> shifted = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        shifted[i] = params[i] + h;
        const double plus = run_circuit(circuit, shifted);
        shifted[i] = params[i] - h;
        const double minus = run_circuit(circuit, shifted);
        shifted[i] = params[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

// Random circuit over at most `max_qubits` with rotations and ring-ish
// CNOTs; every rotation is trainable and some parameters repeat.
inline Circuit random_circuit(Rng &rng, int n_qubits, int n_gates,
                              int n_params, std::vector<double> *params_out) {
    Circuit circuit;
    circuit.n_qubits = n_qubits;
    circuit.n_params = n_params;
    circuit.observable = {static_cast<int>(rng.uniform_index(
        static_cast<std::uint64_t>(n_qubits)))};
    for (int g = 0; g < n_gates; ++g) {
        GateOp op;
        const auto kind = rng.uniform_index(4);
        if (kind == 3 && n_qubits > 1) {
            op.kind = GateKind::CNOT;
            op.control = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(n_qubits)));
            do {
                op.target = static_cast<int>(
                    rng.uniform_index(static_cast<std::uint64_t>(n_qubits)));
            } while (op.target == op.control);
        } else {
            op.kind = kind == 0   ? GateKind::RX
                      : kind == 1 ? GateKind::RY
                                  : GateKind::RZ;
            op.target = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(n_qubits)));
            op.param_id = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(n_params)));
            op.param_scale = rng.uniform(0.25, 1.75);
        }
        circuit.ops.push_back(op);
    }
    if (params_out != nullptr) {
        params_out->resize(static_cast<std::size_t>(n_params));
        for (auto &p : *params_out) {
            p = rng.uniform(-M_PI, M_PI);
        }
    }
    return circuit;
}

inline double max_abs_diff(const std::vector<double> &a,
                           const std::vector<double> &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

// Relative agreement with an absolute floor for near-zero entries.
inline double max_rel_diff(const std::vector<double> &a,
                           const std::vector<double> &b,
                           double floor = 1e-7) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale =
            std::max({std::abs(a[i]), std::abs(b[i]), floor});
        m = std::max(m, std::abs(a[i] - b[i]) / scale);
    }
    return m;
}

} // namespace qpole::test
