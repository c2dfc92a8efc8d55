#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace qpole {

using Complex = std::complex<double>;

/// Dense statevector over n qubits. Qubit k maps to bit k of the amplitude
/// index (qubit 0 is the least significant bit), so |q1 q0> = |10> in ket
/// order lives at index 2.
///
/// Rotation convention is the half-angle form R_P(theta) = exp(-i theta P/2).
class StateVector {
  public:
    static constexpr int kMaxQubits = 20;

    /// Prepares |0...0>. Throws ConfigError unless 1 <= n_qubits <= 20.
    explicit StateVector(int n_qubits);

    int n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return amps_.size(); }

    const Complex &amplitude(std::size_t index) const { return amps_[index]; }
    Complex &amplitude(std::size_t index) { return amps_[index]; }
    const std::vector<Complex> &amplitudes() const { return amps_; }

    /// Resets to |0...0> without reallocating.
    void reset();

    enum class Axis { X, Y, Z };

    /// Applies R_axis(angle) to one qubit. Throws NumericError on a
    /// non-finite angle and ConfigError on a bad index.
    void apply_rotation(Axis axis, int qubit, double angle);

    /// Flips the target amplitude pairs where the control bit is set.
    void apply_cnot(int control, int target);

    /// Applies the bare Pauli operator (used by the adjoint differentiator
    /// as the rotation generator).
    void apply_pauli(Axis axis, int qubit);

    /// <Z_qubit> = sum over basis states of (+1/-1) |amplitude|^2.
    double expectation_z(int qubit) const;

    /// Squared L2 norm; 1 within 1e-10 after any gate sequence.
    double norm_squared() const;

    /// <a|b> over the computational basis.
    static Complex inner_product(const StateVector &a, const StateVector &b);

  private:
    void check_qubit(int qubit, const char *what) const;

    int n_qubits_;
    std::vector<Complex> amps_;
};

} // namespace qpole
