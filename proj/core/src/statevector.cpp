#include "qpole/statevector.hpp"

#include <cmath>
#include <string>

#include "qpole/errors.hpp"

namespace qpole {

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw ConfigError("qubit count out of range [1, 20]: " +
                          std::to_string(n_qubits));
    }
    amps_.assign(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
    amps_[0] = Complex{1.0, 0.0};
}

void StateVector::reset() {
    std::fill(amps_.begin(), amps_.end(), Complex{0.0, 0.0});
    amps_[0] = Complex{1.0, 0.0};
}

void StateVector::check_qubit(int qubit, const char *what) const {
    if (qubit < 0 || qubit >= n_qubits_) {
        throw ConfigError(std::string(what) + " index out of range: " +
                          std::to_string(qubit));
    }
}

void StateVector::apply_rotation(Axis axis, int qubit, double angle) {
    check_qubit(qubit, "rotation qubit");
    if (!std::isfinite(angle)) {
        throw NumericError("non-finite rotation angle");
    }
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = amps_.size();

    switch (axis) {
    case Axis::X:
        // [[c, -is], [-is, c]]
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t low = base; low < base + stride; ++low) {
                const Complex a0 = amps_[low];
                const Complex a1 = amps_[low + stride];
                amps_[low] = c * a0 + Complex{0.0, -s} * a1;
                amps_[low + stride] = Complex{0.0, -s} * a0 + c * a1;
            }
        }
        break;
    case Axis::Y:
        // [[c, -s], [s, c]]
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t low = base; low < base + stride; ++low) {
                const Complex a0 = amps_[low];
                const Complex a1 = amps_[low + stride];
                amps_[low] = c * a0 - s * a1;
                amps_[low + stride] = s * a0 + c * a1;
            }
        }
        break;
    case Axis::Z:
        // diag(e^{-i angle/2}, e^{+i angle/2})
        {
            const Complex phase0{c, -s};
            const Complex phase1{c, s};
            for (std::size_t base = 0; base < dim; base += 2 * stride) {
                for (std::size_t low = base; low < base + stride; ++low) {
                    amps_[low] *= phase0;
                    amps_[low + stride] *= phase1;
                }
            }
        }
        break;
    }
}

void StateVector::apply_cnot(int control, int target) {
    check_qubit(control, "cnot control");
    check_qubit(target, "cnot target");
    if (control == target) {
        throw ConfigError("cnot control equals target");
    }
    const std::size_t cbit = std::size_t{1} << control;
    const std::size_t tbit = std::size_t{1} << target;
    const std::size_t dim = amps_.size();
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & cbit) != 0 && (i & tbit) == 0) {
            std::swap(amps_[i], amps_[i | tbit]);
        }
    }
}

void StateVector::apply_pauli(Axis axis, int qubit) {
    check_qubit(qubit, "pauli qubit");
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = amps_.size();
    switch (axis) {
    case Axis::X:
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t low = base; low < base + stride; ++low) {
                std::swap(amps_[low], amps_[low + stride]);
            }
        }
        break;
    case Axis::Y:
        // Y = [[0, -i], [i, 0]]
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t low = base; low < base + stride; ++low) {
                const Complex a0 = amps_[low];
                const Complex a1 = amps_[low + stride];
                amps_[low] = Complex{0.0, -1.0} * a1;
                amps_[low + stride] = Complex{0.0, 1.0} * a0;
            }
        }
        break;
    case Axis::Z:
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t low = base; low < base + stride; ++low) {
                amps_[low + stride] = -amps_[low + stride];
            }
        }
        break;
    }
}

double StateVector::expectation_z(int qubit) const {
    check_qubit(qubit, "observable qubit");
    const std::size_t bit = std::size_t{1} << qubit;
    double acc = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
        const double p = std::norm(amps_[i]);
        acc += (i & bit) ? -p : p;
    }
    return acc;
}

double StateVector::norm_squared() const {
    double acc = 0.0;
    for (const auto &a : amps_) {
        acc += std::norm(a);
    }
    return acc;
}

Complex StateVector::inner_product(const StateVector &a,
                                   const StateVector &b) {
    if (a.dim() != b.dim()) {
        throw ConfigError("inner product dimension mismatch");
    }
    Complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i) {
        acc += std::conj(a.amps_[i]) * b.amps_[i];
    }
    return acc;
}

} // namespace qpole
