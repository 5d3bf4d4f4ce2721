#pragma once

// Residual operators and model evaluation.
//
// A residual block wraps a unitary L into
//   R   = (I + L) / 2
//   R1  = (cos a I + (-1)^m sin a L) / sqrt(2)
//   R2  = cos a cos e I + sin a sin e L,   e = pi m / 2 - g
// where m is the ancilla branch. Two evaluation paths exist: the direct path
// applies these non-unitary matrices to the system register, the ancilla
// path builds the linear-combination circuit with one ancilla per block and
// reads the |0><0| subspace with the observable average
// ((I + Z) / 2)^{(x) l} (x) O.

#include <span>

#include "qresnet/circuit.hpp"
#include "qresnet/simcore.hpp"

namespace qresnet {

/// (identity weight, L weight) of a residual operator.
struct ResidualWeights {
    double identity = 1.0;
    double gate = 0.0;
};

/// Traditional kind returns (0, 1), i.e. plain L.
ResidualWeights residual_weights(const ResidualStrategy& strategy, double alpha, double gamma);

/// Operator exactly as defined above. Throws ValidationError when L is not unitary.
Matrix residual_matrix(const ResidualStrategy& strategy, const Matrix& gate, double alpha, double gamma);

/// f = A1 <U^dag O U> + A2 <O> + A3 Re <O U>
struct ACoefficients {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
};

/// Throws NotApplicableError for the Traditional kind.
ACoefficients a_coefficients(const ResidualStrategy& strategy, double alpha, double gamma);

/// Binds a gate's angles; the optional shift offsets one slot.
Matrix bound_gate_matrix(const GateOp& gate, std::span<const double> features, std::span<const double> params,
                         const ParamShift* shift = nullptr, std::size_t op_index = 0);

/// System state after the direct (non-unitary, unnormalised) evaluation.
Statevector prepare_direct(const ModelSpec& model, std::span<const double> features,
                           std::span<const double> params, const ParamShift* shift = nullptr);

double residual_expectation_direct(const ModelSpec& model, std::span<const double> features,
                                   std::span<const double> params, const ParamShift* shift = nullptr);

/// Direct-path evaluation of one (features, params) point that keeps the
/// bound gate matrices and the state before every op, so evaluations at
/// nearby parameters only replay the ops whose angles changed and the ops
/// after them. Results equal residual_expectation_direct bit for bit.
class CircuitCache {
public:
    CircuitCache(const ModelSpec& model, std::span<const double> features, std::span<const double> params);

    double value() const { return value_; }
    /// Expectation at `params` (same length as the cached ones) with an
    /// optional angle shift.
    double evaluate(std::span<const double> params, const ParamShift* shift = nullptr) const;

    struct BoundOp {
        enum class Shape { OneQubit, TwoQubit, Diagonal, Controlled, Dense };
        Shape shape = Shape::OneQubit;
        Mat2 m2{};  // one-qubit gate, or the target block of a controlled gate
        std::array<Complex, 4> diag{};
        Mat4 m4{};
        Matrix dense;
        std::vector<int> targets;
    };

private:

    const ModelSpec* model_;
    std::vector<double> features_;
    std::vector<double> params_;
    std::vector<BoundOp> ops_;
    std::vector<std::vector<std::size_t>> deps_;  // trainable indices each op reads
    std::vector<Statevector> before_;  // before_[i]: state entering op i
    double value_ = 0.0;
};

/// Full register (system qubits first, then one ancilla per residual block in
/// circuit order) after the ancilla-circuit evaluation.
Statevector prepare_ancilla(const ModelSpec& model, std::span<const double> features,
                            std::span<const double> params);

double residual_expectation_ancilla(const ModelSpec& model, std::span<const double> features,
                                    std::span<const double> params);

/// Component of `full` with every ancilla in |0>, as an unnormalised system state.
Statevector project_ancillas(const Statevector& full, int n_system);

/// System state a fidelity comparison uses: the direct state for models with
/// no residual block, otherwise the normalised |0...0>-ancilla projection of
/// the ancilla-circuit state.
Statevector model_state(const ModelSpec& model, std::span<const double> features, std::span<const double> params);

}  // namespace qresnet
