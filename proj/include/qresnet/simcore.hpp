#pragma once

// Dense statevector engine.
//
// Qubit ordering: qubit 0 is the most significant bit of the basis index.
// On a 2-qubit register, Ry(pi) on qubit 0 maps |00> (index 0) to |10>
// (index 2). Multi-qubit operators follow the same rule: the first entry of
// the target list is the most significant bit of the operator's row index.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qresnet {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 20;

using Mat2 = std::array<Complex, 4>;   // row-major 2x2
using Mat4 = std::array<Complex, 16>;  // row-major 4x4

/// Dense square complex matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t dim);
    Matrix(std::size_t dim, std::vector<Complex> entries);
    explicit Matrix(const Mat2& m);
    explicit Matrix(const Mat4& m);

    static Matrix identity(std::size_t dim);

    std::size_t dim() const { return dim_; }
    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
    std::span<const Complex> entries() const { return data_; }

    Matrix adjoint() const;
    Matrix operator*(const Matrix& rhs) const;
    Matrix operator+(const Matrix& rhs) const;
    Matrix operator-(const Matrix& rhs) const;
    Matrix operator*(Complex s) const;
    std::vector<Complex> apply(std::span<const Complex> v) const;

    /// max_{r,c} |a_rc - b_rc|
    double max_abs_diff(const Matrix& rhs) const;
    bool is_unitary(double tol = 1e-12) const;
    bool is_hermitian(double tol = 1e-12) const;

private:
    std::size_t dim_ = 0;
    std::vector<Complex> data_;
};

Matrix kron(const Matrix& a, const Matrix& b);

class Statevector {
public:
    /// |0...0> on n qubits. Throws CapacityError outside [1, kMaxQubits].
    explicit Statevector(int n_qubits);
    Statevector(int n_qubits, std::vector<Complex> amplitudes);

    int n_qubits() const { return n_qubits_; }
    std::size_t dimension() const { return amps_.size(); }
    std::span<Complex> amplitudes() { return amps_; }
    std::span<const Complex> amplitudes() const { return amps_; }
    Complex& operator[](std::size_t i) { return amps_[i]; }
    const Complex& operator[](std::size_t i) const { return amps_[i]; }

    double squared_norm() const;
    /// <this|other>
    Complex inner(const Statevector& other) const;
    /// Rescales to unit norm; throws ValidationError on a zero vector.
    void normalize();

private:
    int n_qubits_;
    std::vector<Complex> amps_;
};

Statevector new_statevector(int n_qubits);

enum class GateKind { H, Ry, Rz, U3, ZZ, ControlledU3, CustomMatrix };

/// Number of qubits the gate acts on (CustomMatrix: 0, determined by the matrix).
int gate_qubit_count(GateKind kind);
/// Number of real angles the gate takes.
std::size_t gate_param_count(GateKind kind);
const char* gate_name(GateKind kind);

/// Matrix of a parameterised gate:
///   Ry(t) = exp(-i t Y/2), Rz(t) = exp(-i t Z/2),
///   U3(t,p,d) = [[cos t/2, -e^{id} sin t/2], [e^{ip} sin t/2, e^{i(p+d)} cos t/2]],
///   ZZ(p) = exp(-i p Z(x)Z/2), ControlledU3 = |0><0|(x)I + |1><1|(x)U3.
/// Throws ArityError on a wrong parameter count and NotApplicableError for
/// CustomMatrix.
Matrix gate_matrix(GateKind kind, std::span<const double> params);

Mat2 hadamard_mat();
Mat2 ry_mat(double theta);
Mat2 rz_mat(double theta);
Mat2 u3_mat(double theta, double phi, double delta);
Mat4 zz_mat(double phi);
Mat4 controlled_u3_mat(double theta, double phi, double delta);

/// Applies `op` to the target subsystem in place. The state is not
/// renormalised, so non-unitary operators are allowed.
void apply_operator(Statevector& state, const Matrix& op, std::span<const int> targets);
void apply_1q(Statevector& state, const Mat2& op, int target);
void apply_2q(Statevector& state, const Mat4& op, int first, int second);
/// diag(d0, d1, d2, d3) on (first, second).
void apply_diagonal_2q(Statevector& state, const std::array<Complex, 4>& diag, int first, int second);
/// `op` on `target` where `control` is |1>.
void apply_controlled_1q(Statevector& state, const Mat2& op, int control, int target);

enum class Pauli { I, X, Y, Z, Proj0 };

Mat2 pauli_mat(Pauli p);

/// Tensor product of single-qubit Hermitian factors, one per qubit.
class Observable {
public:
    /// Throws ValidationError if any factor is not Hermitian.
    explicit Observable(std::vector<Mat2> factors);

    static Observable identity(int n_qubits);
    /// `p` on `qubit`, identity elsewhere.
    static Observable single(int n_qubits, int qubit, Pauli p);
    static Observable from_paulis(std::span<const Pauli> paulis);

    int n_qubits() const { return static_cast<int>(factors_.size()); }
    const std::vector<Mat2>& factors() const { return factors_; }
    bool is_diagonal() const;
    /// this (x) rhs, with this on the leading qubits.
    Observable tensor(const Observable& rhs) const;
    /// Full 2^n x 2^n matrix. Intended for tests and small registers.
    Matrix dense() const;

    /// Diagonal entries for diagonal observables on up to 16 qubits, else empty.
    const std::vector<double>& diagonal() const { return diagonal_; }

private:
    std::vector<Mat2> factors_;
    std::vector<double> diagonal_;
};

/// <psi|O|psi> without dividing by the norm of psi.
double expectation(const Statevector& state, const Observable& obs);

/// |<a|b>|^2 for normalised states.
double fidelity(const Statevector& a, const Statevector& b);

}  // namespace qresnet
