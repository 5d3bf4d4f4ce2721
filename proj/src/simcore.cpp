#include "qresnet/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qresnet/errors.hpp"

namespace qresnet {

namespace {

constexpr Complex kI{0.0, 1.0};

inline std::size_t bit_of(int n_qubits, int qubit) {
    return std::size_t{1} << (n_qubits - 1 - qubit);
}

void check_target(const Statevector& state, int q) {
    if (q < 0 || q >= state.n_qubits()) {
        throw DimensionError("target qubit " + std::to_string(q) + " out of range for " +
                             std::to_string(state.n_qubits()) + "-qubit register");
    }
}

bool mat2_is_hermitian(const Mat2& m, double tol) {
    return std::abs(m[0] - std::conj(m[0])) <= tol && std::abs(m[3] - std::conj(m[3])) <= tol &&
           std::abs(m[1] - std::conj(m[2])) <= tol;
}

}  // namespace

// ---------------------------------------------------------------- Matrix

Matrix::Matrix(std::size_t dim) : dim_(dim), data_(dim * dim, Complex{}) {}

Matrix::Matrix(std::size_t dim, std::vector<Complex> entries) : dim_(dim), data_(std::move(entries)) {
    if (data_.size() != dim * dim) {
        throw DimensionError("matrix entry count does not match dimension");
    }
}

Matrix::Matrix(const Mat2& m) : dim_(2), data_(m.begin(), m.end()) {}
Matrix::Matrix(const Mat4& m) : dim_(4), data_(m.begin(), m.end()) {}

Matrix Matrix::identity(std::size_t dim) {
    Matrix out(dim);
    for (std::size_t i = 0; i < dim; ++i) out(i, i) = 1.0;
    return out;
}

Matrix Matrix::adjoint() const {
    Matrix out(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionError("matrix product dimension mismatch");
    Matrix out(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t k = 0; k < dim_; ++k) {
            const Complex a = (*this)(r, k);
            if (a == Complex{}) continue;
            for (std::size_t c = 0; c < dim_; ++c) out(r, c) += a * rhs(k, c);
        }
    return out;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionError("matrix sum dimension mismatch");
    Matrix out(*this);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
    return out;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionError("matrix difference dimension mismatch");
    Matrix out(*this);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
    return out;
}

Matrix Matrix::operator*(Complex s) const {
    Matrix out(*this);
    for (auto& z : out.data_) z *= s;
    return out;
}

std::vector<Complex> Matrix::apply(std::span<const Complex> v) const {
    if (v.size() != dim_) throw DimensionError("matrix-vector dimension mismatch");
    std::vector<Complex> out(dim_);
    for (std::size_t r = 0; r < dim_; ++r) {
        Complex acc{};
        for (std::size_t c = 0; c < dim_; ++c) acc += (*this)(r, c) * v[c];
        out[r] = acc;
    }
    return out;
}

double Matrix::max_abs_diff(const Matrix& rhs) const {
    if (rhs.dim_ != dim_) throw DimensionError("matrix comparison dimension mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) worst = std::max(worst, std::abs(data_[i] - rhs.data_[i]));
    return worst;
}

bool Matrix::is_unitary(double tol) const {
    return (adjoint() * (*this)).max_abs_diff(identity(dim_)) <= tol;
}

bool Matrix::is_hermitian(double tol) const { return adjoint().max_abs_diff(*this) <= tol; }

Matrix kron(const Matrix& a, const Matrix& b) {
    const std::size_t da = a.dim(), db = b.dim();
    Matrix out(da * db);
    for (std::size_t ar = 0; ar < da; ++ar)
        for (std::size_t ac = 0; ac < da; ++ac)
            for (std::size_t br = 0; br < db; ++br)
                for (std::size_t bc = 0; bc < db; ++bc) out(ar * db + br, ac * db + bc) = a(ar, ac) * b(br, bc);
    return out;
}

// ----------------------------------------------------------- Statevector

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw CapacityError("register size " + std::to_string(n_qubits) + " outside [1, " +
                            std::to_string(kMaxQubits) + "]");
    }
    amps_.assign(std::size_t{1} << n_qubits, Complex{});
    amps_[0] = 1.0;
}

Statevector::Statevector(int n_qubits, std::vector<Complex> amplitudes) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw CapacityError("register size " + std::to_string(n_qubits) + " outside [1, " +
                            std::to_string(kMaxQubits) + "]");
    }
    if (amplitudes.size() != (std::size_t{1} << n_qubits)) {
        throw DimensionError("amplitude count must equal 2^n_qubits");
    }
    amps_ = std::move(amplitudes);
}

double Statevector::squared_norm() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
}

Complex Statevector::inner(const Statevector& other) const {
    if (other.n_qubits_ != n_qubits_) throw DimensionError("inner product of different register sizes");
    Complex acc{};
    for (std::size_t i = 0; i < amps_.size(); ++i) acc += std::conj(amps_[i]) * other.amps_[i];
    return acc;
}

void Statevector::normalize() {
    const double n2 = squared_norm();
    if (n2 <= 0.0) throw ValidationError("cannot normalise a zero state");
    const double s = 1.0 / std::sqrt(n2);
    for (auto& a : amps_) a *= s;
}

Statevector new_statevector(int n_qubits) { return Statevector(n_qubits); }

// ----------------------------------------------------------------- gates

int gate_qubit_count(GateKind kind) {
    switch (kind) {
        case GateKind::H:
        case GateKind::Ry:
        case GateKind::Rz:
        case GateKind::U3: return 1;
        case GateKind::ZZ:
        case GateKind::ControlledU3: return 2;
        case GateKind::CustomMatrix: return 0;
    }
    return 0;
}

std::size_t gate_param_count(GateKind kind) {
    switch (kind) {
        case GateKind::H: return 0;
        case GateKind::Ry:
        case GateKind::Rz:
        case GateKind::ZZ: return 1;
        case GateKind::U3:
        case GateKind::ControlledU3: return 3;
        case GateKind::CustomMatrix: return 0;
    }
    return 0;
}

const char* gate_name(GateKind kind) {
    switch (kind) {
        case GateKind::H: return "H";
        case GateKind::Ry: return "Ry";
        case GateKind::Rz: return "Rz";
        case GateKind::U3: return "U3";
        case GateKind::ZZ: return "ZZ";
        case GateKind::ControlledU3: return "CU3";
        case GateKind::CustomMatrix: return "Custom";
    }
    return "?";
}

Mat2 hadamard_mat() {
    const double s = 1.0 / std::sqrt(2.0);
    return {s, s, s, -s};
}

Mat2 ry_mat(double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {c, -s, s, c};
}

Mat2 rz_mat(double theta) {
    return {std::exp(-kI * (theta / 2)), 0.0, 0.0, std::exp(kI * (theta / 2))};
}

Mat2 u3_mat(double theta, double phi, double delta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {c, -std::exp(kI * delta) * s, std::exp(kI * phi) * s, std::exp(kI * (phi + delta)) * c};
}

Mat4 zz_mat(double phi) {
    const Complex m = std::exp(-kI * (phi / 2)), p = std::exp(kI * (phi / 2));
    Mat4 out{};
    out[0] = m;
    out[5] = p;
    out[10] = p;
    out[15] = m;
    return out;
}

Mat4 controlled_u3_mat(double theta, double phi, double delta) {
    const Mat2 u = u3_mat(theta, phi, delta);
    Mat4 out{};
    out[0] = 1.0;
    out[5] = 1.0;
    out[10] = u[0];
    out[11] = u[1];
    out[14] = u[2];
    out[15] = u[3];
    return out;
}

Matrix gate_matrix(GateKind kind, std::span<const double> params) {
    if (kind == GateKind::CustomMatrix) {
        throw NotApplicableError("custom gates carry their own matrix");
    }
    if (params.size() != gate_param_count(kind)) {
        throw ArityError(std::string(gate_name(kind)) + " expects " + std::to_string(gate_param_count(kind)) +
                         " parameter(s), got " + std::to_string(params.size()));
    }
    switch (kind) {
        case GateKind::H: return Matrix(hadamard_mat());
        case GateKind::Ry: return Matrix(ry_mat(params[0]));
        case GateKind::Rz: return Matrix(rz_mat(params[0]));
        case GateKind::U3: return Matrix(u3_mat(params[0], params[1], params[2]));
        case GateKind::ZZ: return Matrix(zz_mat(params[0]));
        case GateKind::ControlledU3: return Matrix(controlled_u3_mat(params[0], params[1], params[2]));
        case GateKind::CustomMatrix: break;
    }
    throw NotApplicableError("unknown gate kind");
}

// ------------------------------------------------------------ application

void apply_1q(Statevector& state, const Mat2& op, int target) {
    check_target(state, target);
    const std::size_t stride = bit_of(state.n_qubits(), target);
    const std::size_t dim = state.dimension();
    auto amps = state.amplitudes();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const Complex a0 = amps[i], a1 = amps[i + stride];
            amps[i] = op[0] * a0 + op[1] * a1;
            amps[i + stride] = op[2] * a0 + op[3] * a1;
        }
    }
}

void apply_diagonal_2q(Statevector& state, const std::array<Complex, 4>& diag, int first, int second) {
    check_target(state, first);
    check_target(state, second);
    if (first == second) throw DimensionError("duplicate target qubit");
    const int n = state.n_qubits();
    const std::size_t b0 = bit_of(n, first), b1 = bit_of(n, second);
    auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const std::size_t k = ((i & b0) ? 2 : 0) | ((i & b1) ? 1 : 0);
        amps[i] *= diag[k];
    }
}

void apply_controlled_1q(Statevector& state, const Mat2& op, int control, int target) {
    check_target(state, control);
    check_target(state, target);
    if (control == target) throw DimensionError("duplicate target qubit");
    const int n = state.n_qubits();
    const std::size_t c = bit_of(n, control), t = bit_of(n, target);
    auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if (!(i & c) || (i & t)) continue;
        const Complex a0 = amps[i], a1 = amps[i | t];
        amps[i] = op[0] * a0 + op[1] * a1;
        amps[i | t] = op[2] * a0 + op[3] * a1;
    }
}

void apply_2q(Statevector& state, const Mat4& op, int first, int second) {
    check_target(state, first);
    check_target(state, second);
    if (first == second) throw DimensionError("duplicate target qubit");
    const int n = state.n_qubits();
    const std::size_t b0 = bit_of(n, first), b1 = bit_of(n, second);
    const std::size_t dim = state.dimension();
    auto amps = state.amplitudes();
    for (std::size_t i = 0; i < dim; ++i) {
        if (i & (b0 | b1)) continue;
        const std::size_t idx[4] = {i, i | b1, i | b0, i | b0 | b1};
        const Complex in[4] = {amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]};
        for (int r = 0; r < 4; ++r) {
            amps[idx[r]] = op[4 * r] * in[0] + op[4 * r + 1] * in[1] + op[4 * r + 2] * in[2] + op[4 * r + 3] * in[3];
        }
    }
}

void apply_operator(Statevector& state, const Matrix& op, std::span<const int> targets) {
    const std::size_t k = targets.size();
    if (k == 0 || op.dim() != (std::size_t{1} << k)) {
        throw DimensionError("operator dimension does not match the number of targets");
    }
    for (std::size_t a = 0; a < k; ++a) {
        check_target(state, targets[a]);
        for (std::size_t b = a + 1; b < k; ++b)
            if (targets[a] == targets[b]) throw DimensionError("duplicate target qubit");
    }
    if (k == 1) {
        Mat2 m;
        std::copy(op.entries().begin(), op.entries().end(), m.begin());
        apply_1q(state, m, targets[0]);
        return;
    }
    if (k == 2) {
        Mat4 m;
        std::copy(op.entries().begin(), op.entries().end(), m.begin());
        apply_2q(state, m, targets[0], targets[1]);
        return;
    }

    const int n = state.n_qubits();
    const std::size_t sub = op.dim();
    std::vector<std::size_t> offset(sub, 0);
    std::size_t mask = 0;
    for (std::size_t j = 0; j < sub; ++j) {
        for (std::size_t a = 0; a < k; ++a) {
            if (j & (std::size_t{1} << (k - 1 - a))) offset[j] |= bit_of(n, targets[a]);
        }
    }
    for (std::size_t a = 0; a < k; ++a) mask |= bit_of(n, targets[a]);

    auto amps = state.amplitudes();
    std::vector<Complex> in(sub);
    for (std::size_t i = 0; i < state.dimension(); ++i) {
        if (i & mask) continue;
        for (std::size_t j = 0; j < sub; ++j) in[j] = amps[i | offset[j]];
        for (std::size_t r = 0; r < sub; ++r) {
            Complex acc{};
            for (std::size_t c = 0; c < sub; ++c) acc += op(r, c) * in[c];
            amps[i | offset[r]] = acc;
        }
    }
}

// ------------------------------------------------------------ observables

Mat2 pauli_mat(Pauli p) {
    switch (p) {
        case Pauli::I: return {1.0, 0.0, 0.0, 1.0};
        case Pauli::X: return {0.0, 1.0, 1.0, 0.0};
        case Pauli::Y: return {0.0, -kI, kI, 0.0};
        case Pauli::Z: return {1.0, 0.0, 0.0, -1.0};
        case Pauli::Proj0: return {1.0, 0.0, 0.0, 0.0};
    }
    return {};
}

Observable::Observable(std::vector<Mat2> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw DimensionError("observable needs at least one factor");
    for (const auto& f : factors_) {
        if (!mat2_is_hermitian(f, 1e-12)) throw ValidationError("observable factor is not Hermitian");
    }
    const int n = n_qubits();
    if (is_diagonal() && n <= 16) {
        diagonal_.assign(std::size_t{1} << n, 1.0);
        for (std::size_t i = 0; i < diagonal_.size(); ++i)
            for (int q = 0; q < n; ++q) {
                const Mat2& f = factors_[static_cast<std::size_t>(q)];
                diagonal_[i] *= (i & bit_of(n, q)) ? f[3].real() : f[0].real();
            }
    }
}

Observable Observable::identity(int n_qubits) {
    return Observable(std::vector<Mat2>(static_cast<std::size_t>(n_qubits), pauli_mat(Pauli::I)));
}

Observable Observable::single(int n_qubits, int qubit, Pauli p) {
    if (qubit < 0 || qubit >= n_qubits) throw DimensionError("observable qubit out of range");
    std::vector<Mat2> f(static_cast<std::size_t>(n_qubits), pauli_mat(Pauli::I));
    f[static_cast<std::size_t>(qubit)] = pauli_mat(p);
    return Observable(std::move(f));
}

Observable Observable::from_paulis(std::span<const Pauli> paulis) {
    std::vector<Mat2> f;
    f.reserve(paulis.size());
    for (Pauli p : paulis) f.push_back(pauli_mat(p));
    return Observable(std::move(f));
}

bool Observable::is_diagonal() const {
    return std::all_of(factors_.begin(), factors_.end(),
                       [](const Mat2& m) { return m[1] == Complex{} && m[2] == Complex{}; });
}

Observable Observable::tensor(const Observable& rhs) const {
    std::vector<Mat2> f = factors_;
    f.insert(f.end(), rhs.factors_.begin(), rhs.factors_.end());
    return Observable(std::move(f));
}

Matrix Observable::dense() const {
    Matrix out = Matrix(factors_[0]);
    for (std::size_t q = 1; q < factors_.size(); ++q) out = kron(out, Matrix(factors_[q]));
    return out;
}

double expectation(const Statevector& state, const Observable& obs) {
    if (obs.n_qubits() != state.n_qubits()) {
        throw DimensionError("observable acts on " + std::to_string(obs.n_qubits()) + " qubits, state has " +
                             std::to_string(state.n_qubits()));
    }
    const int n = state.n_qubits();
    const auto& factors = obs.factors();
    const auto amps = state.amplitudes();

    if (const auto& d = obs.diagonal(); !d.empty()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < amps.size(); ++i) acc += d[i] * std::norm(amps[i]);
        return acc;
    }
    if (obs.is_diagonal()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < amps.size(); ++i) {
            const double p = std::norm(amps[i]);
            if (p == 0.0) continue;
            double w = 1.0;
            for (int q = 0; q < n && w != 0.0; ++q) {
                const Mat2& f = factors[static_cast<std::size_t>(q)];
                w *= (i & bit_of(n, q)) ? f[3].real() : f[0].real();
            }
            acc += w * p;
        }
        return acc;
    }

    Statevector image = state;
    const Mat2 id = pauli_mat(Pauli::I);
    for (int q = 0; q < n; ++q) {
        const Mat2& f = factors[static_cast<std::size_t>(q)];
        if (f != id) apply_1q(image, f, q);
    }
    const Complex value = state.inner(image);
    const double scale = std::max(1.0, state.squared_norm());
    if (std::abs(value.imag()) > 1e-10 * scale) {
        throw ValidationError("expectation has a non-negligible imaginary part");
    }
    return value.real();
}

double fidelity(const Statevector& a, const Statevector& b) {
    if (a.n_qubits() != b.n_qubits()) throw DimensionError("fidelity of different register sizes");
    return std::min(1.0, std::norm(a.inner(b)));
}

}  // namespace qresnet
