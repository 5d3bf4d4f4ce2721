#include "qresnet/residual.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>

#include "qresnet/errors.hpp"

namespace qresnet {

namespace {

using Angles = std::array<double, 3>;

Angles bind_angles(const GateOp& g, std::span<const double> features, std::span<const double> params,
                   const ParamShift* shift, std::size_t op_index) {
    Angles a{};
    for (std::size_t s = 0; s < g.params.size() && s < a.size(); ++s) {
        a[s] = g.params[s].bind(features, params);
        if (shift && shift->op == op_index && shift->slot == s) a[s] += shift->delta;
    }
    return a;
}

Mat2 one_qubit(GateKind kind, const Angles& a) {
    switch (kind) {
        case GateKind::H: return hadamard_mat();
        case GateKind::Ry: return ry_mat(a[0]);
        case GateKind::Rz: return rz_mat(a[0]);
        case GateKind::U3: return u3_mat(a[0], a[1], a[2]);
        default: break;
    }
    throw NotApplicableError("not a one-qubit gate kind");
}

Mat4 two_qubit(GateKind kind, const Angles& a) {
    switch (kind) {
        case GateKind::ZZ: return zz_mat(a[0]);
        case GateKind::ControlledU3: return controlled_u3_mat(a[0], a[1], a[2]);
        default: break;
    }
    throw NotApplicableError("not a two-qubit gate kind");
}

template <typename M>
M blend(const M& gate, const ResidualWeights& w) {
    constexpr std::size_t dim = (std::tuple_size_v<M> == 4) ? 2 : 4;
    M out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w.gate * gate[i];
    for (std::size_t d = 0; d < dim; ++d) out[d * dim + d] += w.identity;
    return out;
}

void apply_gate(Statevector& state, const GateOp& g, const Angles& a) {
    if (g.kind == GateKind::CustomMatrix) {
        apply_operator(state, *g.custom, g.targets);
    } else if (gate_qubit_count(g.kind) == 1) {
        apply_1q(state, one_qubit(g.kind, a), g.targets[0]);
    } else {
        apply_2q(state, two_qubit(g.kind, a), g.targets[0], g.targets[1]);
    }
}

Matrix gate_from_angles(const GateOp& g, const Angles& a) {
    if (g.kind == GateKind::CustomMatrix) return *g.custom;
    if (gate_qubit_count(g.kind) == 1) return Matrix(one_qubit(g.kind, a));
    return Matrix(two_qubit(g.kind, a));
}

double angle_or_zero(const std::optional<std::size_t>& idx, std::span<const double> params) {
    if (!idx) return 0.0;
    if (*idx >= params.size()) throw DimensionError("residual angle index out of range");
    return params[*idx];
}

void check_inputs(const ModelSpec& model, std::span<const double> features, std::span<const double> params) {
    if (features.size() < model.n_features) throw DimensionError("too few input features for the model");
    if (params.size() != model.n_trainable) {
        throw DimensionError("model expects " + std::to_string(model.n_trainable) + " parameters, got " +
                             std::to_string(params.size()));
    }
}

std::vector<int> ancilla_branches(const ModelSpec& model) {
    std::vector<int> out;
    for (const auto& op : model.ops) {
        if (const auto* r = std::get_if<ResidualOp>(&op); r && r->strategy.kind != ResidualKind::Traditional) {
            out.push_back(r->strategy.branch);
        }
    }
    return out;
}

}  // namespace

ResidualWeights residual_weights(const ResidualStrategy& strategy, double alpha, double gamma) {
    const double sign = strategy.branch == 0 ? 1.0 : -1.0;
    switch (strategy.kind) {
        case ResidualKind::Traditional: return {0.0, 1.0};
        case ResidualKind::R: return {0.5, 0.5 * sign};
        case ResidualKind::R1: {
            const double s = 1.0 / std::numbers::sqrt2;
            return {std::cos(alpha) * s, sign * std::sin(alpha) * s};
        }
        case ResidualKind::R2: {
            const double eta = std::numbers::pi * strategy.branch / 2.0 - gamma;
            return {std::cos(alpha) * std::cos(eta), std::sin(alpha) * std::sin(eta)};
        }
    }
    return {0.0, 1.0};
}

Matrix residual_matrix(const ResidualStrategy& strategy, const Matrix& gate, double alpha, double gamma) {
    if (!gate.is_unitary(1e-10)) throw ValidationError("residual inner operator must be unitary");
    const ResidualWeights w = residual_weights(strategy, alpha, gamma);
    return Matrix::identity(gate.dim()) * w.identity + gate * w.gate;
}

ACoefficients a_coefficients(const ResidualStrategy& strategy, double alpha, double gamma) {
    const double sign = strategy.branch == 0 ? 1.0 : -1.0;
    switch (strategy.kind) {
        case ResidualKind::Traditional:
            throw NotApplicableError("traditional encoding has no residual coefficients");
        case ResidualKind::R: return {0.25, 0.25, 0.5 * sign};
        case ResidualKind::R1: {
            const double s = std::sin(alpha), c = std::cos(alpha);
            return {s * s / 2.0, c * c / 2.0, sign * std::sin(2.0 * alpha) / 2.0};
        }
        case ResidualKind::R2: {
            const double eta = std::numbers::pi * strategy.branch / 2.0 - gamma;
            const double ss = std::sin(alpha) * std::sin(eta), cc = std::cos(alpha) * std::cos(eta);
            return {ss * ss, cc * cc, std::sin(2.0 * alpha) * std::sin(2.0 * eta) / 2.0};
        }
    }
    return {};
}

Matrix bound_gate_matrix(const GateOp& gate, std::span<const double> features, std::span<const double> params,
                         const ParamShift* shift, std::size_t op_index) {
    return gate_from_angles(gate, bind_angles(gate, features, params, shift, op_index));
}

namespace {

// Picks a cheaper kernel when the 4x4 matrix is exactly diagonal or
// exactly controlled on the first target.
void classify_two_qubit(CircuitCache::BoundOp& op) {
    using Shape = CircuitCache::BoundOp::Shape;
    const Mat4& m = op.m4;
    bool diagonal = true, controlled = true;
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            const Complex v = m[4 * r + c];
            if (r != c && v != Complex{}) diagonal = false;
            const bool in_target_block = r >= 2 && c >= 2;
            if (!in_target_block && v != (r == c ? Complex{1.0} : Complex{})) controlled = false;
        }
    }
    if (diagonal) {
        op.shape = Shape::Diagonal;
        for (std::size_t k = 0; k < 4; ++k) op.diag[k] = m[5 * k];
    } else if (controlled) {
        op.shape = Shape::Controlled;
        op.m2 = {m[10], m[11], m[14], m[15]};
    }
}

CircuitCache::BoundOp bind_op(const CircuitOp& op, std::span<const double> features, std::span<const double> params,
                              const ParamShift* shift, std::size_t i) {
    const GateOp* g = std::get_if<GateOp>(&op);
    const ResidualOp* r = g ? nullptr : &std::get<ResidualOp>(op);
    const GateOp& gate = g ? *g : r->inner;
    const Angles a = bind_angles(gate, features, params, shift, i);

    std::optional<ResidualWeights> w;
    if (r && r->strategy.kind != ResidualKind::Traditional) {
        w = residual_weights(r->strategy, angle_or_zero(r->strategy.alpha, params),
                             angle_or_zero(r->strategy.gamma, params));
    }

    using Shape = CircuitCache::BoundOp::Shape;
    CircuitCache::BoundOp out;
    out.targets = gate.targets;
    if (gate.kind == GateKind::CustomMatrix) {
        out.shape = Shape::Dense;
        out.dense = *gate.custom;
        if (w) out.dense = Matrix::identity(out.dense.dim()) * w->identity + out.dense * w->gate;
    } else if (gate_qubit_count(gate.kind) == 1) {
        out.m2 = one_qubit(gate.kind, a);
        if (w) out.m2 = blend(out.m2, *w);
    } else {
        out.shape = Shape::TwoQubit;
        out.m4 = two_qubit(gate.kind, a);
        if (w) out.m4 = blend(out.m4, *w);
        classify_two_qubit(out);
    }
    return out;
}

void apply_bound(Statevector& state, const CircuitCache::BoundOp& op) {
    using Shape = CircuitCache::BoundOp::Shape;
    switch (op.shape) {
        case Shape::OneQubit: apply_1q(state, op.m2, op.targets[0]); break;
        case Shape::TwoQubit: apply_2q(state, op.m4, op.targets[0], op.targets[1]); break;
        case Shape::Diagonal: apply_diagonal_2q(state, op.diag, op.targets[0], op.targets[1]); break;
        case Shape::Controlled: apply_controlled_1q(state, op.m2, op.targets[0], op.targets[1]); break;
        case Shape::Dense: apply_operator(state, op.dense, op.targets); break;
    }
}

}  // namespace

Statevector prepare_direct(const ModelSpec& model, std::span<const double> features,
                           std::span<const double> params, const ParamShift* shift) {
    check_inputs(model, features, params);
    Statevector state(model.n_qubits);
    for (std::size_t i = 0; i < model.ops.size(); ++i) apply_bound(state, bind_op(model.ops[i], features, params, shift, i));
    return state;
}

CircuitCache::CircuitCache(const ModelSpec& model, std::span<const double> features, std::span<const double> params)
    : model_(&model), features_(features.begin(), features.end()), params_(params.begin(), params.end()) {
    check_inputs(model, features, params);
    ops_.reserve(model.ops.size());
    before_.reserve(model.ops.size());
    Statevector state(model.n_qubits);
    for (std::size_t i = 0; i < model.ops.size(); ++i) {
        const auto& op = model.ops[i];
        const GateOp* g = std::get_if<GateOp>(&op);
        const ResidualOp* r = g ? nullptr : &std::get<ResidualOp>(op);
        std::vector<std::size_t> deps;
        for (const auto& p : (g ? *g : r->inner).params)
            if (p.source == ParamSource::Trainable) deps.push_back(p.index);
        if (r && r->strategy.kind != ResidualKind::Traditional) {
            if (r->strategy.alpha) deps.push_back(*r->strategy.alpha);
            if (r->strategy.gamma) deps.push_back(*r->strategy.gamma);
        }
        deps_.push_back(std::move(deps));
        ops_.push_back(bind_op(op, features_, params_, nullptr, i));
        before_.push_back(state);
        apply_bound(state, ops_.back());
    }
    value_ = expectation(state, model.observable);
}

double CircuitCache::evaluate(std::span<const double> params, const ParamShift* shift) const {
    if (params.size() != params_.size()) throw DimensionError("parameter count differs from the cached point");
    std::vector<std::size_t> changed;
    for (std::size_t j = 0; j < params.size(); ++j)
        if (params[j] != params_[j]) changed.push_back(j);
    const auto stale = [&](std::size_t i) {
        if (shift && shift->op == i) return true;
        for (std::size_t d : deps_[i])
            if (std::find(changed.begin(), changed.end(), d) != changed.end()) return true;
        return false;
    };

    const std::size_t n = ops_.size();
    std::size_t first = n;
    for (std::size_t i = 0; i < n && first == n; ++i)
        if (stale(i)) first = i;
    if (first == n) return value_;

    Statevector state = before_[first];
    for (std::size_t i = first; i < n; ++i) {
        if (stale(i)) {
            apply_bound(state, bind_op(model_->ops[i], features_, params, shift, i));
        } else {
            apply_bound(state, ops_[i]);
        }
    }
    return expectation(state, model_->observable);
}

double residual_expectation_direct(const ModelSpec& model, std::span<const double> features,
                                   std::span<const double> params, const ParamShift* shift) {
    return expectation(prepare_direct(model, features, params, shift), model.observable);
}

Statevector prepare_ancilla(const ModelSpec& model, std::span<const double> features,
                            std::span<const double> params) {
    check_inputs(model, features, params);
    const int n_sys = model.n_qubits;
    const int total = n_sys + static_cast<int>(model.ancilla_count());
    if (total > kMaxQubits) {
        throw CapacityError("system plus ancilla qubits (" + std::to_string(total) + ") exceed the register cap");
    }
    Statevector state(total);
    int next_ancilla = n_sys;
    for (std::size_t i = 0; i < model.ops.size(); ++i) {
        const auto& op = model.ops[i];
        if (const auto* g = std::get_if<GateOp>(&op)) {
            apply_gate(state, *g, bind_angles(*g, features, params, nullptr, i));
            continue;
        }
        const auto& r = std::get<ResidualOp>(op);
        const Angles a = bind_angles(r.inner, features, params, nullptr, i);
        if (r.strategy.kind == ResidualKind::Traditional) {
            apply_gate(state, r.inner, a);
            continue;
        }
        const int anc = next_ancilla++;
        const double alpha = angle_or_zero(r.strategy.alpha, params);
        const double gamma = angle_or_zero(r.strategy.gamma, params);

        apply_1q(state, r.strategy.kind == ResidualKind::R ? hadamard_mat() : ry_mat(2.0 * alpha), anc);

        // controlled-L with the ancilla as control
        const Matrix inner = gate_from_angles(r.inner, a);
        const std::size_t d = inner.dim();
        Matrix controlled = Matrix::identity(2 * d);
        for (std::size_t row = 0; row < d; ++row)
            for (std::size_t col = 0; col < d; ++col) controlled(d + row, d + col) = inner(row, col);
        std::vector<int> targets{anc};
        targets.insert(targets.end(), r.inner.targets.begin(), r.inner.targets.end());
        apply_operator(state, controlled, targets);

        apply_1q(state, r.strategy.kind == ResidualKind::R2 ? ry_mat(2.0 * gamma) : hadamard_mat(), anc);
    }
    return state;
}

double residual_expectation_ancilla(const ModelSpec& model, std::span<const double> features,
                                    std::span<const double> params) {
    const Statevector full = prepare_ancilla(model, features, params);
    const std::vector<int> branches = ancilla_branches(model);
    const std::size_t l = branches.size();
    if (l == 0) return expectation(full, model.observable);

    // Average of the 2^l observables {I, (-1)^m Z}^{(x) l} (x) O.
    double total = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << l); ++mask) {
        std::vector<Mat2> factors = model.observable.factors();
        double sign = 1.0;
        for (std::size_t j = 0; j < l; ++j) {
            const bool use_z = (mask >> j) & 1U;
            factors.push_back(pauli_mat(use_z ? Pauli::Z : Pauli::I));
            if (use_z && branches[j] == 1) sign = -sign;
        }
        total += sign * expectation(full, Observable(std::move(factors)));
    }
    return total / static_cast<double>(std::size_t{1} << l);
}

Statevector project_ancillas(const Statevector& full, int n_system) {
    const int l = full.n_qubits() - n_system;
    if (n_system < 1 || l < 0) throw DimensionError("system size inconsistent with the register");
    std::vector<Complex> amps(std::size_t{1} << n_system);
    for (std::size_t i = 0; i < amps.size(); ++i) amps[i] = full[i << l];
    return Statevector(n_system, std::move(amps));
}

Statevector model_state(const ModelSpec& model, std::span<const double> features, std::span<const double> params) {
    if (model.ancilla_count() == 0) return prepare_direct(model, features, params);
    const Statevector full = prepare_ancilla(model, features, params);
    const std::vector<int> branches = ancilla_branches(model);
    const std::size_t l = branches.size();
    std::size_t anc_bits = 0;
    for (std::size_t j = 0; j < l; ++j)
        if (branches[j] == 1) anc_bits |= std::size_t{1} << (l - 1 - j);
    std::vector<Complex> amps(std::size_t{1} << model.n_qubits);
    for (std::size_t i = 0; i < amps.size(); ++i) amps[i] = full[(i << l) | anc_bits];
    Statevector out(model.n_qubits, std::move(amps));
    out.normalize();
    return out;
}

}  // namespace qresnet
