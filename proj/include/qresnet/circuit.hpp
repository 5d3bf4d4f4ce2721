#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qresnet/simcore.hpp"

namespace qresnet {

enum class ParamSource { Fixed, Feature, Trainable };

/// Where a gate angle comes from: a constant, an input feature, or an entry
/// of the trainable parameter vector. Bound value = scale * source value.
struct ParamRef {
    ParamSource source = ParamSource::Fixed;
    double value = 0.0;
    std::size_t index = 0;
    double scale = 1.0;

    static ParamRef fixed(double v) { return {ParamSource::Fixed, v, 0, 1.0}; }
    static ParamRef feature(std::size_t i, double scale = 1.0) { return {ParamSource::Feature, 0.0, i, scale}; }
    static ParamRef trainable(std::size_t i, double scale = 1.0) { return {ParamSource::Trainable, 0.0, i, scale}; }

    double bind(std::span<const double> features, std::span<const double> params) const;
};

struct GateOp {
    GateKind kind = GateKind::H;
    std::vector<int> targets;
    std::vector<ParamRef> params;
    std::optional<Matrix> custom;  // only for GateKind::CustomMatrix
};

enum class ResidualKind { Traditional, R, R1, R2 };

const char* residual_kind_name(ResidualKind kind);
ResidualKind parse_residual_kind(const std::string& name);

/// Residual wrapper configuration. `alpha` and `gamma` index the trainable
/// parameter vector; R1 uses alpha, R2 uses both. `branch` is the ancilla
/// measurement outcome the operator is read from.
struct ResidualStrategy {
    ResidualKind kind = ResidualKind::Traditional;
    std::optional<std::size_t> alpha;
    std::optional<std::size_t> gamma;
    int branch = 0;
};

/// An inner gate L wrapped into a residual operator a*I + b*L.
struct ResidualOp {
    ResidualStrategy strategy;
    GateOp inner;
};

using CircuitOp = std::variant<GateOp, ResidualOp>;

/// Forces one occurrence of a gate angle to be offset by `delta`.
/// `slot` indexes GateOp::params (for a ResidualOp, the inner gate's params).
struct ParamShift {
    std::size_t op = 0;
    std::size_t slot = 0;
    double delta = 0.0;
};

/// A parameterised circuit on `n_qubits` system qubits, evaluated from
/// |0...0> and measured with `observable`.
struct ModelSpec {
    int n_qubits = 1;
    std::vector<CircuitOp> ops;
    Observable observable = Observable::identity(1);
    std::size_t n_features = 0;
    std::size_t n_trainable = 0;
    std::vector<std::string> param_labels;
    /// Per-parameter fixed initial value; empty entries are drawn at random.
    std::vector<std::optional<double>> param_init;

    /// Residual ops whose kind is not Traditional; each needs one ancilla.
    std::size_t ancilla_count() const;
    /// Throws on inconsistent indices, arities or register sizes.
    void validate() const;
};

class ModelBuilder {
public:
    explicit ModelBuilder(int n_qubits);

    std::size_t add_param(std::string label, std::optional<double> init = std::nullopt);
    ModelBuilder& feature_count(std::size_t n);
    ModelBuilder& gate(GateKind kind, std::vector<int> targets, std::vector<ParamRef> params = {});
    ModelBuilder& custom(Matrix m, std::vector<int> targets);
    ModelBuilder& residual(ResidualStrategy strategy, GateOp inner);
    /// Appends a residual wrapper of `kind` around `inner`, allocating its
    /// alpha/gamma parameters (initialised from `init_alpha`/`init_gamma`
    /// when given).
    ModelBuilder& residual(ResidualKind kind, GateOp inner, const std::string& label,
                           std::optional<double> init_alpha = std::nullopt,
                           std::optional<double> init_gamma = std::nullopt);
    ModelSpec build(Observable observable);

private:
    ModelSpec spec_;
};

/// Uniform draw on [0, 2pi) for every parameter without a fixed initial
/// value, from a stream derived from `seed`.
std::vector<double> initial_parameters(const ModelSpec& model, std::uint64_t seed);

}  // namespace qresnet
