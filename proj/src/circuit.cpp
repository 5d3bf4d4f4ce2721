#include "qresnet/circuit.hpp"

#include <set>

#include "qresnet/errors.hpp"
#include "qresnet/rng.hpp"

namespace qresnet {

double ParamRef::bind(std::span<const double> features, std::span<const double> params) const {
    switch (source) {
        case ParamSource::Fixed: return scale * value;
        case ParamSource::Feature:
            if (index >= features.size()) throw DimensionError("feature index out of range");
            return scale * features[index];
        case ParamSource::Trainable:
            if (index >= params.size()) throw DimensionError("parameter index out of range");
            return scale * params[index];
    }
    return 0.0;
}

const char* residual_kind_name(ResidualKind kind) {
    switch (kind) {
        case ResidualKind::Traditional: return "traditional";
        case ResidualKind::R: return "R";
        case ResidualKind::R1: return "R1";
        case ResidualKind::R2: return "R2";
    }
    return "?";
}

ResidualKind parse_residual_kind(const std::string& name) {
    if (name == "traditional" || name == "trad") return ResidualKind::Traditional;
    if (name == "R" || name == "r") return ResidualKind::R;
    if (name == "R1" || name == "r1") return ResidualKind::R1;
    if (name == "R2" || name == "r2") return ResidualKind::R2;
    throw ValidationError("unknown encoding '" + name + "' (expected traditional, R, R1 or R2)");
}

std::size_t ModelSpec::ancilla_count() const {
    std::size_t n = 0;
    for (const auto& op : ops) {
        if (const auto* r = std::get_if<ResidualOp>(&op); r && r->strategy.kind != ResidualKind::Traditional) ++n;
    }
    return n;
}

namespace {

void validate_gate(const GateOp& g, const ModelSpec& m) {
    std::size_t width;
    if (g.kind == GateKind::CustomMatrix) {
        if (!g.custom) throw ValidationError("custom gate without a matrix");
        if (g.custom->dim() != (std::size_t{1} << g.targets.size())) {
            throw DimensionError("custom matrix dimension does not match its targets");
        }
        width = g.targets.size();
    } else {
        width = static_cast<std::size_t>(gate_qubit_count(g.kind));
        if (g.params.size() != gate_param_count(g.kind)) {
            throw ArityError(std::string(gate_name(g.kind)) + " has the wrong number of parameters");
        }
    }
    if (g.targets.size() != width) throw DimensionError("gate target count does not match its width");
    std::set<int> seen;
    for (int t : g.targets) {
        if (t < 0 || t >= m.n_qubits) throw DimensionError("gate target out of range");
        if (!seen.insert(t).second) throw DimensionError("duplicate gate target");
    }
    for (const auto& p : g.params) {
        if (p.source == ParamSource::Feature && p.index >= m.n_features) {
            throw DimensionError("gate references a missing feature");
        }
        if (p.source == ParamSource::Trainable && p.index >= m.n_trainable) {
            throw DimensionError("gate references a missing parameter");
        }
    }
}

}  // namespace

void ModelSpec::validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) throw CapacityError("model register size out of range");
    if (observable.n_qubits() != n_qubits) throw DimensionError("observable size does not match the register");
    if (param_labels.size() != n_trainable || param_init.size() != n_trainable) {
        throw DimensionError("parameter metadata does not match the parameter count");
    }
    for (const auto& op : ops) {
        if (const auto* g = std::get_if<GateOp>(&op)) {
            validate_gate(*g, *this);
            continue;
        }
        const auto& r = std::get<ResidualOp>(op);
        validate_gate(r.inner, *this);
        const auto need = [&](const std::optional<std::size_t>& idx, const char* what) {
            if (!idx || *idx >= n_trainable) {
                throw ValidationError(std::string("residual operator is missing its ") + what + " parameter");
            }
        };
        if (r.strategy.kind == ResidualKind::R1) need(r.strategy.alpha, "alpha");
        if (r.strategy.kind == ResidualKind::R2) {
            need(r.strategy.alpha, "alpha");
            need(r.strategy.gamma, "gamma");
        }
        if (r.strategy.branch != 0 && r.strategy.branch != 1) throw ValidationError("ancilla branch must be 0 or 1");
    }
}

ModelBuilder::ModelBuilder(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) throw CapacityError("model register size out of range");
    spec_.n_qubits = n_qubits;
}

std::size_t ModelBuilder::add_param(std::string label, std::optional<double> init) {
    spec_.param_labels.push_back(std::move(label));
    spec_.param_init.push_back(init);
    return spec_.n_trainable++;
}

ModelBuilder& ModelBuilder::feature_count(std::size_t n) {
    spec_.n_features = n;
    return *this;
}

ModelBuilder& ModelBuilder::gate(GateKind kind, std::vector<int> targets, std::vector<ParamRef> params) {
    spec_.ops.emplace_back(GateOp{kind, std::move(targets), std::move(params), std::nullopt});
    return *this;
}

ModelBuilder& ModelBuilder::custom(Matrix m, std::vector<int> targets) {
    spec_.ops.emplace_back(GateOp{GateKind::CustomMatrix, std::move(targets), {}, std::move(m)});
    return *this;
}

ModelBuilder& ModelBuilder::residual(ResidualStrategy strategy, GateOp inner) {
    spec_.ops.emplace_back(ResidualOp{strategy, std::move(inner)});
    return *this;
}

ModelBuilder& ModelBuilder::residual(ResidualKind kind, GateOp inner, const std::string& label,
                                     std::optional<double> init_alpha, std::optional<double> init_gamma) {
    ResidualStrategy s{kind, std::nullopt, std::nullopt, 0};
    if (kind == ResidualKind::R1 || kind == ResidualKind::R2) s.alpha = add_param(label + ".alpha", init_alpha);
    if (kind == ResidualKind::R2) s.gamma = add_param(label + ".gamma", init_gamma);
    return residual(s, std::move(inner));
}

ModelSpec ModelBuilder::build(Observable observable) {
    spec_.observable = std::move(observable);
    spec_.validate();
    return spec_;
}

std::vector<double> initial_parameters(const ModelSpec& model, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417));
    std::vector<double> out(model.n_trainable);
    for (std::size_t i = 0; i < model.n_trainable; ++i) {
        const double draw = rng.angle();
        out[i] = model.param_init[i] ? *model.param_init[i] : draw;
    }
    return out;
}

}  // namespace qresnet
