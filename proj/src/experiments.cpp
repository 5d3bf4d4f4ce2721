#include "qresnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qresnet/errors.hpp"
#include "qresnet/residual.hpp"

namespace qresnet {

double FourierTarget::operator()(double x) const {
    double y = 0.0;
    for (const auto& t : terms) {
        y += 2.0 * (t.amplitude.real() * std::cos(t.frequency * x) - t.amplitude.imag() * std::sin(t.frequency * x));
    }
    return y;
}

std::complex<double> FourierTarget::evaluate_complex(double x) const {
    std::complex<double> y{};
    for (const auto& t : terms) {
        const auto e = std::polar(1.0, t.frequency * x);
        y += t.amplitude * e + std::conj(t.amplitude) * std::conj(e);
    }
    return y;
}

std::map<std::string, FourierTarget> make_targets() {
    using C = std::complex<double>;
    const C a{0.1, 0.1};
    std::map<std::string, FourierTarget> out;
    out["y1_omega1"] = {"y1_omega1", {{0.0, a}, {1.0, a}}};
    out["y1_omega2"] = {"y1_omega2", {{0.0, a}, {1.0, a}, {0.5, a}}};
    // distinct amplitudes, each component perturbed by 20% from a
    out["y2_omega2"] = {"y2_omega2", {{0.0, C{0.12, 0.0}}, {1.0, C{0.08, 0.12}}, {0.5, C{0.12, 0.08}}}};
    const C big{0.15, 0.15}, small{0.03, 0.03};
    out["y2_omega3"] = {"y2_omega3", {{0.0, C{0.1, 0.0}}, {1.0, small}, {0.5, small}, {1.5, big}, {2.0, big}}};
    return out;
}

const char* layout_name(Layout layout) { return layout == Layout::Sequential ? "sequential" : "parallel"; }

Layout parse_layout(const std::string& name) {
    if (name == "sequential") return Layout::Sequential;
    if (name == "parallel") return Layout::Parallel;
    throw ValidationError("unknown layout '" + name + "' (expected sequential or parallel)");
}

namespace {

/// Rz(t1) Ry(t2) Rz(t3) as an operator, so Rz(t3) is applied first.
void add_rotation_block(ModelBuilder& b, int qubit, const std::string& label) {
    const auto t1 = b.add_param(label + ".1");
    const auto t2 = b.add_param(label + ".2");
    const auto t3 = b.add_param(label + ".3");
    b.gate(GateKind::Rz, {qubit}, {ParamRef::trainable(t3)});
    b.gate(GateKind::Ry, {qubit}, {ParamRef::trainable(t2)});
    b.gate(GateKind::Rz, {qubit}, {ParamRef::trainable(t1)});
}

void add_encoding(ModelBuilder& b, ResidualKind encoding, int qubit, const std::string& label) {
    GateOp enc{GateKind::Ry, {qubit}, {ParamRef::feature(0)}, std::nullopt};
    if (encoding == ResidualKind::Traditional) {
        b.gate(enc.kind, enc.targets, enc.params);
    } else {
        b.residual(encoding, std::move(enc), label);
    }
}

}  // namespace

ModelSpec build_regression_model(ResidualKind encoding, int layers, Layout layout) {
    if (layers < 1) throw ValidationError("need at least one encoding layer");
    if (layout == Layout::Sequential) {
        ModelBuilder b(1);
        b.feature_count(1);
        add_rotation_block(b, 0, "w0");
        for (int l = 1; l <= layers; ++l) {
            add_encoding(b, encoding, 0, "enc" + std::to_string(l));
            add_rotation_block(b, 0, "w" + std::to_string(l));
        }
        return b.build(Observable::single(1, 0, Pauli::Z));
    }
    if (layers < 2) throw ValidationError("parallel layout needs at least two layers");
    ModelBuilder b(layers);
    b.feature_count(1);
    for (int q = 0; q < layers; ++q) {
        add_rotation_block(b, q, "q" + std::to_string(q) + ".pre");
        add_encoding(b, encoding, q, "q" + std::to_string(q) + ".enc");
        add_rotation_block(b, q, "q" + std::to_string(q) + ".post");
    }
    for (int q = 0; q + 1 < layers; ++q) {
        const auto p = b.add_param("zz" + std::to_string(q));
        b.gate(GateKind::ZZ, {q, q + 1}, {ParamRef::trainable(p)});
    }
    add_rotation_block(b, 0, "out");
    return b.build(Observable::single(layers, 0, Pauli::Z));
}

ModelSpec build_regression_model(const ExperimentSpec& spec) {
    return build_regression_model(spec.encoding, spec.layers, spec.layout);
}

Spectrum analytic_spectrum(ResidualKind encoding, int layers) {
    const GeneratorSpec gen{{0.5, -0.5}, "Ry"};
    return encoding == ResidualKind::Traditional ? traditional_spectrum(gen, layers) : residual_spectrum(gen, layers);
}

std::vector<Sample> regression_data(const FourierTarget& target, std::size_t points) {
    if (points < 1) throw ValidationError("need at least one regression point");
    std::vector<Sample> data(points);
    const double span = 4.0 * std::numbers::pi;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = span * static_cast<double>(i) / static_cast<double>(points);
        data[i] = {{x}, target(x)};
    }
    return data;
}

FitReport run_fit(const ExperimentSpec& spec, const StepCallback& on_step) {
    if (spec.repetitions < 1) throw ValidationError("repetitions must be positive");
    const ModelSpec model = build_regression_model(spec);
    const auto data = regression_data(spec.target, spec.grid_points);

    FitReport report;
    report.spec = spec;
    report.trainable_count = model.n_trainable;
    for (int r = 0; r < spec.repetitions; ++r) {
        TrainConfig cfg = spec.train;
        cfg.seed = spec.base_seed + static_cast<std::uint64_t>(r);
        FitRun run;
        run.seed = cfg.seed;
        run.result = train(model, cfg, data, LossKind::Mse, std::nullopt, on_step);
        run.final_mse = mse_loss(model, run.result.best_params, data, LossKind::Mse, cfg.threads);
        report.runs.push_back(std::move(run));
    }

    std::vector<double> mses;
    for (const auto& run : report.runs) mses.push_back(run.final_mse);
    report.best_run = static_cast<std::size_t>(std::min_element(mses.begin(), mses.end()) - mses.begin());
    report.best_mse = mses[report.best_run];
    std::vector<double> sorted = mses;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    report.median_mse = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    const auto& best = report.runs[report.best_run].result.best_params;
    for (const auto& s : data) {
        report.curve.push_back({s.x[0], s.y, residual_expectation_direct(model, s.x, best)});
    }
    const Spectrum spectrum = analytic_spectrum(spec.encoding, spec.layers);
    report.analytic_frequencies = spectrum.frequencies;
    const auto candidates = spectrum.non_negative();
    const auto fit = extract_coefficients(
        [&](double x) {
            const double xs[1] = {x};
            return residual_expectation_direct(model, xs, best);
        },
        candidates, default_grid(candidates));
    report.coefficients = fit.coefficients;
    return report;
}

}  // namespace qresnet
