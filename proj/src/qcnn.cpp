#include "qresnet/qcnn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "qresnet/errors.hpp"
#include "qresnet/parallel.hpp"
#include "qresnet/residual.hpp"
#include "qresnet/rng.hpp"

namespace qresnet {

namespace {

struct ConvParams {
    std::size_t u3a[3];
    std::size_t zz;
    std::size_t u3b[3];
};

ConvParams add_conv_params(ModelBuilder& b, const std::string& label) {
    ConvParams p{};
    for (int i = 0; i < 3; ++i) p.u3a[i] = b.add_param(label + ".u3a." + std::to_string(i));
    p.zz = b.add_param(label + ".zz");
    for (int i = 0; i < 3; ++i) p.u3b[i] = b.add_param(label + ".u3b." + std::to_string(i));
    return p;
}

std::vector<ParamRef> refs(const std::size_t (&idx)[3]) {
    return {ParamRef::trainable(idx[0]), ParamRef::trainable(idx[1]), ParamRef::trainable(idx[2])};
}

void add_conv(ModelBuilder& b, const ConvParams& p, const std::vector<int>& qubits,
              const std::vector<std::pair<int, int>>& pairs) {
    for (int q : qubits) b.gate(GateKind::U3, {q}, refs(p.u3a));
    for (auto [a, c] : pairs) b.gate(GateKind::ZZ, {a, c}, {ParamRef::trainable(p.zz)});
    for (int q : qubits) b.gate(GateKind::U3, {q}, refs(p.u3b));
}

}  // namespace

ModelSpec build_qcnn(const QcnnSpec& spec) {
    if (spec.n_qubits != 4) throw ValidationError("the QCNN layout is defined for four qubits");
    for (int q : spec.residual_qubits)
        if (q < 0 || q >= spec.n_qubits) throw ValidationError("residual qubit out of range");

    ModelBuilder b(4);
    b.feature_count(4);

    const ConvParams conv1 = add_conv_params(b, "conv1");
    std::size_t pool1[3], pool2[3];
    for (int i = 0; i < 3; ++i) pool1[i] = b.add_param("pool1." + std::to_string(i));
    const ConvParams conv2 = add_conv_params(b, "conv2");
    for (int i = 0; i < 3; ++i) pool2[i] = b.add_param("pool2." + std::to_string(i));

    for (int q = 0; q < 4; ++q) {
        GateOp enc{GateKind::Ry, {q}, {ParamRef::feature(static_cast<std::size_t>(q))}, std::nullopt};
        const bool residual = std::find(spec.residual_qubits.begin(), spec.residual_qubits.end(), q) !=
                              spec.residual_qubits.end();
        if (residual) {
            b.residual(ResidualKind::R2, std::move(enc), "res.q" + std::to_string(q), std::numbers::pi / 4,
                       -std::numbers::pi / 4);
        } else {
            b.gate(enc.kind, enc.targets, enc.params);
        }
    }

    add_conv(b, conv1, {0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    b.gate(GateKind::ControlledU3, {0, 1}, refs(pool1));
    b.gate(GateKind::ControlledU3, {2, 3}, refs(pool1));
    add_conv(b, conv2, {1, 3}, {{1, 3}});
    b.gate(GateKind::ControlledU3, {1, 3}, refs(pool2));
    return b.build(Observable::single(4, 3, Pauli::Z));
}

double qcnn_cost(const ModelSpec& model, std::span<const double> params, std::span<const Sample> data, int threads) {
    return mse_loss(model, params, data, LossKind::AbsMse, threads);
}

Prediction classify(double expectation, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 0.5)) throw ValidationError("boundary precision must lie in (0, 0.5]");
    const double m = std::abs(expectation);
    if (m > 1.0 - epsilon) return {expectation, Label::One};
    if (m < epsilon) return {expectation, Label::Zero};
    return {expectation, Label::Unclassifiable};
}

double accuracy(std::span<const Prediction> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
    if (predictions.empty()) throw ValidationError("accuracy of an empty set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const Label want = labels[i] == 0 ? Label::Zero : Label::One;
        if (predictions[i].label == want) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<std::size_t> stratified_subset(std::span<const std::uint8_t> labels, std::size_t size,
                                           std::uint64_t seed) {
    if (size >= labels.size()) {
        std::vector<std::size_t> all(labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    std::map<std::uint8_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    // largest-remainder allocation of `size` across classes
    std::vector<std::pair<std::uint8_t, std::size_t>> quota;
    std::vector<std::pair<double, std::uint8_t>> remainders;
    std::size_t assigned = 0;
    for (const auto& [cls, idx] : by_class) {
        const double exact = static_cast<double>(size) * static_cast<double>(idx.size()) / labels.size();
        const auto base = static_cast<std::size_t>(std::floor(exact));
        quota.emplace_back(cls, base);
        remainders.emplace_back(exact - static_cast<double>(base), cls);
        assigned += base;
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < size; ++i, ++assigned) {
        for (auto& [cls, q] : quota)
            if (cls == remainders[i % remainders.size()].second) ++q;
    }

    std::vector<std::size_t> out;
    for (auto& [cls, q] : quota) {
        auto idx = by_class[cls];
        Rng rng(derive_seed(seed, cls));
        for (std::size_t i = 0; i < q; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q));
    }
    std::sort(out.begin(), out.end());
    return out;
}

PreparedMnist prepare_mnist(const MnistDataConfig& config) {
    const MnistFiles files = load_mnist_binary(config.data_dir);
    PreparedMnist out;
    out.full_train_size = files.train.size();
    out.pca = pca_fit(files.train.features, config.components);

    std::vector<std::size_t> rows(files.train.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    if (config.desk_scale) rows = stratified_subset(files.train.labels, config.subset_size, config.subset_seed);

    const Eigen::MatrixXd train_all = pca_transform(out.pca, files.train.features);
    Eigen::MatrixXd train_used(static_cast<Eigen::Index>(rows.size()), train_all.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        train_used.row(static_cast<Eigen::Index>(r)) = train_all.row(static_cast<Eigen::Index>(rows[r]));
        out.train_labels.push_back(files.train.labels[rows[r]]);
    }
    const Eigen::MatrixXd test_feats = pca_transform(out.pca, files.test.features);
    const ScaledPair scaled = scale_features(train_used, test_feats);
    out.scale = scaled.scale;
    out.test_labels = files.test.labels;

    const auto to_samples = [](const Eigen::MatrixXd& m, const std::vector<std::uint8_t>& labels) {
        std::vector<Sample> s(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const auto row = m.row(static_cast<Eigen::Index>(i));
            s[i].x.resize(static_cast<std::size_t>(m.cols()));
            for (Eigen::Index c = 0; c < m.cols(); ++c) s[i].x[static_cast<std::size_t>(c)] = row(c);
            s[i].y = labels[i];
        }
        return s;
    };
    out.train = to_samples(scaled.train, out.train_labels);
    out.test = to_samples(scaled.test, out.test_labels);
    return out;
}

std::vector<Prediction> predict(const ModelSpec& model, std::span<const double> params,
                                std::span<const Sample> data, double epsilon, int threads) {
    std::vector<Prediction> out(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        out[i] = classify(residual_expectation_direct(model, data[i].x, params), epsilon);
    });
    return out;
}

MnistReport run_mnist_experiment(const QcnnSpec& spec, const PreparedMnist& data, const StepCallback& on_step) {
    if (spec.repetitions < 1) throw ValidationError("repetitions must be positive");
    if (data.train.empty() || data.test.empty()) throw ValidationError("MNIST splits are empty");
    const ModelSpec model = build_qcnn(spec);

    MnistReport report;
    report.spec = spec;
    report.trainable_count = model.n_trainable;
    report.train_size = data.train.size();
    report.test_size = data.test.size();

    TrainConfig cfg;
    cfg.learning_rate = spec.learning_rate;
    cfg.max_steps = spec.iterations;
    cfg.batch_fraction = 1.0;
    cfg.convergence_window = 10;
    cfg.convergence_variance = 0.0;  // fixed iteration budget
    cfg.gradient_mode = GradientMode::Mixed;
    cfg.threads = spec.threads;

    const auto count_unclassifiable = [](const std::vector<Prediction>& p) {
        return static_cast<std::size_t>(
            std::count_if(p.begin(), p.end(), [](const Prediction& x) { return x.label == Label::Unclassifiable; }));
    };

    for (int r = 0; r < spec.repetitions; ++r) {
        cfg.seed = spec.base_seed + static_cast<std::uint64_t>(r);
        const TrainResult res = train(model, cfg, data.train, LossKind::AbsMse, std::nullopt, on_step);
        RepetitionRecord rec;
        rec.seed = cfg.seed;
        rec.cost_curve = res.loss_history;
        rec.params = res.best_params;
        const auto train_pred = predict(model, res.best_params, data.train, spec.epsilon, spec.threads);
        const auto test_pred = predict(model, res.best_params, data.test, spec.epsilon, spec.threads);
        rec.train_accuracy = accuracy(train_pred, data.train_labels);
        rec.test_accuracy = accuracy(test_pred, data.test_labels);
        rec.train_unclassifiable = count_unclassifiable(train_pred);
        rec.test_unclassifiable = count_unclassifiable(test_pred);
        report.repetitions.push_back(std::move(rec));
    }

    const double n = static_cast<double>(report.repetitions.size());
    std::size_t longest = 0;
    for (const auto& rec : report.repetitions) {
        report.mean_train_accuracy += rec.train_accuracy / n;
        report.mean_test_accuracy += rec.test_accuracy / n;
        longest = std::max(longest, rec.cost_curve.size());
    }
    report.mean_cost_curve.assign(longest, 0.0);
    for (std::size_t s = 0; s < longest; ++s) {
        for (const auto& rec : report.repetitions) {
            // runs that stopped early hold their last value
            const double v = s < rec.cost_curve.size() ? rec.cost_curve[s] : rec.cost_curve.back();
            report.mean_cost_curve[s] += v / n;
        }
    }
    return report;
}

}  // namespace qresnet
