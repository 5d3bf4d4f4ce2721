#include "qresnet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "qresnet/dataio.hpp"
#include "qresnet/errors.hpp"
#include "qresnet/experiments.hpp"
#include "qresnet/expressibility.hpp"
#include "qresnet/qcnn.hpp"
#include "qresnet/residual.hpp"
#include "qresnet/rng.hpp"
#include "qresnet/spectrum.hpp"

namespace qresnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

const std::vector<std::string> kCommands = {"spectrum", "fit", "coeff-cloud", "expressibility", "mnist", "gradcheck"};

struct MalformedConfig : Error {
    using Error::Error;
};

struct Options {
    std::string command;
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string eigenvalues;
    std::optional<std::uint64_t> seed;
    std::optional<int> layers;
    bool residual = false;
    bool desk_scale = false;
    int threads = 1;
    int log_every = 0;
};

// Everything a command produces besides its files.
struct Outcome {
    json report;
    json effective_config;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> files;
    int status = kOk;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw MalformedConfig("cannot read config file '" + path + "'");
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw MalformedConfig("config file '" + path + "' must hold a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw MalformedConfig("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

template <class T>
T field(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw MalformedConfig(std::string("config field '") + key + "' has the wrong type");
    }
}

double clean(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

json frequency_array(const std::vector<double>& f) {
    json a = json::array();
    for (double w : f) a.push_back(clean(w));
    return a;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ValidationError("'" + item + "' is not a number");
        }
        if (item.find_first_not_of(" \t", used) != std::string::npos)
            throw ValidationError("'" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty number list");
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

std::string csv_number(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

StepCallback step_logger(const Options& opt, std::string label) {
    if (opt.log_every <= 0) return {};
    return [every = opt.log_every, label = std::move(label)](int step, double loss) {
        if (step % every == 0) std::cerr << "[" << label << "] step " << step << " loss " << loss << "\n";
    };
}

json model_entry_defaults(const json& m, std::size_t i) {
    json out;
    out["name"] = field<std::string>(m, "name", "model" + std::to_string(i));
    out["encoding"] = field<std::string>(m, "encoding", "traditional");
    out["layers"] = field<int>(m, "layers", 1);
    out["layout"] = field<std::string>(m, "layout", "sequential");
    return out;
}

ModelSpec model_from_entry(const json& e) {
    return build_regression_model(parse_residual_kind(e["encoding"].get<std::string>()),
                                  e["layers"].get<int>(), parse_layout(e["layout"].get<std::string>()));
}

json models_section(const json& cfg) {
    if (!cfg.contains("models")) throw ValidationError("config needs a 'models' array");
    if (!cfg["models"].is_array()) throw MalformedConfig("config field 'models' must be an array");
    json out = json::array();
    for (std::size_t i = 0; i < cfg["models"].size(); ++i) out.push_back(model_entry_defaults(cfg["models"][i], i));
    if (out.empty()) throw ValidationError("'models' is empty");
    return out;
}

// ---------------------------------------------------------------- spectrum

Outcome cmd_spectrum(const Options& opt, const json& cfg) {
    std::vector<double> eig = field<std::vector<double>>(cfg, "eigenvalues", {0.5, -0.5});
    if (!opt.eigenvalues.empty()) eig = parse_number_list(opt.eigenvalues);
    const int layers = opt.layers.value_or(field<int>(cfg, "layers", 1));
    const bool residual = opt.residual || field<bool>(cfg, "residual", false);
    if (layers < 1) throw ValidationError("layers must be at least 1");

    const GeneratorSpec gen{eig, ""};
    const Spectrum s = residual ? residual_spectrum(gen, layers) : traditional_spectrum(gen, layers);

    Outcome o;
    o.effective_config = {{"eigenvalues", eig}, {"layers", layers}, {"residual", residual}};
    o.report["eigenvalues"] = eig;
    o.report["layers"] = layers;
    o.report["residual"] = residual;
    o.report["frequencies"] = frequency_array(s.frequencies);
    o.report["frequency_count"] = s.frequencies.size();
    if (residual) {
        json forms = json::array();
        for (const auto& f : residual_forms(layers)) forms.push_back({f.l1, f.l2});
        o.report["forms"] = forms;
        o.report["form_count"] = form_count(layers);
        o.report["enrichment_condition"] = enrichment_condition(gen);
    }
    return o;
}

// ---------------------------------------------------------------- fit

void apply_train_overrides(TrainConfig& t, const json& j) {
    t.learning_rate = field<double>(j, "learning_rate", t.learning_rate);
    t.max_steps = field<int>(j, "max_steps", t.max_steps);
    t.batch_fraction = field<double>(j, "batch_fraction", t.batch_fraction);
    t.convergence_window = field<int>(j, "convergence_window", t.convergence_window);
    t.convergence_variance = field<double>(j, "convergence_variance", t.convergence_variance);
    const std::string mode = field<std::string>(j, "gradient", "");
    if (mode == "mixed") t.gradient_mode = GradientMode::Mixed;
    else if (mode == "parameter-shift") t.gradient_mode = GradientMode::ParameterShift;
    else if (mode == "finite-difference") t.gradient_mode = GradientMode::FiniteDifference;
    else if (!mode.empty()) throw ValidationError("unknown gradient mode '" + mode + "'");
}

json train_json(const TrainConfig& t) {
    const char* mode = t.gradient_mode == GradientMode::Mixed            ? "mixed"
                       : t.gradient_mode == GradientMode::ParameterShift ? "parameter-shift"
                                                                         : "finite-difference";
    return {{"learning_rate", t.learning_rate},           {"max_steps", t.max_steps},
            {"batch_fraction", t.batch_fraction},         {"convergence_window", t.convergence_window},
            {"convergence_variance", t.convergence_variance}, {"gradient", mode}};
}

Outcome cmd_fit(const Options& opt, const json& cfg, const fs::path& out) {
    if (!cfg.contains("runs") || !cfg["runs"].is_array() || cfg["runs"].empty())
        throw ValidationError("fit config needs a non-empty 'runs' array");
    const std::uint64_t seed = opt.seed.value_or(field<std::uint64_t>(cfg, "seed", 0));
    const int reps = field<int>(cfg, "repetitions", 5);
    const auto points = field<std::size_t>(cfg, "grid_points", 70);
    TrainConfig base;
    base.threads = opt.threads;
    if (cfg.contains("train")) apply_train_overrides(base, cfg["train"]);
    const auto targets = make_targets();

    Outcome o;
    o.effective_config = {{"seed", seed}, {"repetitions", reps}, {"grid_points", points}, {"train", train_json(base)}};
    json runs_cfg = json::array();
    json runs = json::array();
    for (std::size_t i = 0; i < cfg["runs"].size(); ++i) {
        const json& r = cfg["runs"][i];
        ExperimentSpec spec;
        spec.name = field<std::string>(r, "name", "run" + std::to_string(i));
        spec.encoding = parse_residual_kind(field<std::string>(r, "encoding", "traditional"));
        spec.layers = field<int>(r, "layers", 1);
        spec.layout = parse_layout(field<std::string>(r, "layout", "sequential"));
        const std::string target = field<std::string>(r, "target", "");
        const auto t = targets.find(target);
        if (t == targets.end()) throw ValidationError("unknown target '" + target + "'");
        spec.target = t->second;
        spec.train = base;
        if (r.contains("train")) apply_train_overrides(spec.train, r["train"]);
        spec.repetitions = reps;
        spec.base_seed = seed;
        spec.grid_points = points;

        runs_cfg.push_back({{"name", spec.name},
                            {"encoding", residual_kind_name(spec.encoding)},
                            {"layers", spec.layers},
                            {"layout", layout_name(spec.layout)},
                            {"target", target},
                            {"train", train_json(spec.train)}});

        const FitReport rep = run_fit(spec, step_logger(opt, spec.name));

        json j;
        j["name"] = spec.name;
        j["encoding"] = residual_kind_name(spec.encoding);
        j["layers"] = spec.layers;
        j["layout"] = layout_name(spec.layout);
        j["target"] = target;
        j["trainable_count"] = rep.trainable_count;
        json seeds = json::array(), finals = json::array(), steps = json::array(), conv = json::array();
        for (const auto& run : rep.runs) {
            seeds.push_back(run.seed);
            finals.push_back(run.final_mse);
            steps.push_back(run.result.steps);
            conv.push_back(run.result.converged);
            o.seeds.push_back(run.seed);
        }
        j["seeds"] = seeds;
        j["final_mse"] = finals;
        j["steps"] = steps;
        j["converged"] = conv;
        j["best_seed"] = rep.runs[rep.best_run].seed;
        j["best_mse"] = rep.best_mse;
        j["median_mse"] = rep.median_mse;
        j["best_params"] = rep.runs[rep.best_run].result.best_params;
        j["analytic_frequencies"] = frequency_array(rep.analytic_frequencies);
        json coeffs = json::array();
        for (const auto& [w, c] : rep.coefficients) {
            std::complex<double> want{0.0, 0.0};
            for (const auto& term : spec.target.terms)
                if (std::abs(term.frequency - w) < kFrequencyTolerance) want = term.amplitude;
            coeffs.push_back({{"frequency", clean(w)},
                              {"re", c.real()},
                              {"im", c.imag()},
                              {"target_re", want.real()},
                              {"target_im", want.imag()}});
        }
        j["coefficients"] = coeffs;
        runs.push_back(j);

        std::string curve = "x,target,prediction\n";
        for (const auto& p : rep.curve)
            curve += csv_number(p.x) + "," + csv_number(p.target) + "," + csv_number(p.prediction) + "\n";
        write_text(out / (spec.name + "_curve.csv"), curve);
        o.files.push_back(spec.name + "_curve.csv");

        std::size_t longest = 0;
        for (const auto& run : rep.runs) longest = std::max(longest, run.result.loss_history.size());
        std::string loss = "step";
        for (const auto& run : rep.runs) loss += ",seed_" + std::to_string(run.seed);
        loss += "\n";
        for (std::size_t s = 0; s < longest; ++s) {
            loss += std::to_string(s + 1);
            for (const auto& run : rep.runs) {
                loss += ",";
                if (s < run.result.loss_history.size()) loss += csv_number(run.result.loss_history[s]);
            }
            loss += "\n";
        }
        write_text(out / (spec.name + "_loss.csv"), loss);
        o.files.push_back(spec.name + "_loss.csv");
    }
    o.effective_config["runs"] = runs_cfg;
    o.report["runs"] = runs;
    return o;
}

// ---------------------------------------------------------------- coeff-cloud

Outcome cmd_coeff_cloud(const Options& opt, const json& cfg, const fs::path& out) {
    const std::uint64_t seed = opt.seed.value_or(field<std::uint64_t>(cfg, "seed", 0));
    const auto samples = field<std::size_t>(cfg, "samples", 1000);
    const std::vector<double> freqs = field<std::vector<double>>(cfg, "frequencies", {0.0, 0.5, 1.0});
    if (samples < 2) throw ValidationError("need at least two samples");
    const json models = models_section(cfg);

    Outcome o;
    o.effective_config = {{"seed", seed}, {"samples", samples}, {"frequencies", freqs}, {"models", models}};
    o.seeds.push_back(seed);
    json rows = json::array();
    for (const json& m : models) {
        const ModelSpec model = model_from_entry(m);
        const CoefficientCloud cloud = sample_coefficient_cloud(model, freqs, samples, seed, opt.threads);
        json stats = json::array();
        std::string csv = "sample,frequency,re,im\n";
        for (std::size_t k = 0; k < cloud.frequencies.size(); ++k) {
            const auto& c = cloud.samples[k];
            const double n = static_cast<double>(c.size());
            double mr = 0, mi = 0, maxmod = 0;
            for (const auto& z : c) {
                mr += z.real() / n;
                mi += z.imag() / n;
                maxmod = std::max(maxmod, std::abs(z));
            }
            double vr = 0, vi = 0;
            for (const auto& z : c) {
                vr += (z.real() - mr) * (z.real() - mr) / (n - 1);
                vi += (z.imag() - mi) * (z.imag() - mi) / (n - 1);
            }
            stats.push_back({{"frequency", clean(cloud.frequencies[k])},
                             {"mean_re", mr},
                             {"mean_im", mi},
                             {"var_re", vr},
                             {"var_im", vi},
                             {"max_modulus", maxmod}});
            for (std::size_t s = 0; s < c.size(); ++s)
                csv += std::to_string(s) + "," + csv_number(clean(cloud.frequencies[k])) + "," +
                       csv_number(c[s].real()) + "," + csv_number(c[s].imag()) + "\n";
        }
        json row = m;
        row["trainable_count"] = model.n_trainable;
        row["coefficients"] = stats;
        rows.push_back(row);
        const std::string name = m["name"].get<std::string>() + "_cloud.csv";
        write_text(out / name, csv);
        o.files.push_back(name);
    }
    o.report["seed"] = seed;
    o.report["samples"] = samples;
    o.report["models"] = rows;
    return o;
}

// ---------------------------------------------------------------- expressibility

Outcome cmd_expressibility(const Options& opt, const json& cfg, const fs::path& out) {
    const std::uint64_t seed = opt.seed.value_or(field<std::uint64_t>(cfg, "seed", 0));
    const auto pairs = field<std::size_t>(cfg, "pairs", 1000);
    const int bins = field<int>(cfg, "bins", kDefaultFidelityBins);
    const double x = field<double>(cfg, "x", 1.0);
    if (pairs < 1) throw ValidationError("need at least one pair");
    if (bins < 2) throw ValidationError("need at least two bins");
    const json models = models_section(cfg);

    Outcome o;
    o.effective_config = {{"seed", seed}, {"pairs", pairs}, {"bins", bins}, {"x", x}, {"models", models}};
    o.seeds.push_back(seed);
    json rows = json::array();
    for (const json& m : models) {
        const ModelSpec model = model_from_entry(m);
        const int dim = 1 << model.n_qubits;
        const auto fids = sample_fidelities(model, pairs, seed, x, opt.threads);
        const double kl = kl_expressibility(fids, bins, dim);
        json row = m;
        row["dimension"] = dim;
        row["kl_divergence"] = kl;
        rows.push_back(row);

        const auto hist = FidelityHistogram::build(fids, bins);
        const auto p = hist.probabilities();
        std::string csv = "bin_lo,bin_hi,p_model,p_haar\n";
        for (int b = 0; b < bins; ++b) {
            const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
            csv += csv_number(lo) + "," + csv_number(hi) + "," + csv_number(p[static_cast<std::size_t>(b)]) + "," +
                   csv_number(haar_bin_mass(lo, hi, dim)) + "\n";
        }
        const std::string name = m["name"].get<std::string>() + "_fidelity.csv";
        write_text(out / name, csv);
        o.files.push_back(name);
    }
    o.report["seed"] = seed;
    o.report["pairs"] = pairs;
    o.report["bins"] = bins;
    o.report["x"] = x;
    o.report["models"] = rows;
    return o;
}

// ---------------------------------------------------------------- mnist

Outcome cmd_mnist(const Options& opt, const json& cfg, const fs::path& out) {
    const std::uint64_t seed = opt.seed.value_or(field<std::uint64_t>(cfg, "seed", 0));
    const bool desk = opt.desk_scale || field<bool>(cfg, "desk_scale", false);
    const int reps = desk ? field<int>(cfg, "desk_repetitions", 5) : field<int>(cfg, "repetitions", 20);

    MnistDataConfig data_cfg;
    data_cfg.data_dir = resolve_data_dir(opt.data_dir.empty() ? field<std::string>(cfg, "data_dir", "") : opt.data_dir);
    if (data_cfg.data_dir.empty())
        throw IoError("no MNIST directory: pass --data-dir or set QRESNET_DATA_DIR");
    data_cfg.desk_scale = desk;
    data_cfg.subset_size = field<std::size_t>(cfg, "subset_size", 2000);
    data_cfg.components = field<int>(cfg, "components", 4);
    data_cfg.subset_seed = field<std::uint64_t>(cfg, "subset_seed", seed);

    QcnnSpec base;
    base.epsilon = field<double>(cfg, "epsilon", base.epsilon);
    base.learning_rate = field<double>(cfg, "learning_rate", base.learning_rate);
    base.iterations = field<int>(cfg, "iterations", base.iterations);
    base.repetitions = reps;
    base.base_seed = seed;
    base.threads = opt.threads;

    json variants = json::array();
    if (cfg.contains("variants")) {
        if (!cfg["variants"].is_array()) throw MalformedConfig("config field 'variants' must be an array");
        for (std::size_t i = 0; i < cfg["variants"].size(); ++i) {
            const json& v = cfg["variants"][i];
            variants.push_back({{"name", field<std::string>(v, "name", "variant" + std::to_string(i))},
                                {"residual_qubits", field<std::vector<int>>(v, "residual_qubits", {})}});
        }
    } else {
        variants = json::array({{{"name", "traditional"}, {"residual_qubits", json::array()}},
                                {{"name", "residual_q0q2"}, {"residual_qubits", {0, 2}}}});
    }

    Outcome o;
    o.effective_config = {{"seed", seed},
                          {"desk_scale", desk},
                          {"repetitions", reps},
                          {"subset_size", data_cfg.subset_size},
                          {"subset_seed", data_cfg.subset_seed},
                          {"components", data_cfg.components},
                          {"epsilon", base.epsilon},
                          {"learning_rate", base.learning_rate},
                          {"iterations", base.iterations},
                          {"variants", variants}};

    const PreparedMnist data = prepare_mnist(data_cfg);
    {
        const auto to_matrix = [](const std::vector<Sample>& s) {
            Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.front().x.size()));
            for (std::size_t i = 0; i < s.size(); ++i)
                for (std::size_t c = 0; c < s[i].x.size(); ++c)
                    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = s[i].x[c];
            return m;
        };
        write_feature_cache(out / "train_features.qrnf", to_matrix(data.train), data.train_labels);
        write_feature_cache(out / "test_features.qrnf", to_matrix(data.test), data.test_labels);
        o.files.push_back("train_features.qrnf");
        o.files.push_back("test_features.qrnf");
    }

    json rows = json::array();
    for (const json& v : variants) {
        QcnnSpec spec = base;
        spec.residual_qubits = v["residual_qubits"].get<std::vector<int>>();
        const std::string name = v["name"].get<std::string>();
        const MnistReport rep = run_mnist_experiment(spec, data, step_logger(opt, name));

        json row = v;
        row["trainable_count"] = rep.trainable_count;
        row["train_size"] = rep.train_size;
        row["test_size"] = rep.test_size;
        row["mean_train_accuracy"] = rep.mean_train_accuracy;
        row["mean_test_accuracy"] = rep.mean_test_accuracy;
        json reps_json = json::array();
        for (const auto& r : rep.repetitions) {
            reps_json.push_back({{"seed", r.seed},
                                 {"train_accuracy", r.train_accuracy},
                                 {"test_accuracy", r.test_accuracy},
                                 {"train_unclassifiable", r.train_unclassifiable},
                                 {"test_unclassifiable", r.test_unclassifiable},
                                 {"final_cost", r.cost_curve.empty() ? 0.0 : r.cost_curve.back()},
                                 {"params", r.params}});
        }
        row["repetitions"] = reps_json;
        rows.push_back(row);

        std::string csv = "step,mean";
        for (const auto& r : rep.repetitions) csv += ",seed_" + std::to_string(r.seed);
        csv += "\n";
        for (std::size_t s = 0; s < rep.mean_cost_curve.size(); ++s) {
            csv += std::to_string(s + 1) + "," + csv_number(rep.mean_cost_curve[s]);
            for (const auto& r : rep.repetitions) {
                csv += ",";
                if (s < r.cost_curve.size()) csv += csv_number(r.cost_curve[s]);
            }
            csv += "\n";
        }
        write_text(out / (name + "_cost.csv"), csv);
        o.files.push_back(name + "_cost.csv");
    }
    for (int r = 0; r < reps; ++r) o.seeds.push_back(seed + static_cast<std::uint64_t>(r));

    o.report["full_train_size"] = data.full_train_size;
    o.report["train_size"] = data.train.size();
    o.report["test_size"] = data.test.size();
    o.report["explained_variance"] =
        std::vector<double>(data.pca.explained_variance.data(),
                            data.pca.explained_variance.data() + data.pca.explained_variance.size());
    o.report["variants"] = rows;
    return o;
}

// ---------------------------------------------------------------- gradcheck

Outcome cmd_gradcheck(const Options& opt, const json& cfg) {
    const std::uint64_t seed = opt.seed.value_or(field<std::uint64_t>(cfg, "seed", 0));
    const double tol = field<double>(cfg, "tolerance", 1e-6);

    std::vector<std::pair<std::string, ModelSpec>> models;
    for (ResidualKind k : {ResidualKind::Traditional, ResidualKind::R, ResidualKind::R1, ResidualKind::R2})
        for (int l : {1, 2})
            models.emplace_back(std::string(residual_kind_name(k)) + "_sequential_l" + std::to_string(l),
                                build_regression_model(k, l, Layout::Sequential));
    models.emplace_back("traditional_parallel_l2", build_regression_model(ResidualKind::Traditional, 2, Layout::Parallel));
    models.emplace_back("R2_parallel_l2", build_regression_model(ResidualKind::R2, 2, Layout::Parallel));
    QcnnSpec q;
    models.emplace_back("qcnn_traditional", build_qcnn(q));
    q.residual_qubits = {0, 2};
    models.emplace_back("qcnn_residual_q0q2", build_qcnn(q));

    Outcome o;
    o.effective_config = {{"seed", seed}, {"tolerance", tol}};
    o.seeds.push_back(seed);
    double worst = 0.0;
    json rows = json::array();
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& [name, model] = models[i];
        const std::uint64_t s = derive_seed(seed, i);
        const std::vector<double> theta = initial_parameters(model, s);
        Rng rng(derive_seed(s, 0x78));
        std::vector<double> x(model.n_features);
        for (double& v : x) v = rng.uniform(0.0, 4.0 * std::numbers::pi);
        double model_worst = 0.0;
        std::size_t eligible = 0;
        for (std::size_t j = 0; j < model.n_trainable; ++j) {
            const auto ps = parameter_shift_grad(model, theta, x, j);
            if (!ps) continue;
            ++eligible;
            model_worst = std::max(model_worst, std::abs(*ps - finite_difference_grad(model, theta, x, j)));
        }
        worst = std::max(worst, model_worst);
        rows.push_back({{"name", name},
                        {"trainable_count", model.n_trainable},
                        {"shift_eligible", eligible},
                        {"max_abs_diff", model_worst}});
    }
    o.report["seed"] = seed;
    o.report["tolerance"] = tol;
    o.report["models"] = rows;
    o.report["max_abs_diff"] = worst;
    o.report["pass"] = worst <= tol;
    std::cout << "max |parameter-shift - finite-diff| = " << std::setprecision(3) << std::scientific << worst
              << (worst <= tol ? " (ok)" : " (exceeds tolerance)") << "\n";
    o.status = worst <= tol ? kOk : kValidation;
    return o;
}

int dispatch(const Options& opt) {
    const json cfg = load_config(opt.config_path);
    if (opt.threads < 1) throw ValidationError("--threads must be at least 1");
    const fs::path out = opt.out_dir.empty() ? fs::path("results") / opt.command : fs::path(opt.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error("cannot create output directory " + out.string() + ": " + ec.message());

    Outcome o;
    if (opt.command == "spectrum") o = cmd_spectrum(opt, cfg);
    else if (opt.command == "fit") o = cmd_fit(opt, cfg, out);
    else if (opt.command == "coeff-cloud") o = cmd_coeff_cloud(opt, cfg, out);
    else if (opt.command == "expressibility") o = cmd_expressibility(opt, cfg, out);
    else if (opt.command == "mnist") o = cmd_mnist(opt, cfg, out);
    else o = cmd_gradcheck(opt, cfg);

    json report;
    report["command"] = opt.command;
    report["config"] = o.effective_config;
    for (auto& [k, v] : o.report.items()) report[k] = v;
    const std::string report_text = report.dump(2) + "\n";
    write_text(out / "report.json", report_text);
    if (opt.command == "spectrum") std::cout << report_text;

    const std::string canonical = opt.command + "\n" + o.effective_config.dump();
    json manifest;
    manifest["command"] = opt.command;
    manifest["config_file"] = opt.config_path;
    manifest["config_hash"] = hex64(fnv1a(canonical));
    manifest["seeds"] = o.seeds;
    manifest["threads"] = opt.threads;
    manifest["versions"] = {{"qresnet", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)}};
    manifest["timestamp"] = timestamp_utc();
    o.files.insert(o.files.begin(), "report.json");
    manifest["outputs"] = o.files;
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    return o.status;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Statevector simulation of quantum residual networks"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // unknown commands get their own exit code, so check before CLI11 does
    if (argc > 1) {
        const std::string first = argv[1];
        if (!first.empty() && first[0] != '-' &&
            std::find(kCommands.begin(), kCommands.end(), first) == kCommands.end()) {
            std::cerr << "error: unknown command '" << first << "' (expected one of:";
            for (const auto& c : kCommands) std::cerr << " " << c;
            std::cerr << ")\n";
            return kUnknownCommand;
        }
    }

    Options opt;
    const std::map<std::string, std::string> help = {
        {"spectrum", "Frequency spectrum of l encoding layers"},
        {"fit", "Train regression models on Fourier-series targets"},
        {"coeff-cloud", "Sample Fourier coefficients over random parameters"},
        {"expressibility", "KL divergence of fidelity distributions against Haar"},
        {"mnist", "QCNN classification of MNIST digits 0 and 1"},
        {"gradcheck", "Compare parameter-shift and finite-difference gradients"}};
    for (const auto& name : kCommands) {
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", opt.config_path, "JSON config file");
        sub->add_option("--out", opt.out_dir, "Output directory (default results/<command>)");
        sub->add_option("--seed", opt.seed, "Seed override");
        sub->add_option("--threads", opt.threads, "Worker thread cap")->default_val(1);
        sub->add_option("--log-every", opt.log_every, "Print the loss every N steps to stderr");
        if (name == "spectrum") {
            sub->add_option("--eigenvalues", opt.eigenvalues, "Comma-separated generator eigenvalues");
            sub->add_option("--layers", opt.layers, "Number of encoding layers");
            sub->add_flag("--residual", opt.residual, "Residual encoding");
        }
        if (name == "mnist") {
            sub->add_flag("--desk-scale", opt.desk_scale, "Stratified training subset and fewer repetitions");
            sub->add_option("--data-dir", opt.data_dir, "Directory with the MNIST IDX files");
        }
        sub->callback([&opt, name] { opt.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        return dispatch(opt);
    } catch (const MalformedConfig& e) {
        std::cerr << "error: malformed config: " << e.what() << "\n";
        return kMalformedConfig;
    } catch (const IoError& e) {
        std::cerr << "error: missing data: " << e.what() << "\n";
        return kMissingData;
    } catch (const ValidationError& e) {
        std::cerr << "error: invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const DimensionError& e) {
        std::cerr << "error: invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const CapacityError& e) {
        std::cerr << "error: invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const NotApplicableError& e) {
        std::cerr << "error: invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

}  // namespace qresnet::cli
