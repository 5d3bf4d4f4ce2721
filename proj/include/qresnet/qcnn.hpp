#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qresnet/circuit.hpp"
#include "qresnet/dataio.hpp"
#include "qresnet/train.hpp"

namespace qresnet {

inline constexpr std::size_t kQcnnAnsatzParams = 20;

struct QcnnSpec {
    int n_qubits = 4;
    /// Qubits whose Ry(x_i) encoding is wrapped in R2.
    std::vector<int> residual_qubits;
    double epsilon = 0.1;
    double learning_rate = 0.2;
    int iterations = 100;
    int repetitions = 20;
    std::uint64_t base_seed = 0;
    int threads = 1;
};

/// Four-qubit QCNN:
///   encoding   Ry(x_i) on qubit i (R2-wrapped on residual qubits)
///   conv 1     U3(a) on all qubits, ZZ(p) on the ring (0,1),(1,2),(2,3),(3,0), U3(b) on all
///   pool 1     CU3(c) with controls 0, 2 and targets 1, 3
///   conv 2     the same 7-parameter layer on qubits 1, 3
///   pool 2     CU3(d) with control 1 and target 3
/// measured with Z on qubit 3. Parameters 0..19 are the ansatz; each
/// residual qubit appends (alpha, gamma) initialised to (pi/4, -pi/4).
ModelSpec build_qcnn(const QcnnSpec& spec);

/// sum (|<Z>|_i - y_i)^2 / 2D
double qcnn_cost(const ModelSpec& model, std::span<const double> params, std::span<const Sample> data,
                 int threads = 1);

enum class Label { Zero, One, Unclassifiable };

struct Prediction {
    double expectation = 0.0;
    Label label = Label::Unclassifiable;
};

/// 1 when |e| > 1 - eps, 0 when |e| < eps, otherwise unclassifiable.
Prediction classify(double expectation, double epsilon);

/// Unclassifiable predictions count as wrong.
double accuracy(std::span<const Prediction> predictions, std::span<const std::uint8_t> labels);

struct MnistDataConfig {
    std::filesystem::path data_dir;
    bool desk_scale = false;
    std::size_t subset_size = 2000;
    int components = 4;
    std::uint64_t subset_seed = 0;
};

struct PreparedMnist {
    std::vector<Sample> train;
    std::vector<Sample> test;
    std::vector<std::uint8_t> train_labels;
    std::vector<std::uint8_t> test_labels;
    PcaModel pca;
    ScaleRecord scale;
    std::size_t full_train_size = 0;
};

/// Loads digits 0/1, fits PCA on the full training split, optionally keeps a
/// class-stratified training subset, and scales features to [0, pi] on the
/// training rows that are used.
PreparedMnist prepare_mnist(const MnistDataConfig& config);

/// Indices of a class-stratified subset of `size` rows, in original order.
std::vector<std::size_t> stratified_subset(std::span<const std::uint8_t> labels, std::size_t size,
                                           std::uint64_t seed);

struct RepetitionRecord {
    std::uint64_t seed = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t train_unclassifiable = 0;
    std::size_t test_unclassifiable = 0;
    std::vector<double> cost_curve;
    std::vector<double> params;
};

struct MnistReport {
    QcnnSpec spec;
    std::size_t trainable_count = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<RepetitionRecord> repetitions;
    double mean_train_accuracy = 0.0;
    double mean_test_accuracy = 0.0;
    std::vector<double> mean_cost_curve;
};

std::vector<Prediction> predict(const ModelSpec& model, std::span<const double> params,
                                std::span<const Sample> data, double epsilon, int threads = 1);

/// Repetition r trains from seed base_seed + r with random ansatz angles,
/// full-batch Adam for `iterations` steps, then classifies both splits.
MnistReport run_mnist_experiment(const QcnnSpec& spec, const PreparedMnist& data,
                                 const StepCallback& on_step = {});

}  // namespace qresnet
