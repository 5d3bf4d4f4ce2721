#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qresnet/circuit.hpp"
#include "qresnet/spectrum.hpp"
#include "qresnet/train.hpp"

namespace qresnet {

struct FourierTerm {
    double frequency = 0.0;  // >= 0
    std::complex<double> amplitude;
};

/// y(x) = sum_i (a_i e^{i w_i x} + conj(a_i) e^{-i w_i x})
struct FourierTarget {
    std::string name;
    std::vector<FourierTerm> terms;

    double operator()(double x) const;
    /// Same sum in complex arithmetic; the imaginary part is round-off only.
    std::complex<double> evaluate_complex(double x) const;
};

/// y1_omega1, y1_omega2, y2_omega2, y2_omega3.
std::map<std::string, FourierTarget> make_targets();

enum class Layout { Sequential, Parallel };

const char* layout_name(Layout layout);
Layout parse_layout(const std::string& name);

struct ExperimentSpec {
    std::string name;
    ResidualKind encoding = ResidualKind::Traditional;
    int layers = 1;
    Layout layout = Layout::Sequential;
    FourierTarget target;
    TrainConfig train;
    int repetitions = 5;
    std::uint64_t base_seed = 0;
    std::size_t grid_points = 70;
};

/// Single-feature regression model:
///  - sequential: W0 E W1 E ... E Wl on one qubit, with W = Rz Ry Rz and
///    E = Ry(x) (wrapped in the residual operator for residual encodings);
///  - parallel: per qubit W E W, then a ZZ chain and a final W on qubit 0.
/// The observable is Z on qubit 0.
ModelSpec build_regression_model(ResidualKind encoding, int layers, Layout layout);
ModelSpec build_regression_model(const ExperimentSpec& spec);

/// Spectrum of `layers` Ry(x) encodings (generator eigenvalues +-1/2).
Spectrum analytic_spectrum(ResidualKind encoding, int layers);

/// D points uniform on [0, 4pi).
std::vector<Sample> regression_data(const FourierTarget& target, std::size_t points = 70);

struct FitRun {
    std::uint64_t seed = 0;
    TrainResult result;
    double final_mse = 0.0;
};

struct CurvePoint {
    double x = 0.0;
    double target = 0.0;
    double prediction = 0.0;
};

struct FitReport {
    ExperimentSpec spec;
    std::size_t trainable_count = 0;
    std::vector<FitRun> runs;
    std::size_t best_run = 0;
    double best_mse = 0.0;
    double median_mse = 0.0;
    std::vector<CurvePoint> curve;
    std::vector<double> analytic_frequencies;
    std::map<double, std::complex<double>> coefficients;
};

/// Trains `repetitions` models with seeds base_seed, base_seed + 1, ... and
/// reports the best and median full-grid MSE, the best model's curve and its
/// recovered Fourier coefficients.
FitReport run_fit(const ExperimentSpec& spec, const StepCallback& on_step = {});

}  // namespace qresnet
