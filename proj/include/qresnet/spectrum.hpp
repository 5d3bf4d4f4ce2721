#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qresnet/circuit.hpp"

namespace qresnet {

inline constexpr double kFrequencyTolerance = 1e-9;

/// Eigenvalues of an encoding generator H in U(x) = exp(i H x).
struct GeneratorSpec {
    std::vector<double> eigenvalues;
    std::string label;
};

/// <l1, l2>: +-(sum of l1 eigenvalues - sum of l2 eigenvalues).
struct FrequencyForm {
    int l1 = 0;
    int l2 = 0;
    auto operator<=>(const FrequencyForm&) const = default;
};

struct Spectrum {
    /// Sorted ascending, deduplicated within kFrequencyTolerance.
    std::vector<double> frequencies;
    std::set<FrequencyForm> forms;

    bool contains(double w, double tol = kFrequencyTolerance) const;
    /// Non-negative part, ascending.
    std::vector<double> non_negative() const;
};

/// All (w_j1 + ... + w_jl) - (w_k1 + ... + w_kl). Throws CapacityError when
/// d^l exceeds 10^6.
Spectrum traditional_spectrum(const GeneratorSpec& gen, int l);

/// {<a, b> : ceil(l/2) <= a <= l, b <= a, a + b >= l}
std::set<FrequencyForm> residual_forms(int l);

/// (ceil(l/2) + 1)(floor(l/2) + 1)
std::int64_t form_count(int l);

/// Union over residual_forms(l) of the +- closed form values.
Spectrum residual_spectrum(const GeneratorSpec& gen, int l);

/// True iff some |w_k| is not among the pairwise differences |w_j - w_l|.
bool enrichment_condition(const GeneratorSpec& gen);

struct CoefficientFit {
    /// c_w for every non-negative candidate frequency; c_{-w} = conj(c_w).
    std::map<double, std::complex<double>> coefficients;
    /// Root-mean-square residual of the fit over the grid.
    double residual_rms = 0.0;
    double condition_estimate = 0.0;
};

/// Least-squares fit of f(x) = sum_w c_w e^{iwx} over `grid`. Candidate
/// frequencies are taken by absolute value (the series is real). Throws
/// ConditioningError when the normal matrix is too ill-conditioned.
CoefficientFit extract_coefficients(const std::function<double(double)>& evaluate,
                                    std::span<const double> candidate_freqs, std::span<const double> grid);

/// Uniform grid over one period of the frequency lattice (2pi times the
/// smallest q with every q*w integral), 4x the unknown count.
std::vector<double> default_grid(std::span<const double> candidate_freqs);

/// Per-frequency coefficient samples from random parameter draws of a
/// single-feature model. `frequencies` lists the non-negative candidates.
struct CoefficientCloud {
    std::vector<double> frequencies;
    /// samples[k][s] is c_{frequencies[k]} of sample s.
    std::vector<std::vector<std::complex<double>>> samples;
};

CoefficientCloud sample_coefficient_cloud(const ModelSpec& model, std::span<const double> frequencies,
                                          std::size_t n_samples, std::uint64_t seed, int threads = 1);

}  // namespace qresnet
