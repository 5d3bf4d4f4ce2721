#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qresnet/circuit.hpp"

namespace qresnet {

inline constexpr int kDefaultFidelityBins = 45;

struct FidelityHistogram {
    int bin_count = 0;
    std::vector<std::size_t> counts;
    std::size_t total = 0;

    /// Uniform bins on [0, 1]; F = 1 falls in the last bin.
    static FidelityHistogram build(std::span<const double> fidelities, int bins);
    std::vector<double> probabilities() const;
};

/// (N - 1)(1 - F)^(N - 2), the fidelity density of Haar-random states in dimension N.
double haar_pdf(double fidelity, int dimension);

/// Haar probability mass of [lo, hi], from the CDF 1 - (1 - F)^(N - 1).
double haar_bin_mass(double lo, double hi, int dimension);

/// Fidelities between model states at two independent uniform parameter
/// draws, with the feature fixed at `x`. Residual models are read through
/// the normalised ancilla-projected system state.
std::vector<double> sample_fidelities(const ModelSpec& model, std::size_t n_pairs, std::uint64_t seed, double x,
                                      int threads = 1);

/// sum_j P_F(j) log(P_F(j) / P_Haar(j)) over `bins` uniform bins.
double kl_expressibility(std::span<const double> fidelities, int bins, int dimension);

}  // namespace qresnet
