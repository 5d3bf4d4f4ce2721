#include "qresnet/expressibility.hpp"

#include <algorithm>
#include <cmath>

#include "qresnet/errors.hpp"
#include "qresnet/parallel.hpp"
#include "qresnet/residual.hpp"
#include "qresnet/rng.hpp"

namespace qresnet {

FidelityHistogram FidelityHistogram::build(std::span<const double> fidelities, int bins) {
    if (bins < 2) throw ValidationError("need at least two histogram bins");
    FidelityHistogram h;
    h.bin_count = bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double f : fidelities) {
        if (!(f >= 0.0 && f <= 1.0 + 1e-12)) throw ValidationError("fidelity outside [0, 1]");
        const auto b = std::min(bins - 1, static_cast<int>(std::floor(f * bins)));
        ++h.counts[static_cast<std::size_t>(b)];
    }
    h.total = fidelities.size();
    return h;
}

std::vector<double> FidelityHistogram::probabilities() const {
    std::vector<double> p(counts.size(), 0.0);
    if (total == 0) return p;
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return p;
}

double haar_pdf(double fidelity, int dimension) {
    if (dimension < 2) throw ValidationError("Hilbert-space dimension must be at least 2");
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw ValidationError("fidelity outside [0, 1]");
    return (dimension - 1) * std::pow(1.0 - fidelity, dimension - 2);
}

double haar_bin_mass(double lo, double hi, int dimension) {
    if (dimension < 2) throw ValidationError("Hilbert-space dimension must be at least 2");
    const auto survival = [&](double f) { return std::pow(1.0 - f, dimension - 1); };
    return survival(lo) - survival(hi);
}

std::vector<double> sample_fidelities(const ModelSpec& model, std::size_t n_pairs, std::uint64_t seed, double x,
                                      int threads) {
    if (n_pairs < 1) throw ValidationError("need at least one parameter pair");
    std::vector<double> out(n_pairs);
    const std::vector<double> features(std::max<std::size_t>(model.n_features, 1), x);
    parallel_for(n_pairs, threads, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        std::vector<double> a(model.n_trainable), b(model.n_trainable);
        for (double& p : a) p = rng.angle();
        for (double& p : b) p = rng.angle();
        out[i] = fidelity(model_state(model, features, a), model_state(model, features, b));
    });
    return out;
}

double kl_expressibility(std::span<const double> fidelities, int bins, int dimension) {
    if (fidelities.empty()) throw ValidationError("no fidelities to compare");
    const auto hist = FidelityHistogram::build(fidelities, bins);
    const auto p = hist.probabilities();
    double kl = 0.0;
    for (int j = 0; j < bins; ++j) {
        const double pf = p[static_cast<std::size_t>(j)];
        if (pf == 0.0) continue;
        const double q = haar_bin_mass(static_cast<double>(j) / bins, static_cast<double>(j + 1) / bins, dimension);
        if (!(q > 0.0)) throw ValidationError("Haar bin mass vanished where the sample has mass");
        kl += pf * std::log(pf / q);
    }
    return std::max(0.0, kl);
}

}  // namespace qresnet
