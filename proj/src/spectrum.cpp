#include "qresnet/spectrum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qresnet/errors.hpp"
#include "qresnet/parallel.hpp"
#include "qresnet/residual.hpp"
#include "qresnet/rng.hpp"

namespace qresnet {

namespace {

constexpr double kEnumerationCap = 1e6;
constexpr double kMaxCondition = 1e8;

std::vector<double> dedupe(std::vector<double> v, double tol = kFrequencyTolerance) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double x : v) {
        if (out.empty() || x - out.back() > tol) out.push_back(x);
    }
    // snap float noise around zero
    for (double& x : out)
        if (std::abs(x) <= tol) x = 0.0;
    return out;
}

void check_generator(const GeneratorSpec& gen, int l) {
    if (gen.eigenvalues.empty()) throw ValidationError("generator has no eigenvalues");
    for (double w : gen.eigenvalues)
        if (!std::isfinite(w)) throw ValidationError("generator eigenvalue is not finite");
    if (l < 1) throw ValidationError("layer count must be at least 1");
    if (std::pow(static_cast<double>(gen.eigenvalues.size()), l) > kEnumerationCap) {
        throw CapacityError("d^l exceeds the enumeration cap of 10^6");
    }
}

/// Distinct values of w_j1 + ... + w_jcount.
std::vector<double> sums_of(std::span<const double> eig, int count) {
    std::vector<double> sums{0.0};
    for (int c = 0; c < count; ++c) {
        std::vector<double> next;
        next.reserve(sums.size() * eig.size());
        for (double s : sums)
            for (double w : eig) next.push_back(s + w);
        sums = dedupe(std::move(next));
    }
    return sums;
}

void add_form_values(std::vector<double>& out, std::span<const double> eig, const FrequencyForm& form) {
    const auto a = sums_of(eig, form.l1);
    const auto b = sums_of(eig, form.l2);
    for (double x : a)
        for (double y : b) {
            out.push_back(x - y);
            out.push_back(y - x);
        }
}

std::vector<double> positive_candidates(std::span<const double> freqs) {
    std::vector<double> v;
    v.reserve(freqs.size());
    for (double w : freqs) v.push_back(std::abs(w));
    return dedupe(std::move(v));
}

}  // namespace

bool Spectrum::contains(double w, double tol) const {
    const auto it = std::lower_bound(frequencies.begin(), frequencies.end(), w - tol);
    return it != frequencies.end() && std::abs(*it - w) <= tol;
}

std::vector<double> Spectrum::non_negative() const {
    std::vector<double> out;
    for (double w : frequencies)
        if (w >= 0.0) out.push_back(w);
    return out;
}

Spectrum traditional_spectrum(const GeneratorSpec& gen, int l) {
    check_generator(gen, l);
    std::vector<double> values;
    add_form_values(values, gen.eigenvalues, {l, l});
    return {dedupe(std::move(values)), {{l, l}}};
}

std::set<FrequencyForm> residual_forms(int l) {
    if (l < 1) throw ValidationError("layer count must be at least 1");
    std::set<FrequencyForm> forms;
    for (int a = (l + 1) / 2; a <= l; ++a)
        for (int b = std::max(0, l - a); b <= a; ++b) forms.insert({a, b});
    return forms;
}

std::int64_t form_count(int l) {
    if (l < 1) throw ValidationError("layer count must be at least 1");
    const std::int64_t up = (l + 1) / 2, down = l / 2;
    return (up + 1) * (down + 1);
}

Spectrum residual_spectrum(const GeneratorSpec& gen, int l) {
    check_generator(gen, l);
    Spectrum out;
    out.forms = residual_forms(l);
    std::vector<double> values;
    for (const auto& form : out.forms) add_form_values(values, gen.eigenvalues, form);
    out.frequencies = dedupe(std::move(values));
    return out;
}

bool enrichment_condition(const GeneratorSpec& gen) {
    const auto& w = gen.eigenvalues;
    std::vector<double> diffs;
    for (double a : w)
        for (double b : w) diffs.push_back(std::abs(a - b));
    diffs = dedupe(std::move(diffs));
    return std::any_of(w.begin(), w.end(), [&](double wk) {
        return std::none_of(diffs.begin(), diffs.end(),
                            [&](double d) { return std::abs(d - std::abs(wk)) <= kFrequencyTolerance; });
    });
}

std::vector<double> default_grid(std::span<const double> candidate_freqs) {
    const auto freqs = positive_candidates(candidate_freqs);
    int q = 0;
    for (int trial = 1; trial <= 64 && q == 0; ++trial) {
        const bool lattice = std::all_of(freqs.begin(), freqs.end(), [&](double w) {
            return std::abs(w * trial - std::round(w * trial)) <= 1e-9;
        });
        if (lattice) q = trial;
    }
    if (q == 0) throw ValidationError("candidate frequencies do not lie on a rational lattice with denominator <= 64");

    std::size_t unknowns = 0;
    double max_harmonic = 0.0;
    for (double w : freqs) {
        unknowns += (w == 0.0) ? 1 : 2;
        max_harmonic = std::max(max_harmonic, w * q);
    }
    const std::size_t n = std::max<std::size_t>(4 * unknowns, 2 * static_cast<std::size_t>(max_harmonic) + 2);
    const double period = 2.0 * std::numbers::pi * q;
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k) grid[k] = period * static_cast<double>(k) / static_cast<double>(n);
    return grid;
}

CoefficientFit extract_coefficients(const std::function<double(double)>& evaluate,
                                    std::span<const double> candidate_freqs, std::span<const double> grid) {
    const auto freqs = positive_candidates(candidate_freqs);
    if (freqs.empty()) throw ValidationError("no candidate frequencies");
    std::size_t unknowns = 0;
    for (double w : freqs) unknowns += (w == 0.0) ? 1 : 2;
    if (grid.size() < unknowns) throw DimensionError("grid has fewer points than unknowns");

    const auto rows = static_cast<Eigen::Index>(grid.size());
    const auto cols = static_cast<Eigen::Index>(unknowns);
    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd values(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double x = grid[static_cast<std::size_t>(r)];
        values(r) = evaluate(x);
        Eigen::Index c = 0;
        for (double w : freqs) {
            if (w == 0.0) {
                design(r, c++) = 1.0;
            } else {
                design(r, c++) = 2.0 * std::cos(w * x);   // Re c_w
                design(r, c++) = -2.0 * std::sin(w * x);  // Im c_w
            }
        }
    }

    const Eigen::MatrixXd normal = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * values;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxCondition)) {
        throw ConditioningError("normal matrix condition estimate " + std::to_string(cond) +
                                " exceeds 1e8 (grid aliasing?)");
    }
    const Eigen::VectorXd solution = normal.ldlt().solve(rhs);

    CoefficientFit fit;
    fit.condition_estimate = cond;
    Eigen::Index c = 0;
    for (double w : freqs) {
        if (w == 0.0) {
            fit.coefficients[w] = {solution(c++), 0.0};
        } else {
            const double re = solution(c++);
            const double im = solution(c++);
            fit.coefficients[w] = {re, im};
        }
    }
    fit.residual_rms = std::sqrt((design * solution - values).squaredNorm() / static_cast<double>(rows));
    return fit;
}

CoefficientCloud sample_coefficient_cloud(const ModelSpec& model, std::span<const double> frequencies,
                                          std::size_t n_samples, std::uint64_t seed, int threads) {
    if (n_samples < 1) throw ValidationError("need at least one sample");
    if (model.n_features < 1) throw ValidationError("coefficient clouds need a single-feature model");
    CoefficientCloud cloud;
    cloud.frequencies = positive_candidates(frequencies);
    cloud.samples.assign(cloud.frequencies.size(), std::vector<std::complex<double>>(n_samples));
    const std::vector<double> grid = default_grid(cloud.frequencies);

    parallel_for(n_samples, threads, [&](std::size_t s) {
        Rng rng(derive_seed(seed, s));
        std::vector<double> params(model.n_trainable);
        for (double& p : params) p = rng.angle();
        std::vector<double> x(model.n_features, 0.0);
        const auto fit = extract_coefficients(
            [&](double xv) {
                x[0] = xv;
                return residual_expectation_direct(model, x, params);
            },
            cloud.frequencies, grid);
        for (std::size_t k = 0; k < cloud.frequencies.size(); ++k) {
            cloud.samples[k][s] = fit.coefficients.at(cloud.frequencies[k]);
        }
    });
    return cloud;
}

}  // namespace qresnet
