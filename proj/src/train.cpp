#include "qresnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qresnet/errors.hpp"
#include "qresnet/parallel.hpp"
#include "qresnet/residual.hpp"
#include "qresnet/rng.hpp"

namespace qresnet {

namespace {

struct Occurrence {
    std::size_t op;
    std::size_t slot;
    GateKind kind;
    double scale;
    bool in_residual;  // inside a non-traditional residual wrapper
};

std::vector<Occurrence> occurrences(const ModelSpec& model, std::size_t j, bool& residual_angle) {
    std::vector<Occurrence> out;
    residual_angle = false;
    const auto scan = [&](const GateOp& g, std::size_t op, bool in_residual) {
        for (std::size_t s = 0; s < g.params.size(); ++s) {
            const auto& p = g.params[s];
            if (p.source == ParamSource::Trainable && p.index == j) out.push_back({op, s, g.kind, p.scale, in_residual});
        }
    };
    for (std::size_t i = 0; i < model.ops.size(); ++i) {
        if (const auto* g = std::get_if<GateOp>(&model.ops[i])) {
            scan(*g, i, false);
            continue;
        }
        const auto& r = std::get<ResidualOp>(model.ops[i]);
        scan(r.inner, i, r.strategy.kind != ResidualKind::Traditional);
        if (r.strategy.alpha == j || r.strategy.gamma == j) residual_angle = true;
    }
    return out;
}

bool slot_has_unit_gap(GateKind kind, std::size_t slot) {
    switch (kind) {
        case GateKind::Ry:
        case GateKind::Rz:
        case GateKind::ZZ:
        case GateKind::U3: return true;
        // the polar angle becomes a controlled rotation with three generator eigenvalues
        case GateKind::ControlledU3: return slot != 0;
        default: return false;
    }
}

double sample_loss_term(double f, double y, LossKind kind) {
    const double g = kind == LossKind::AbsMse ? std::abs(f) : f;
    return (g - y) * (g - y);
}

}  // namespace

AdamState AdamState::zeros(std::size_t n) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
}

double mse_loss(const ModelSpec& model, std::span<const double> params, std::span<const Sample> data,
                LossKind kind, int threads) {
    if (data.empty()) throw ValidationError("loss of an empty dataset");
    std::vector<double> terms(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        terms[i] = sample_loss_term(residual_expectation_direct(model, data[i].x, params), data[i].y, kind);
    });
    return std::accumulate(terms.begin(), terms.end(), 0.0) / (2.0 * static_cast<double>(data.size()));
}

bool shift_eligible(const ModelSpec& model, std::size_t j) {
    if (j >= model.n_trainable) throw DimensionError("parameter index out of range");
    bool residual_angle = false;
    const auto occ = occurrences(model, j, residual_angle);
    if (residual_angle) return false;
    return std::all_of(occ.begin(), occ.end(), [](const Occurrence& o) {
        return !o.in_residual && o.scale == 1.0 && slot_has_unit_gap(o.kind, o.slot);
    });
}

namespace {

double shift_grad_cached(const CircuitCache& cache, std::span<const double> params, const std::vector<Occurrence>& occ) {
    double grad = 0.0;
    for (const auto& o : occ) {
        const ParamShift plus{o.op, o.slot, std::numbers::pi / 2};
        const ParamShift minus{o.op, o.slot, -std::numbers::pi / 2};
        grad += 0.5 * (cache.evaluate(params, &plus) - cache.evaluate(params, &minus));
    }
    return grad;
}

double fd_grad_cached(const CircuitCache& cache, std::span<const double> params, std::size_t j, double h) {
    std::vector<double> p(params.begin(), params.end());
    p[j] = params[j] + h;
    const double up = cache.evaluate(p);
    p[j] = params[j] - h;
    const double down = cache.evaluate(p);
    return (up - down) / (2.0 * h);
}

std::vector<double> gradient_from_cache(const ModelSpec& model, const CircuitCache& cache,
                                        std::span<const double> params, GradientMode mode) {
    std::vector<double> grad(model.n_trainable, 0.0);
    for (std::size_t j = 0; j < model.n_trainable; ++j) {
        if (mode == GradientMode::FiniteDifference) {
            grad[j] = fd_grad_cached(cache, params, j, kFiniteDifferenceStep);
            continue;
        }
        if (shift_eligible(model, j)) {
            bool residual_angle = false;
            grad[j] = shift_grad_cached(cache, params, occurrences(model, j, residual_angle));
        } else if (mode == GradientMode::Mixed) {
            grad[j] = fd_grad_cached(cache, params, j, kFiniteDifferenceStep);
        } else {
            throw NotApplicableError("parameter '" + model.param_labels[j] + "' is not parameter-shift eligible");
        }
    }
    return grad;
}

}  // namespace

std::optional<double> parameter_shift_grad(const ModelSpec& model, std::span<const double> params,
                                           std::span<const double> x, std::size_t j) {
    if (!shift_eligible(model, j)) return std::nullopt;
    bool residual_angle = false;
    const CircuitCache cache(model, x, params);
    return shift_grad_cached(cache, params, occurrences(model, j, residual_angle));
}

double finite_difference_grad(const ModelSpec& model, std::span<const double> params, std::span<const double> x,
                              std::size_t j, double h) {
    if (j >= params.size()) throw DimensionError("parameter index out of range");
    const CircuitCache cache(model, x, params);
    return fd_grad_cached(cache, params, j, h);
}

std::vector<double> model_gradient(const ModelSpec& model, std::span<const double> params,
                                   std::span<const double> x, GradientMode mode) {
    const CircuitCache cache(model, x, params);
    return gradient_from_cache(model, cache, params, mode);
}

std::pair<AdamState, std::vector<double>> adam_step(AdamState state, std::span<const double> params,
                                                   std::span<const double> grad, double learning_rate) {
    const std::size_t n = params.size();
    if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
        throw DimensionError("Adam state, parameters and gradient must have equal length");
    }
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    std::vector<double> out(params.begin(), params.end());
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        out[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    return {std::move(state), std::move(out)};
}

TrainResult train(const ModelSpec& model, const TrainConfig& config, std::span<const Sample> data, LossKind kind,
                  std::optional<std::vector<double>> init, const StepCallback& on_step) {
    if (data.empty()) throw ValidationError("training data is empty");
    if (config.max_steps < 1) throw ValidationError("max_steps must be positive");
    if (!(config.batch_fraction > 0.0 && config.batch_fraction <= 1.0)) {
        throw ValidationError("batch_fraction must lie in (0, 1]");
    }
    if (config.convergence_window < 2) throw ValidationError("convergence window must be at least 2");

    TrainResult result;
    result.initial_params = init ? *init : initial_parameters(model, config.seed);
    if (result.initial_params.size() != model.n_trainable) throw DimensionError("initial parameter count mismatch");

    std::vector<double> params = result.initial_params;
    AdamState adam = AdamState::zeros(params.size());
    Rng rng(derive_seed(config.seed, 0xba7c4));

    const std::size_t d = data.size();
    const auto batch = std::min<std::size_t>(
        d, static_cast<std::size_t>(std::ceil(config.batch_fraction * static_cast<double>(d) - 1e-12)));
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);

    result.best_loss = std::numeric_limits<double>::infinity();
    result.best_params = params;
    std::vector<std::vector<double>> per_sample(batch);

    for (int step = 1; step <= config.max_steps; ++step) {
        if (batch < d) {
            for (std::size_t i = 0; i < batch; ++i) std::swap(order[i], order[i + rng.below(d - i)]);
        }
        parallel_for(batch, config.threads, [&](std::size_t b) {
            const Sample& s = data[order[b]];
            const CircuitCache cache(model, s.x, params);
            const double f = cache.value();
            const double g = kind == LossKind::AbsMse ? std::abs(f) : f;
            const double dg = kind == LossKind::AbsMse ? (f >= 0.0 ? 1.0 : -1.0) : 1.0;
            auto grad = gradient_from_cache(model, cache, params, config.gradient_mode);
            for (double& v : grad) v *= (g - s.y) * dg;
            per_sample[b] = std::move(grad);
        });
        std::vector<double> grad(params.size(), 0.0);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += per_sample[b][j];
        for (double& v : grad) v /= static_cast<double>(batch);

        auto [next_state, next_params] = adam_step(std::move(adam), params, grad, config.learning_rate);
        adam = std::move(next_state);
        params = std::move(next_params);

        const double loss = mse_loss(model, params, data, kind, config.threads);
        result.loss_history.push_back(loss);
        result.steps = step;
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_params = params;
        }
        if (on_step) on_step(step, loss);

        const auto w = static_cast<std::size_t>(config.convergence_window);
        if (result.loss_history.size() >= w) {
            const auto first = result.loss_history.end() - static_cast<std::ptrdiff_t>(w);
            const double mean = std::accumulate(first, result.loss_history.end(), 0.0) / static_cast<double>(w);
            double var = 0.0;
            for (auto it = first; it != result.loss_history.end(); ++it) var += (*it - mean) * (*it - mean);
            var /= static_cast<double>(w);
            if (var < config.convergence_variance) {
                result.converged = true;
                break;
            }
        }
    }
    return result;
}

}  // namespace qresnet
