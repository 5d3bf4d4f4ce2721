#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qresnet/circuit.hpp"

namespace qresnet {

struct Sample {
    std::vector<double> x;
    double y = 0.0;
};

enum class GradientMode { ParameterShift, FiniteDifference, Mixed };

/// Mse: sum (y - f)^2 / 2D.  AbsMse: sum (|f| - y)^2 / 2D.
enum class LossKind { Mse, AbsMse };

struct TrainConfig {
    double learning_rate = 0.3;
    int max_steps = 200;
    double batch_fraction = 0.7;
    int convergence_window = 10;
    double convergence_variance = 1e-8;
    std::uint64_t seed = 0;
    GradientMode gradient_mode = GradientMode::Mixed;
    int threads = 1;
};

struct TrainResult {
    std::vector<double> initial_params;
    std::vector<double> best_params;
    std::vector<double> loss_history;
    double best_loss = 0.0;
    int steps = 0;
    bool converged = false;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState zeros(std::size_t n);
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

double mse_loss(const ModelSpec& model, std::span<const double> params, std::span<const Sample> data,
                LossKind kind = LossKind::Mse, int threads = 1);

/// True when every occurrence of parameter j sits in a gate whose angle has
/// a two-eigenvalue generator with gap 1 (Ry, Rz, ZZ, U3, the phase angles
/// of ControlledU3) on the unitary path. Residual angles and parameters
/// inside non-traditional residual blocks are not eligible.
bool shift_eligible(const ModelSpec& model, std::size_t j);

/// Sum over occurrences of 1/2 [f(+pi/2) - f(-pi/2)]; nullopt when the
/// parameter is not shift-eligible.
std::optional<double> parameter_shift_grad(const ModelSpec& model, std::span<const double> params,
                                           std::span<const double> x, std::size_t j);

/// Central difference (f(t + h) - f(t - h)) / 2h.
double finite_difference_grad(const ModelSpec& model, std::span<const double> params, std::span<const double> x,
                              std::size_t j, double h = kFiniteDifferenceStep);

/// df/dtheta for every parameter. ParameterShift mode throws
/// NotApplicableError if any parameter is ineligible; Mixed falls back to
/// finite differences for those.
std::vector<double> model_gradient(const ModelSpec& model, std::span<const double> params,
                                   std::span<const double> x, GradientMode mode);

/// Bias-corrected Adam update; returns the new state and parameters.
std::pair<AdamState, std::vector<double>> adam_step(AdamState state, std::span<const double> params,
                                                   std::span<const double> grad, double learning_rate);

using StepCallback = std::function<void(int step, double loss)>;

/// Adam on mini-batches of ceil(batch_fraction * D) samples. The full-data
/// loss is logged after every step; training stops after max_steps or when
/// the population variance of the last `convergence_window` losses drops
/// below `convergence_variance`. Returns the best parameters seen.
TrainResult train(const ModelSpec& model, const TrainConfig& config, std::span<const Sample> data,
                  LossKind kind = LossKind::Mse, std::optional<std::vector<double>> init = std::nullopt,
                  const StepCallback& on_step = {});

}  // namespace qresnet
