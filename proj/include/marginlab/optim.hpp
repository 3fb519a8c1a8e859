#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marginlab/dataset.hpp"
#include "marginlab/loss.hpp"

namespace marginlab {

enum class Method { flow, gd, sgd };

std::string_view method_name(Method m);
Method parse_method(std::string_view text);

/// Called once per iterate, w_1 = 0 first. `t` is the iterate index.
using IterateObserver = std::function<void(std::uint64_t t, std::span<const double> w)>;

struct GDConfig {
    double eta = 1.0;
    std::uint64_t steps = 0;
    std::size_t checkpoints = 64;
    /// Stop as soon as the risk of the current iterate is <= target.
    std::optional<double> target_risk;
    IterateObserver observer;
};

struct SGDConfig {
    double eta = 1.0;
    std::uint64_t steps = 0;
    std::uint64_t seed = 0;
    std::size_t checkpoints = 64;
};

struct FlowConfig {
    double t_end = 1.0;
    double rel_tol = 1e-8;
    std::size_t checkpoints = 64;
};

/// One sampled iterate. For the discrete methods `at` is the iterate index t
/// (w_1 is the origin, so `at - 1` updates have been applied); for flow it is
/// the continuous time. `max_norm` is the running maximum over every iterate
/// (or accepted integrator step) up to and including this one.
struct Checkpoint {
    double at = 0.0;
    std::vector<double> w;
    double risk = 0.0;
    double norm = 0.0;
    double max_norm = 0.0;
};

struct Trajectory {
    Method method = Method::gd;
    std::string loss_tag;
    std::string dataset_tag;
    std::vector<Checkpoint> checkpoints;
    std::vector<double> final_w;
    /// v_T = (1/T) sum_{t=1}^{T} w_t, SGD only.
    std::optional<std::vector<double>> averaged_w;
    double max_norm_seen = 0.0;
    double eta = 0.0;
    double rel_tol = 0.0;
    std::uint64_t steps = 0;
    std::optional<std::uint64_t> seed;
    /// Set when the run falls outside the smoothness assumption the discrete
    /// bounds need (no Lipschitz l', or eta > 1/mu).
    bool uncertified = false;

    const Checkpoint& final_checkpoint() const { return checkpoints.back(); }
    /// Checkpoint whose `at` equals the argument exactly, or nullptr.
    const Checkpoint* find(double at) const;
};

/// Log-spaced iterate indices in [1, last] with `count` points, always
/// including 1, last - 1 (when >= 1) and last.
std::vector<std::uint64_t> checkpoint_grid(std::uint64_t last, std::size_t count);

/// w_{t+1} = w_t - eta grad L(w_t) from w_1 = 0, for cfg.steps updates.
/// Throws NonFinite on divergence.
Trajectory run_gd(const Dataset& data, const LossSpec& loss, const GDConfig& cfg);

/// w_{t+1} = w_t - eta l'(x_{i_t}.w_t) x_{i_t} with i_t uniform on [m].
Trajectory run_sgd(const Dataset& data, const LossSpec& loss, const SGDConfig& cfg);

/// dw/dt = -grad L(w), w(0) = 0, integrated with an embedded Dormand-Prince
/// 5(4) pair under PI step control. Throws NonFinite or StepUnderflow.
Trajectory run_flow(const Dataset& data, const LossSpec& loss, const FlowConfig& cfg);

/// Gradient descent on L(r, s) = (1-eps) l(r) + eps l(-r/2 + 3 gamma s) with the
/// logistic loss, i.e. GD on the adversarial dataset in its own coordinates.
struct LowerBoundTrace {
    struct Row {
        std::uint64_t t = 1;
        double r = 0.0;
        double s = 0.0;
        double u = 0.0;
    };
    std::vector<Row> rows;
    double gamma = 0.0;
    double epsilon = 0.0;
    double eta = 0.0;
};

LowerBoundTrace lowerbound_recursion(double gamma, double epsilon, double eta, std::uint64_t steps);

} // namespace marginlab
