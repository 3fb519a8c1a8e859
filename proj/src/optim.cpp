#include "marginlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "marginlab/errors.hpp"

namespace marginlab {

std::string_view method_name(Method m) {
    switch (m) {
    case Method::flow: return "flow";
    case Method::gd: return "gd";
    case Method::sgd: return "sgd";
    }
    return "";
}

Method parse_method(std::string_view text) {
    if (text == "flow") return Method::flow;
    if (text == "gd") return Method::gd;
    if (text == "sgd") return Method::sgd;
    throw InvalidParam("unknown method '" + std::string(text) + "' (expected flow, gd or sgd)");
}

const Checkpoint* Trajectory::find(double at) const {
    for (const auto& c : checkpoints)
        if (c.at == at) return &c;
    return nullptr;
}

std::vector<std::uint64_t> checkpoint_grid(std::uint64_t last, std::size_t count) {
    std::vector<std::uint64_t> grid{1};
    if (last > 1) {
        grid.push_back(last);
        grid.push_back(last - 1);
        const double lg = std::log(static_cast<double>(last));
        for (std::size_t k = 1; k + 1 < count; ++k) {
            const double frac = static_cast<double>(k) / static_cast<double>(count - 1);
            const auto t = static_cast<std::uint64_t>(std::llround(std::exp(frac * lg)));
            grid.push_back(std::clamp<std::uint64_t>(t, 1, last));
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

namespace {

void require_dim(const Dataset& data) {
    if (data.size() == 0 || data.dim() == 0) throw InvalidParam("empty dataset");
}

void require_finite(std::span<const double> w, std::uint64_t t) {
    for (double v : w)
        if (!std::isfinite(v))
            throw NonFinite("iterate became non-finite at step " + std::to_string(t) + "; the run diverged");
}

bool smooth_step(const LossSpec& loss, double eta) {
    const auto mu = loss.smoothness();
    return mu.has_value() && eta * *mu <= 1.0;
}

Checkpoint make_checkpoint(const Dataset& data, const LossSpec& loss, double at,
                           std::span<const double> w, double max_norm) {
    Checkpoint c;
    c.at = at;
    c.w.assign(w.begin(), w.end());
    c.risk = empirical_risk(data, loss, w);
    c.norm = norm(w);
    c.max_norm = std::max(max_norm, c.norm);
    return c;
}

/// g <- (1/m) sum_i l'(x_i.w) x_i. Returns the mean loss when asked.
double full_gradient(const Dataset& data, const LossSpec& loss, std::span<const double> w,
                     std::span<double> g, bool want_risk) {
    std::fill(g.begin(), g.end(), 0.0);
    double risk = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.point(i);
        const double z = dot(x, w);
        if (want_risk) risk += eval(loss, z);
        const double c = deriv(loss, z);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += c * x[j];
    }
    const double m = static_cast<double>(data.size());
    for (auto& v : g) v /= m;
    return risk / m;
}

Trajectory start_trajectory(Method method, const Dataset& data, const LossSpec& loss) {
    Trajectory traj;
    traj.method = method;
    traj.loss_tag = loss.tag();
    traj.dataset_tag = data.tag();
    return traj;
}

} // namespace

Trajectory run_gd(const Dataset& data, const LossSpec& loss, const GDConfig& cfg) {
    require_dim(data);
    if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw InvalidParam("step size must be positive");
    const std::size_t d = data.dim();
    const std::uint64_t last = cfg.steps + 1;
    const auto grid = checkpoint_grid(last, cfg.checkpoints);
    auto next = grid.begin();

    Trajectory traj = start_trajectory(Method::gd, data, loss);
    traj.eta = cfg.eta;
    traj.uncertified = !smooth_step(loss, cfg.eta);

    std::vector<double> w(d, 0.0), g(d, 0.0);
    double max_norm = 0.0;
    for (std::uint64_t t = 1;; ++t) {
        max_norm = std::max(max_norm, norm(w));
        if (cfg.observer) cfg.observer(t, w);
        const bool on_grid = next != grid.end() && *next == t;
        if (on_grid) ++next;

        bool stop = t == last;
        if (!stop) {
            const double risk = full_gradient(data, loss, w, g, cfg.target_risk.has_value());
            stop = cfg.target_risk && risk <= *cfg.target_risk;
        }
        if (on_grid || stop) traj.checkpoints.push_back(make_checkpoint(data, loss, static_cast<double>(t), w, max_norm));
        if (stop) {
            traj.steps = t - 1;
            break;
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= cfg.eta * g[j];
        require_finite(w, t + 1);
    }
    traj.final_w = w;
    traj.max_norm_seen = max_norm;
    return traj;
}

Trajectory run_sgd(const Dataset& data, const LossSpec& loss, const SGDConfig& cfg) {
    require_dim(data);
    if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw InvalidParam("step size must be positive");
    const std::size_t d = data.dim();
    const std::uint64_t last = cfg.steps + 1;
    const auto grid = checkpoint_grid(last, cfg.checkpoints);
    auto next = grid.begin();

    Trajectory traj = start_trajectory(Method::sgd, data, loss);
    traj.eta = cfg.eta;
    traj.steps = cfg.steps;
    traj.seed = cfg.seed;
    traj.uncertified = !smooth_step(loss, cfg.eta);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    std::vector<double> w(d, 0.0), sum(d, 0.0);
    double max_norm = 0.0;
    for (std::uint64_t t = 1;; ++t) {
        max_norm = std::max(max_norm, norm(w));
        if (next != grid.end() && *next == t) {
            traj.checkpoints.push_back(make_checkpoint(data, loss, static_cast<double>(t), w, max_norm));
            ++next;
        }
        if (t == last) break;
        for (std::size_t j = 0; j < d; ++j) sum[j] += w[j];
        const auto x = data.point(pick(rng));
        const double c = deriv(loss, dot(x, w));
        for (std::size_t j = 0; j < d; ++j) w[j] -= cfg.eta * (c * x[j]);
        require_finite(w, t + 1);
    }
    traj.final_w = w;
    traj.max_norm_seen = max_norm;
    if (cfg.steps > 0)
        for (auto& v : sum) v /= static_cast<double>(cfg.steps);
    traj.averaged_w = std::move(sum);
    return traj;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat, with b_hat the embedded fourth-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

class FlowIntegrator {
public:
    FlowIntegrator(const Dataset& data, const LossSpec& loss, double rtol)
        : data_(data), loss_(loss), rtol_(rtol), atol_(rtol), d_(data.dim()),
          y_(d_, 0.0), ynew_(d_), tmp_(d_), k1_(d_), k2_(d_), k3_(d_), k4_(d_), k5_(d_), k6_(d_), k7_(d_),
          err_(d_) {
        rhs(y_, k1_);
    }

    std::span<const double> state() const { return y_; }
    double time() const { return t_; }
    double max_norm() const { return max_norm_; }

    /// Integrates to exactly `target`.
    void advance_to(double target, double t_end) {
        if (t_ >= target) return;
        if (h_ == 0.0) h_ = initial_step(target - t_);
        while (t_ < target) {
            const double remaining = target - t_;
            const bool last = h_ >= remaining * (1.0 - 1e-12);
            const double h = last ? remaining : h_;
            step(h);
            const double err = error_norm();
            if (!std::isfinite(err)) throw NonFinite("flow state became non-finite");
            if (err <= 1.0) {
                t_ = last ? target : t_ + h;
                std::swap(y_, ynew_);
                std::swap(k1_, k7_);
                require_finite(y_, 0);
                max_norm_ = std::max(max_norm_, norm(y_));
                const double fac = controller(err, true);
                // A clamped final step says nothing about the natural step size.
                h_ = last ? std::max(h_, h * fac) : h * fac;
            } else {
                h_ = h * controller(err, false);
            }
            if (h_ < 1e-14 * t_end)
                throw StepUnderflow("adaptive step collapsed below 1e-14 t_end at t = " + std::to_string(t_));
        }
    }

private:
    void rhs(std::span<const double> w, std::span<double> out) {
        full_gradient(data_, loss_, w, out, false);
        for (auto& v : out) v = -v;
    }

    void stage(std::initializer_list<std::pair<const std::vector<double>*, double>> terms, double h) {
        for (std::size_t j = 0; j < d_; ++j) {
            double acc = 0.0;
            for (const auto& [k, a] : terms) acc += a * (*k)[j];
            tmp_[j] = y_[j] + h * acc;
        }
    }

    void step(double h) {
        stage({{&k1_, a21}}, h);
        rhs(tmp_, k2_);
        stage({{&k1_, a31}, {&k2_, a32}}, h);
        rhs(tmp_, k3_);
        stage({{&k1_, a41}, {&k2_, a42}, {&k3_, a43}}, h);
        rhs(tmp_, k4_);
        stage({{&k1_, a51}, {&k2_, a52}, {&k3_, a53}, {&k4_, a54}}, h);
        rhs(tmp_, k5_);
        stage({{&k1_, a61}, {&k2_, a62}, {&k3_, a63}, {&k4_, a64}, {&k5_, a65}}, h);
        rhs(tmp_, k6_);
        for (std::size_t j = 0; j < d_; ++j)
            ynew_[j] = y_[j] + h * (b1 * k1_[j] + b3 * k3_[j] + b4 * k4_[j] + b5 * k5_[j] + b6 * k6_[j]);
        rhs(ynew_, k7_);
        for (std::size_t j = 0; j < d_; ++j)
            err_[j] = h * (e1 * k1_[j] + e3 * k3_[j] + e4 * k4_[j] + e5 * k5_[j] + e6 * k6_[j] + e7 * k7_[j]);
    }

    double error_norm() const {
        double s = 0.0;
        for (std::size_t j = 0; j < d_; ++j) {
            const double sc = atol_ + rtol_ * std::max(std::abs(y_[j]), std::abs(ynew_[j]));
            const double r = err_[j] / sc;
            s += r * r;
        }
        return std::sqrt(s / static_cast<double>(d_));
    }

    // PI controller with Hairer's DOPRI5 constants.
    double controller(double err, bool accepted) {
        constexpr double beta = 0.04, alpha = 0.2 - 0.75 * beta, safety = 0.9;
        err = std::max(err, 1e-10);
        double fac = safety * std::pow(err, -alpha);
        if (accepted) {
            fac *= std::pow(prev_err_, beta);
            prev_err_ = err;
            return std::clamp(fac, 0.2, 10.0);
        }
        return std::clamp(fac, 0.2, 1.0);
    }

    double initial_step(double horizon) {
        double d1 = 0.0;
        for (std::size_t j = 0; j < d_; ++j) {
            const double r = k1_[j] / atol_;
            d1 += r * r;
        }
        d1 = std::sqrt(d1 / static_cast<double>(d_));
        const double h0 = d1 < 1e-5 ? 1e-6 * horizon : std::min(0.01 / d1, horizon);
        for (std::size_t j = 0; j < d_; ++j) tmp_[j] = y_[j] + h0 * k1_[j];
        rhs(tmp_, k2_);
        double d2 = 0.0;
        for (std::size_t j = 0; j < d_; ++j) {
            const double sc = atol_ + rtol_ * std::abs(tmp_[j]);
            const double r = (k2_[j] - k1_[j]) / sc;
            d2 += r * r;
        }
        d2 = std::sqrt(d2 / static_cast<double>(d_)) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, 1e-3 * h0) : std::pow(0.01 / dm, 0.2);
        return std::min({100.0 * h0, h1, horizon});
    }

    const Dataset& data_;
    const LossSpec& loss_;
    double rtol_, atol_;
    std::size_t d_;
    std::vector<double> y_, ynew_, tmp_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, err_;
    double t_ = 0.0;
    double h_ = 0.0;
    double prev_err_ = 1e-4;
    double max_norm_ = 0.0;
};

} // namespace

Trajectory run_flow(const Dataset& data, const LossSpec& loss, const FlowConfig& cfg) {
    require_dim(data);
    if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) throw InvalidParam("flow horizon must be positive");
    if (!(cfg.rel_tol > 0.0 && cfg.rel_tol <= 1e-3)) throw InvalidParam("rel_tol must lie in (0, 1e-3]");

    std::vector<double> times{0.0};
    const std::size_t count = std::max<std::size_t>(cfg.checkpoints, 2);
    const double t_min = cfg.t_end / 1000.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(count - 1);
        times.push_back(k + 1 == count ? cfg.t_end : t_min * std::pow(cfg.t_end / t_min, frac));
    }

    Trajectory traj = start_trajectory(Method::flow, data, loss);
    traj.rel_tol = cfg.rel_tol;
    traj.uncertified = false;

    FlowIntegrator ode(data, loss, cfg.rel_tol);
    for (double t : times) {
        ode.advance_to(t, cfg.t_end);
        traj.checkpoints.push_back(make_checkpoint(data, loss, t, ode.state(), ode.max_norm()));
    }
    const auto s = ode.state();
    traj.final_w.assign(s.begin(), s.end());
    traj.max_norm_seen = ode.max_norm();
    return traj;
}

LowerBoundTrace lowerbound_recursion(double gamma, double epsilon, double eta, std::uint64_t steps) {
    if (!(gamma > 0.0 && gamma <= 0.125)) throw InvalidParam("gamma must lie in (0, 1/8]");
    if (!(epsilon > 0.0 && epsilon <= 0.125)) throw InvalidParam("epsilon must lie in (0, 1/8]");
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidParam("eta must lie in (0, 1]");
    const auto loss = LossSpec::logistic();
    LowerBoundTrace trace;
    trace.gamma = gamma;
    trace.epsilon = epsilon;
    trace.eta = eta;
    trace.rows.reserve(steps + 1);
    double r = 0.0, s = 0.0;
    for (std::uint64_t t = 1;; ++t) {
        const double u = -0.5 * r + 3.0 * gamma * s;
        trace.rows.push_back({t, r, s, u});
        if (t == steps + 1) break;
        const double dr = deriv(loss, r);
        const double du = deriv(loss, u);
        r = r - (1.0 - epsilon) * eta * dr + 0.5 * epsilon * eta * du;
        s = s - 3.0 * gamma * epsilon * eta * du;
    }
    return trace;
}

} // namespace marginlab
