#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "marginlab/dataset.hpp"
#include "marginlab/loss.hpp"
#include "marginlab/optim.hpp"

namespace marginlab {

enum class BoundKind {
    margin_quantile,
    flow_risk,
    gd_logistic_risk,
    flow_margin_fraction,
    gd_margin_fraction,
    sgd_margin_fraction,
    poly_margin,
    norm,
    sgd_norm,
    lowerbound_violations,
    flow_monitor,
    generalization_reference,
};

std::string_view bound_kind_name(BoundKind k);
BoundKind parse_bound_kind(std::string_view text);

/// Parameters of one bound instance. Fields irrelevant to a kind are ignored.
/// `T` selects the checkpoint to certify (iterate index or flow time); zero
/// means the final checkpoint.
struct BoundQuery {
    BoundKind kind = BoundKind::margin_quantile;
    double gamma = 0.0;
    std::uint64_t m = 0;
    double T = 0.0;
    double alpha = 0.5;
    double p = 1.0;
    double epsilon = 0.0;
    double b = 1.0;
    double C = 1.0;
};

enum class BoundStatus { satisfied, violated, precondition_not_met };

std::string_view status_name(BoundStatus s);

struct BoundReport {
    BoundQuery query;
    double theoretical = 0.0;
    double empirical = 0.0;
    bool satisfied = false;
    /// theoretical - empirical for upper bounds, empirical - theoretical for
    /// guaranteed counts; satisfied iff slack >= -tolerance_used * |theoretical|.
    double slack = 0.0;
    double tolerance_used = 0.0;
    bool certified = true;
    BoundStatus status = BoundStatus::satisfied;
    std::string note;
    std::string trajectory_ref;
    std::string dataset_ref;
};

// Closed-form bound evaluators.

/// (gamma/2) l^{-1}(eps/p) / l^{-1}(eps); requires eps in (0, l(0)] and p in [eps/l(0), 1].
double margin_quantile_bound(const LossSpec& loss, double gamma, double epsilon, double p);
double flow_risk_bound(double gamma, double T);
double gd_logistic_risk_bound(double gamma, double T);

struct MarginFraction {
    double margin = 0.0;
    double fraction = 0.0;
};

MarginFraction flow_margin_fraction_bound(double gamma, double T, double alpha);
/// Throws DomainError when T <= 4 or log^2(T)/(gamma^2 T) >= log 2.
MarginFraction gd_margin_fraction_bound(double gamma, double T, double alpha);
bool gd_margin_fraction_applicable(double gamma, double T);
MarginFraction sgd_margin_fraction_bound(double gamma, double T, double alpha);
double poly_margin_bound(double gamma, double b, double p);
double norm_bound(const LossSpec& loss, double gamma, double epsilon);
double sgd_norm_bound(double gamma, double T);
std::uint64_t lowerbound_violations(std::uint64_t m, double gamma, std::uint64_t T);
double generalization_reference(double gamma, double m, double T, double C);

struct MonitorPoint {
    double t = 0.0;
    double f = 0.0;
};

/// f(t) = gamma^2 t L(w(t)) at every checkpoint of an exponential-loss flow run.
std::vector<MonitorPoint> flow_monitor(const Trajectory& traj, double gamma);

inline constexpr double exact_tolerance = 1e-9;

/// Tolerance applied to a trajectory: 1e-9 for the exact recursions, 10 rel_tol for flow.
double tolerance_for(const Trajectory& traj);

/// Binds a bound to the matching empirical quantity of `traj`. Throws
/// IncompatibleQuery when the kind does not apply to the method or loss.
/// Violated parameter boxes come back as precondition_not_met reports.
BoundReport certify(const Trajectory& traj, const Dataset& data, const BoundQuery& query);

/// Statistical check of the SGD expectation bound: mean(deltas) must not exceed
/// the bound by more than 2 SD / sqrt(R).
BoundReport certify_sgd_expectation(std::span<const double> deltas, const BoundQuery& query);

/// Replays GD and checks that ||w_t - w*|| is nonincreasing for
/// w* = (l^{-1}(L(w_final)) / gamma) w0. `empirical` holds the largest
/// relative increase observed.
BoundReport certify_distance_monotone(const Dataset& data, const LossSpec& loss,
                                      const GDConfig& cfg);

/// Replays GD and checks L(w_{t+1}) <= L(w_t) at every step.
BoundReport certify_risk_monotone(const Dataset& data, const LossSpec& loss, const GDConfig& cfg);

nlohmann::json to_json(const BoundReport& r);
BoundReport report_from_json(const nlohmann::json& j);

} // namespace marginlab
