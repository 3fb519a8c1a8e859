#include "marginlab/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "marginlab/errors.hpp"
#include "marginlab/io.hpp"

namespace marginlab {

namespace {

constexpr std::array<std::pair<BoundKind, std::string_view>, 12> kind_names{{
    {BoundKind::margin_quantile, "margin_quantile"},
    {BoundKind::flow_risk, "flow_risk"},
    {BoundKind::gd_logistic_risk, "gd_logistic_risk"},
    {BoundKind::flow_margin_fraction, "flow_margin_fraction"},
    {BoundKind::gd_margin_fraction, "gd_margin_fraction"},
    {BoundKind::sgd_margin_fraction, "sgd_margin_fraction"},
    {BoundKind::poly_margin, "poly_margin"},
    {BoundKind::norm, "norm"},
    {BoundKind::sgd_norm, "sgd_norm"},
    {BoundKind::lowerbound_violations, "lowerbound_violations"},
    {BoundKind::flow_monitor, "flow_monitor"},
    {BoundKind::generalization_reference, "generalization_reference"},
}};

void require_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
}

double sq(double v) { return v * v; }

} // namespace

std::string_view bound_kind_name(BoundKind k) {
    for (const auto& [kind, name] : kind_names)
        if (kind == k) return name;
    return "";
}

BoundKind parse_bound_kind(std::string_view text) {
    for (const auto& [kind, name] : kind_names)
        if (name == text) return kind;
    throw InvalidParam("unknown bound kind '" + std::string(text) + "'");
}

std::string_view status_name(BoundStatus s) {
    switch (s) {
    case BoundStatus::satisfied: return "satisfied";
    case BoundStatus::violated: return "violated";
    case BoundStatus::precondition_not_met: return "precondition_not_met";
    }
    return "";
}

double margin_quantile_bound(const LossSpec& loss, double gamma, double epsilon, double p) {
    const double l0 = loss.value_at_zero();
    if (!(epsilon > 0.0 && epsilon <= l0)) throw DomainError("epsilon must lie in (0, l(0)]");
    if (!(p >= epsilon / l0 && p <= 1.0)) throw DomainError("p must lie in [epsilon / l(0), 1]");
    if (p == 1.0) return gamma / 2.0;
    const double ratio = inverse(loss, std::min(epsilon / p, l0)) / inverse(loss, epsilon);
    return gamma / 2.0 * ratio;
}

double flow_risk_bound(double gamma, double T) {
    if (!(T > 0.0)) throw DomainError("flow risk bound needs T > 0");
    return 1.0 / (sq(gamma) * T);
}

double gd_logistic_risk_bound(double gamma, double T) {
    if (!(T >= 1.0)) throw DomainError("GD risk bound needs T >= 1");
    return 1.0 / T + sq(std::log(T)) / (2.0 * sq(gamma) * T);
}

MarginFraction flow_margin_fraction_bound(double gamma, double T, double alpha) {
    require_alpha(alpha);
    const double g2t = sq(gamma) * T;
    if (!(g2t > 1.0)) throw DomainError("flow margin fraction needs gamma^2 T > 1");
    return {(1.0 - alpha) * gamma / 2.0, std::pow(g2t, -alpha)};
}

bool gd_margin_fraction_applicable(double gamma, double T) {
    return T > 4.0 && sq(std::log(T)) / (sq(gamma) * T) < std::log(2.0);
}

MarginFraction gd_margin_fraction_bound(double gamma, double T, double alpha) {
    require_alpha(alpha);
    if (!gd_margin_fraction_applicable(gamma, T))
        throw DomainError("GD margin fraction needs T > 4 and log^2(T) / (gamma^2 T) < log 2");
    return {(1.0 - alpha) * gamma / 2.0, 2.0 * std::pow(sq(std::log(T)) / (sq(gamma) * T), alpha)};
}

MarginFraction sgd_margin_fraction_bound(double gamma, double T, double alpha) {
    require_alpha(alpha);
    if (!(T > 1.0 / sq(gamma))) throw DomainError("SGD margin fraction needs T > 1 / gamma^2");
    const double g2t = sq(gamma) * T;
    return {(1.0 - alpha) * gamma / 5.0, (8.0 + 4.0 * sq(std::log(g2t))) / (3.0 * sq(gamma) * std::pow(T, alpha))};
}

double poly_margin_bound(double gamma, double b, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0, 1]");
    if (!(b > 0.0)) throw DomainError("tail exponent must be positive");
    return gamma / 2.0 * std::pow(p, 1.0 / b);
}

double norm_bound(const LossSpec& loss, double gamma, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= loss.value_at_zero())) throw DomainError("epsilon must lie in (0, l(0)]");
    return 2.0 * inverse(loss, epsilon) / gamma;
}

double sgd_norm_bound(double gamma, double T) {
    if (!(T >= 1.0)) throw DomainError("SGD norm bound needs T >= 1");
    return 2.0 * std::log(T) / gamma + 2.0;
}

std::uint64_t lowerbound_violations(std::uint64_t m, double gamma, std::uint64_t T) {
    if (!(gamma > 0.0 && gamma <= 0.125)) throw DomainError("gamma must lie in (0, 1/8]");
    if (m == 0 || T == 0) throw DomainError("need m, T >= 1");
    const double scale = std::max(1.0, sq(gamma) * static_cast<double>(T));
    return static_cast<std::uint64_t>(std::floor(static_cast<double>(m) / (26.0 * scale)));
}

double generalization_reference(double gamma, double m, double T, double C) {
    if (!(C > 0.0)) throw DomainError("reference constant must be positive");
    const double g2 = sq(gamma);
    const double polylog = 1.0 + sq(std::log(std::max(g2 * m, std::exp(1.0))));
    return C * (1.0 / (g2 * T) + 1.0 / (g2 * m)) * polylog;
}

std::vector<MonitorPoint> flow_monitor(const Trajectory& traj, double gamma) {
    if (traj.method != Method::flow) throw WrongMethod("flow monitor needs a gradient-flow trajectory");
    if (traj.loss_tag != LossSpec::exponential().tag())
        throw WrongMethod("flow monitor is defined for the exponential loss only");
    std::vector<MonitorPoint> out;
    out.reserve(traj.checkpoints.size());
    for (const auto& c : traj.checkpoints) out.push_back({c.at, sq(gamma) * c.at * c.risk});
    return out;
}

double tolerance_for(const Trajectory& traj) {
    return traj.method == Method::flow ? 10.0 * traj.rel_tol : exact_tolerance;
}

namespace {

struct Context {
    const Trajectory& traj;
    const Dataset& data;
    const BoundQuery& query;
    LossSpec loss;
    double gamma;
    BoundReport report;
};

void finish_upper(BoundReport& r, double theoretical, double empirical) {
    r.theoretical = theoretical;
    r.empirical = empirical;
    r.slack = theoretical - empirical;
    r.satisfied = r.slack >= -r.tolerance_used * std::abs(theoretical);
    r.status = r.satisfied ? BoundStatus::satisfied : BoundStatus::violated;
}

void finish_lower(BoundReport& r, double required, double achieved) {
    r.theoretical = required;
    r.empirical = achieved;
    r.slack = achieved - required;
    r.satisfied = r.slack >= -r.tolerance_used * std::abs(required);
    r.status = r.satisfied ? BoundStatus::satisfied : BoundStatus::violated;
}

BoundReport precondition(BoundReport r, std::string why) {
    r.satisfied = false;
    r.status = BoundStatus::precondition_not_met;
    r.theoretical = std::nan("");
    r.empirical = std::nan("");
    r.slack = std::nan("");
    r.note = std::move(why);
    return r;
}

[[noreturn]] void incompatible(const BoundQuery& q, std::string why) {
    throw IncompatibleQuery(std::string(bound_kind_name(q.kind)) + ": " + why);
}

void expect_method(const Context& c, Method m) {
    if (c.traj.method != m)
        incompatible(c.query, "needs a " + std::string(method_name(m)) + " trajectory, got " +
                                  std::string(method_name(c.traj.method)));
}

void expect_loss(const Context& c, LossKind k) {
    if (c.loss.kind() != k) incompatible(c.query, "not defined for loss " + c.traj.loss_tag);
}

void expect_unit_step(const Context& c) {
    if (c.traj.eta != 1.0) incompatible(c.query, "stated for step size 1, got " + format_double(c.traj.eta));
}

void expect_smooth(const Context& c) {
    if (c.traj.method == Method::gd && c.traj.uncertified)
        incompatible(c.query, "uncertified combination: the loss derivative is not Lipschitz or eta > 1/mu");
}

const Checkpoint& pick_checkpoint(const Context& c) {
    if (c.query.T == 0.0) return c.traj.final_checkpoint();
    const auto* ck = c.traj.find(c.query.T);
    if (!ck) incompatible(c.query, "no checkpoint at " + format_double(c.query.T));
    return *ck;
}

/// Measured risk with the summation error at the origin removed: a mean of m
/// copies of l(0) can round one ulp above l(0).
double measured_risk(const Context& c, const Checkpoint& ck) {
    const double l0 = c.loss.value_at_zero();
    return ck.risk > l0 && ck.risk <= l0 * (1.0 + 1e-12) ? l0 : ck.risk;
}

/// Number of points with margin strictly above tau.
double count_above(const Dataset& data, const Checkpoint& ck, double tau) {
    const auto prof = margin_profile(data, ck.w);
    return static_cast<double>(prof.size() - violation_count(prof, tau));
}

BoundReport quantile_like(Context& c, const Checkpoint& ck, double tau, double violating_fraction) {
    auto& r = c.report;
    const double m = static_cast<double>(c.data.size());
    finish_lower(r, (1.0 - violating_fraction) * m, count_above(c.data, ck, tau));
    r.note = "margin threshold " + format_double(tau) + ", measured risk " + format_double(ck.risk);
    return r;
}

BoundReport certify_margin_quantile(Context& c) {
    if (c.traj.method == Method::sgd) incompatible(c.query, "stated for gradient flow and gradient descent");
    expect_smooth(c);
    const auto& ck = pick_checkpoint(c);
    const double eps = measured_risk(c, ck);
    const double l0 = c.loss.value_at_zero();
    if (!(eps > 0.0 && eps <= l0)) return precondition(c.report, "measured risk outside (0, l(0)]");
    if (ck.norm <= 1e-300) return precondition(c.report, "predictor is the origin");
    const double p = c.query.p;
    if (!(p >= eps / l0 && p <= 1.0)) return precondition(c.report, "p outside [risk / l(0), 1]");
    return quantile_like(c, ck, margin_quantile_bound(c.loss, c.gamma, eps, p), p);
}

BoundReport certify_flow_risk(Context& c) {
    expect_method(c, Method::flow);
    expect_loss(c, LossKind::exponential);
    const auto& ck = pick_checkpoint(c);
    if (!(ck.at > 0.0)) return precondition(c.report, "needs T > 0");
    finish_upper(c.report, flow_risk_bound(c.gamma, ck.at), ck.risk);
    return c.report;
}

BoundReport certify_gd_logistic_risk(Context& c) {
    expect_method(c, Method::gd);
    expect_loss(c, LossKind::logistic);
    expect_unit_step(c);
    const auto& ck = pick_checkpoint(c);
    finish_upper(c.report, gd_logistic_risk_bound(c.gamma, ck.at), ck.risk);
    return c.report;
}

BoundReport certify_flow_margin_fraction(Context& c) {
    expect_method(c, Method::flow);
    expect_loss(c, LossKind::exponential);
    const auto& ck = pick_checkpoint(c);
    if (!(sq(c.gamma) * ck.at > 1.0)) return precondition(c.report, "needs gamma^2 T > 1");
    const auto mf = flow_margin_fraction_bound(c.gamma, ck.at, c.query.alpha);
    return quantile_like(c, ck, mf.margin, mf.fraction);
}

BoundReport certify_gd_margin_fraction(Context& c) {
    expect_method(c, Method::gd);
    expect_loss(c, LossKind::logistic);
    expect_unit_step(c);
    const auto& ck = pick_checkpoint(c);
    if (!gd_margin_fraction_applicable(c.gamma, ck.at))
        return precondition(c.report, "needs T > 4 and log^2(T) / (gamma^2 T) < log 2");
    const auto mf = gd_margin_fraction_bound(c.gamma, ck.at, c.query.alpha);
    return quantile_like(c, ck, mf.margin, mf.fraction);
}

BoundReport certify_sgd_margin_fraction(Context& c) {
    expect_method(c, Method::sgd);
    expect_loss(c, LossKind::logistic);
    expect_unit_step(c);
    c.report.certified = false;
    const double T = static_cast<double>(c.traj.steps);
    if (!(T > 1.0 / sq(c.gamma))) return precondition(c.report, "needs T > 1 / gamma^2");
    if (!c.traj.averaged_w || norm(*c.traj.averaged_w) <= 1e-300)
        return precondition(c.report, "averaged iterate is the origin");
    const auto mf = sgd_margin_fraction_bound(c.gamma, T, c.query.alpha);
    const auto prof = margin_profile(c.data, *c.traj.averaged_w);
    const double delta = static_cast<double>(violation_count(prof, mf.margin)) / static_cast<double>(prof.size());
    finish_upper(c.report, mf.fraction, delta);
    c.report.note = "single run; the bound holds in expectation over SGD seeds";
    return c.report;
}

BoundReport certify_poly_margin(Context& c) {
    expect_method(c, Method::gd);
    expect_loss(c, LossKind::polynomial);
    expect_smooth(c);
    const auto& ck = pick_checkpoint(c);
    const double eps = ck.risk;
    if (!(eps > 0.0 && eps < c.loss.value_at_zero())) return precondition(c.report, "measured risk outside (0, l(0))");
    if (ck.norm <= 1e-300) return precondition(c.report, "predictor is the origin");
    const double p = c.query.p;
    if (!(p >= eps && p <= 1.0)) return precondition(c.report, "p outside [risk, 1]");
    return quantile_like(c, ck, poly_margin_bound(c.gamma, c.loss.tail_exponent(), p), p);
}

BoundReport certify_norm(Context& c) {
    if (c.traj.method == Method::sgd) incompatible(c.query, "use sgd_norm for SGD trajectories");
    expect_smooth(c);
    const auto& ck = pick_checkpoint(c);
    const double eps = measured_risk(c, ck);
    if (!(eps > 0.0 && eps <= c.loss.value_at_zero()))
        return precondition(c.report, "measured risk outside (0, l(0)]");
    finish_upper(c.report, norm_bound(c.loss, c.gamma, eps), ck.max_norm);
    return c.report;
}

BoundReport certify_sgd_norm(Context& c) {
    expect_method(c, Method::sgd);
    expect_loss(c, LossKind::logistic);
    expect_unit_step(c);
    const auto& ck = pick_checkpoint(c);
    finish_upper(c.report, sgd_norm_bound(c.gamma, ck.at), ck.max_norm);
    return c.report;
}

BoundReport certify_lowerbound(Context& c) {
    expect_method(c, Method::gd);
    expect_loss(c, LossKind::logistic);
    if (!(c.traj.eta > 0.0 && c.traj.eta <= 1.0)) incompatible(c.query, "stated for step sizes eta <= 1");
    if (c.query.T < 1.0) incompatible(c.query, "needs the iterate index T");
    const double gamma = c.query.gamma;
    if (!(gamma > 0.0 && gamma <= 0.125)) return precondition(c.report, "gamma outside (0, 1/8]");
    const auto& ck = pick_checkpoint(c);
    c.report.tolerance_used = 0.0;
    const auto T = static_cast<std::uint64_t>(ck.at);
    const double guaranteed = static_cast<double>(lowerbound_violations(c.data.size(), gamma, T));
    finish_lower(c.report, guaranteed, static_cast<double>(misclassified_count(c.data, ck.w)));
    return c.report;
}

BoundReport certify_flow_monitor(Context& c) {
    expect_method(c, Method::flow);
    expect_loss(c, LossKind::exponential);
    double worst = 0.0;
    for (const auto& pt : flow_monitor(c.traj, c.gamma)) worst = std::max(worst, pt.f);
    finish_upper(c.report, 1.0, worst);
    return c.report;
}

std::string trajectory_ref(const Trajectory& t) {
    std::ostringstream s;
    s << method_name(t.method) << ":" << t.loss_tag << ":" << t.dataset_tag;
    return s.str();
}

} // namespace

BoundReport certify(const Trajectory& traj, const Dataset& data, const BoundQuery& query) {
    if (traj.checkpoints.empty()) throw IncompatibleQuery("trajectory has no checkpoints");
    Context c{traj, data, query, LossSpec::parse(traj.loss_tag), query.gamma > 0.0 ? query.gamma : data.gamma(), {}};
    c.report.query = query;
    c.report.query.gamma = c.gamma;
    c.report.query.m = data.size();
    c.report.tolerance_used = tolerance_for(traj);
    c.report.certified = traj.method != Method::flow;
    c.report.trajectory_ref = trajectory_ref(traj);
    c.report.dataset_ref = data.tag();

    switch (query.kind) {
    case BoundKind::margin_quantile: return certify_margin_quantile(c);
    case BoundKind::flow_risk: return certify_flow_risk(c);
    case BoundKind::gd_logistic_risk: return certify_gd_logistic_risk(c);
    case BoundKind::flow_margin_fraction: return certify_flow_margin_fraction(c);
    case BoundKind::gd_margin_fraction: return certify_gd_margin_fraction(c);
    case BoundKind::sgd_margin_fraction: return certify_sgd_margin_fraction(c);
    case BoundKind::poly_margin: return certify_poly_margin(c);
    case BoundKind::norm: return certify_norm(c);
    case BoundKind::sgd_norm: return certify_sgd_norm(c);
    case BoundKind::lowerbound_violations: return certify_lowerbound(c);
    case BoundKind::flow_monitor: return certify_flow_monitor(c);
    case BoundKind::generalization_reference:
        incompatible(query, "needs a generalization estimate, not a trajectory");
    }
    incompatible(query, "unknown kind");
}

BoundReport certify_sgd_expectation(std::span<const double> deltas, const BoundQuery& query) {
    if (deltas.size() < 2) throw InvalidParam("need at least two SGD runs");
    const auto bound = sgd_margin_fraction_bound(query.gamma, query.T, query.alpha);
    const double R = static_cast<double>(deltas.size());
    const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / R;
    double ss = 0.0;
    for (double v : deltas) ss += sq(v - mean);
    const double sd = std::sqrt(ss / (R - 1.0));
    const double allowance = 2.0 * sd / std::sqrt(R);

    BoundReport r;
    r.query = query;
    r.query.kind = BoundKind::sgd_margin_fraction;
    r.certified = true;
    r.tolerance_used = allowance / bound.fraction;
    finish_upper(r, bound.fraction, mean);
    std::ostringstream note;
    note << "mean over " << deltas.size() << " seeds, sd " << format_double(sd) << ", allowance 2 sd / sqrt(R) = "
         << format_double(allowance);
    r.note = note.str();
    return r;
}

namespace {

BoundReport replay_report(const Dataset& data, const LossSpec& loss, const GDConfig& cfg, std::string what) {
    BoundReport r;
    r.query.kind = BoundKind::norm;
    r.query.gamma = data.gamma();
    r.query.m = data.size();
    r.query.T = static_cast<double>(cfg.steps + 1);
    r.tolerance_used = exact_tolerance;
    r.certified = loss.smoothness().has_value() && cfg.eta * *loss.smoothness() <= 1.0;
    r.dataset_ref = data.tag();
    r.trajectory_ref = "gd:" + loss.tag() + ":" + data.tag();
    r.note = std::move(what);
    return r;
}

} // namespace

BoundReport certify_distance_monotone(const Dataset& data, const LossSpec& loss, const GDConfig& cfg) {
    std::vector<std::vector<double>> iterates;
    GDConfig replay = cfg;
    replay.observer = [&](std::uint64_t, std::span<const double> w) { iterates.emplace_back(w.begin(), w.end()); };
    const auto traj = run_gd(data, loss, replay);

    auto r = replay_report(data, loss, cfg, "max ratio ||w_{t+1} - w*|| / ||w_t - w*||");
    const double eps = traj.final_checkpoint().risk;
    if (!(eps > 0.0 && eps <= loss.value_at_zero())) return precondition(r, "final risk outside (0, l(0)]");
    const double scale = inverse(loss, eps) / data.gamma();
    std::vector<double> star(data.witness().begin(), data.witness().end());
    for (auto& v : star) v *= scale;

    double worst = 0.0, prev = -1.0;
    std::vector<double> diff(data.dim());
    for (const auto& w : iterates) {
        for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = w[j] - star[j];
        const double dist = norm(diff);
        if (prev > 0.0) worst = std::max(worst, dist / prev);
        else if (prev == 0.0 && dist > 0.0) worst = HUGE_VAL;
        prev = dist;
    }
    finish_upper(r, 1.0, worst);
    return r;
}

BoundReport certify_risk_monotone(const Dataset& data, const LossSpec& loss, const GDConfig& cfg) {
    double worst = 0.0, prev = -1.0;
    GDConfig replay = cfg;
    replay.observer = [&](std::uint64_t, std::span<const double> w) {
        const double risk = empirical_risk(data, loss, w);
        if (prev > 0.0) worst = std::max(worst, risk / prev);
        prev = risk;
    };
    run_gd(data, loss, replay);
    auto r = replay_report(data, loss, cfg, "max ratio L(w_{t+1}) / L(w_t)");
    finish_upper(r, 1.0, worst);
    return r;
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double num_from(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

} // namespace

nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j;
    j["kind"] = bound_kind_name(r.query.kind);
    j["params"] = {{"gamma", num(r.query.gamma)}, {"m", r.query.m},     {"T", num(r.query.T)},
                   {"alpha", num(r.query.alpha)}, {"p", num(r.query.p)}, {"epsilon", num(r.query.epsilon)},
                   {"b", num(r.query.b)},         {"C", num(r.query.C)}};
    j["theoretical"] = num(r.theoretical);
    j["empirical"] = num(r.empirical);
    j["satisfied"] = r.satisfied;
    j["slack"] = num(r.slack);
    j["tolerance_used"] = num(r.tolerance_used);
    j["certified"] = r.certified;
    j["status"] = status_name(r.status);
    j["note"] = r.note;
    j["trajectory_ref"] = r.trajectory_ref;
    j["dataset_ref"] = r.dataset_ref;
    return j;
}

BoundReport report_from_json(const nlohmann::json& j) {
    BoundReport r;
    r.query.kind = parse_bound_kind(j.at("kind").get<std::string>());
    const auto& p = j.at("params");
    r.query.gamma = num_from(p.at("gamma"));
    r.query.m = p.at("m").get<std::uint64_t>();
    r.query.T = num_from(p.at("T"));
    r.query.alpha = num_from(p.at("alpha"));
    r.query.p = num_from(p.at("p"));
    r.query.epsilon = num_from(p.at("epsilon"));
    r.query.b = num_from(p.at("b"));
    r.query.C = num_from(p.at("C"));
    r.theoretical = num_from(j.at("theoretical"));
    r.empirical = num_from(j.at("empirical"));
    r.satisfied = j.at("satisfied").get<bool>();
    r.slack = num_from(j.at("slack"));
    r.tolerance_used = num_from(j.at("tolerance_used"));
    r.certified = j.at("certified").get<bool>();
    const auto status = j.at("status").get<std::string>();
    r.status = status == "satisfied" ? BoundStatus::satisfied
               : status == "violated" ? BoundStatus::violated
                                      : BoundStatus::precondition_not_met;
    r.note = j.at("note").get<std::string>();
    r.trajectory_ref = j.at("trajectory_ref").get<std::string>();
    r.dataset_ref = j.at("dataset_ref").get<std::string>();
    return r;
}

} // namespace marginlab
