#include <doctest.h>

#include <cmath>
#include <vector>

#include "marginlab/bounds.hpp"
#include "marginlab/errors.hpp"

using namespace marginlab;

// Reference values below were computed independently at 50 significant
// digits and frozen here.

TEST_CASE("margin_quantile_bound") {
    const auto e = LossSpec::exponential();
    CHECK(margin_quantile_bound(e, 0.3, std::exp(-4.0), std::exp(-2.0)) == doctest::Approx(0.075).epsilon(1e-14));
    CHECK(margin_quantile_bound(e, 0.2, std::exp(-4.0), 1.0) == 0.1);
    CHECK(margin_quantile_bound(LossSpec::logistic(), 0.4, 0.01, 1.0) == 0.2);
    CHECK(margin_quantile_bound(e, 0.2, 1.0, 1.0) == 0.1);
    CHECK_THROWS_AS(margin_quantile_bound(e, 0.2, 0.1, 0.05), DomainError);
    CHECK_THROWS_AS(margin_quantile_bound(e, 0.2, 0.0, 0.5), DomainError);
    CHECK_THROWS_AS(margin_quantile_bound(e, 0.2, 2.0, 1.0), DomainError);
}

TEST_CASE("flow_risk_bound") {
    CHECK(flow_risk_bound(0.5, 100) == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(flow_risk_bound(1, 1) == 1.0);
    CHECK(flow_risk_bound(0.1, 1e4) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK_THROWS_AS(flow_risk_bound(0.1, 0.0), DomainError);
}

TEST_CASE("gd_logistic_risk_bound") {
    CHECK(gd_logistic_risk_bound(1, 100) == doctest::Approx(0.116037962209568).epsilon(1e-14));
    CHECK(gd_logistic_risk_bound(0.3, 1) == 1.0);
    CHECK(gd_logistic_risk_bound(0.5, 100) == doctest::Approx(0.434151848838272).epsilon(1e-14));
    CHECK_THROWS_AS(gd_logistic_risk_bound(0.5, 0.5), DomainError);
}

TEST_CASE("flow_margin_fraction_bound") {
    const auto a = flow_margin_fraction_bound(0.2, 2500, 0.5);
    CHECK(a.margin == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(a.fraction == doctest::Approx(0.1).epsilon(1e-14));
    const auto b = flow_margin_fraction_bound(0.3, 100, 0.0);
    CHECK(b.margin == doctest::Approx(0.15));
    CHECK(b.fraction == 1.0);
    const auto c = flow_margin_fraction_bound(0.3, 100, 1.0);
    CHECK(c.margin == 0.0);
    CHECK(c.fraction == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
    CHECK_THROWS_AS(flow_margin_fraction_bound(0.1, 50, 0.5), DomainError);
    CHECK_THROWS_AS(flow_margin_fraction_bound(0.5, 50, 1.5), DomainError);
}

TEST_CASE("gd_margin_fraction_bound") {
    const auto a = gd_margin_fraction_bound(1, 100, 1);
    CHECK(a.margin == 0.0);
    CHECK(a.fraction == doctest::Approx(0.424151848838272).epsilon(1e-14));
    const auto b = gd_margin_fraction_bound(0.5, 1e4, 0.5);
    CHECK(b.margin == 0.125);
    CHECK(b.fraction == doctest::Approx(0.368413614879047).epsilon(1e-14));
    const auto c = gd_margin_fraction_bound(0.7, 1000, 0.0);
    CHECK(c.fraction == 2.0);
    CHECK_FALSE(gd_margin_fraction_applicable(1, 4));
    CHECK_FALSE(gd_margin_fraction_applicable(0.25, 1000));
    CHECK(gd_margin_fraction_applicable(0.25, 10000));
    CHECK_THROWS_AS(gd_margin_fraction_bound(0.25, 1000, 0.5), DomainError);
}

TEST_CASE("sgd_margin_fraction_bound") {
    const auto a = sgd_margin_fraction_bound(1, 100, 1);
    CHECK(a.margin == 0.0);
    CHECK(a.fraction == doctest::Approx(0.309434565892181).epsilon(1e-14));
    const auto b = sgd_margin_fraction_bound(1, std::exp(1.0), 0);
    CHECK(b.margin == doctest::Approx(0.2));
    CHECK(b.fraction == doctest::Approx(4.0).epsilon(1e-14));
    const auto c = sgd_margin_fraction_bound(0.5, 1e4, 0.5);
    CHECK(c.margin == doctest::Approx(0.05));
    CHECK(c.fraction == doctest::Approx(3.37150378559980).epsilon(1e-14));
    CHECK_THROWS_AS(sgd_margin_fraction_bound(0.5, 4, 0.5), DomainError);
}

TEST_CASE("poly_margin_bound") {
    CHECK(poly_margin_bound(0.2, 2, 0.25) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(poly_margin_bound(0.3, 1.5, 1.0) == doctest::Approx(0.15));
    CHECK(poly_margin_bound(0.2, 1, 0.1) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK_THROWS_AS(poly_margin_bound(0.2, 1, 0.0), DomainError);
}

TEST_CASE("norm_bound") {
    CHECK(norm_bound(LossSpec::exponential(), 0.5, std::exp(-2.0)) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(norm_bound(LossSpec::exponential(), 0.3, 1.0) == 0.0);
    CHECK(norm_bound(LossSpec::logistic(), 0.3, std::log(2.0)) == 0.0);
    CHECK(norm_bound(LossSpec::logistic(), 1, 0.1) == doctest::Approx(4.50433692208818).epsilon(1e-14));
}

TEST_CASE("sgd_norm_bound") {
    CHECK(sgd_norm_bound(0.5, 100) == doctest::Approx(20.4206807439524).epsilon(1e-14));
    CHECK(sgd_norm_bound(0.3, 1) == 2.0);
    CHECK(sgd_norm_bound(1, std::exp(1.0)) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("lowerbound_violations") {
    CHECK(lowerbound_violations(1000, 0.125, 64) == 38);
    CHECK(lowerbound_violations(1000, 0.125, 6400) == 0);
    CHECK(lowerbound_violations(25, 0.125, 1) == 0);
    CHECK(lowerbound_violations(26, 0.125, 64) == 1);
    CHECK_THROWS_AS(lowerbound_violations(100, 0.2, 64), DomainError);
}

TEST_CASE("generalization_reference") {
    CHECK(generalization_reference(1, 100, 1e12, 1) == doctest::Approx(0.222075924441344).epsilon(1e-12));
    CHECK(generalization_reference(1, 1, 1, 1) == doctest::Approx(4.0).epsilon(1e-15));
    const double g = 0.25, m = 100;
    const double expected = 2.0 * 3.0 / (g * g * m) * (1.0 + std::pow(std::log(g * g * m), 2));
    CHECK(generalization_reference(g, m, m, 3.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("kind names round-trip") {
    for (auto k : {BoundKind::margin_quantile, BoundKind::flow_risk, BoundKind::gd_logistic_risk,
                   BoundKind::flow_margin_fraction, BoundKind::gd_margin_fraction, BoundKind::sgd_margin_fraction,
                   BoundKind::poly_margin, BoundKind::norm, BoundKind::sgd_norm, BoundKind::lowerbound_violations,
                   BoundKind::flow_monitor, BoundKind::generalization_reference})
        CHECK(parse_bound_kind(bound_kind_name(k)) == k);
    CHECK_THROWS_AS(parse_bound_kind("nope"), InvalidParam);
}

namespace {

BoundQuery query(BoundKind k) {
    BoundQuery q;
    q.kind = k;
    return q;
}

void check_invariant(const BoundReport& r) {
    if (r.status == BoundStatus::precondition_not_met) {
        CHECK_FALSE(r.satisfied);
        return;
    }
    CHECK(r.satisfied == (r.slack >= -r.tolerance_used * std::abs(r.theoretical)));
    CHECK(r.satisfied == (r.status == BoundStatus::satisfied));
}

} // namespace

TEST_CASE("certify a logistic GD run") {
    const auto data = generate_separable(100, 5, 0.25, 1);
    const auto traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 1000, 64, std::nullopt, {}});
    for (auto k : {BoundKind::gd_logistic_risk, BoundKind::norm, BoundKind::margin_quantile}) {
        const auto r = certify(traj, data, query(k));
        CHECK(r.satisfied);
        CHECK(r.certified);
        CHECK(r.tolerance_used == exact_tolerance);
        check_invariant(r);
    }
    for (const auto& c : traj.checkpoints) {
        auto q = query(BoundKind::gd_logistic_risk);
        q.T = c.at;
        CHECK(certify(traj, data, q).satisfied);
    }
    const auto pre = certify(traj, data, query(BoundKind::gd_margin_fraction));
    CHECK(pre.status == BoundStatus::precondition_not_met);
    CHECK_THROWS_AS(certify(traj, data, query(BoundKind::flow_risk)), IncompatibleQuery);
    CHECK_THROWS_AS(certify(traj, data, query(BoundKind::generalization_reference)), IncompatibleQuery);
    auto missing = query(BoundKind::gd_logistic_risk);
    missing.T = 12345;
    CHECK_THROWS_AS(certify(traj, data, missing), IncompatibleQuery);
}

TEST_CASE("margin_quantile at p = 1 is vacuous") {
    const auto data = generate_separable(50, 3, 0.2, 4);
    const auto traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 50, 16, std::nullopt, {}});
    const auto r = certify(traj, data, query(BoundKind::margin_quantile));
    CHECK(r.satisfied);
    CHECK(r.theoretical == 0.0);
}

TEST_CASE("exponential GD is refused for smoothness-based bounds") {
    const auto data = generate_separable(40, 3, 0.3, 2);
    const auto traj = run_gd(data, LossSpec::exponential(), GDConfig{1.0, 100, 16, std::nullopt, {}});
    try {
        certify(traj, data, query(BoundKind::norm));
        FAIL("expected IncompatibleQuery");
    } catch (const IncompatibleQuery& e) {
        CHECK(std::string(e.what()).find("uncertified combination") != std::string::npos);
    }
}

TEST_CASE("a violated report is reported, not thrown") {
    const auto data = generate_separable(40, 3, 0.3, 2);
    auto traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 100, 16, std::nullopt, {}});
    traj.checkpoints.back().risk = 10.0;
    const auto r = certify(traj, data, query(BoundKind::gd_logistic_risk));
    CHECK(r.status == BoundStatus::violated);
    CHECK_FALSE(r.satisfied);
    CHECK(r.slack < 0.0);
    check_invariant(r);
}

TEST_CASE("flow reports use the integrator tolerance and are not certified") {
    const auto data = generate_separable(100, 5, 0.5, 3);
    const auto traj = run_flow(data, LossSpec::exponential(), FlowConfig{100.0, 1e-8, 32});
    for (auto k : {BoundKind::flow_risk, BoundKind::flow_monitor, BoundKind::norm, BoundKind::flow_margin_fraction}) {
        const auto r = certify(traj, data, query(k));
        CHECK(r.satisfied);
        CHECK_FALSE(r.certified);
        CHECK(r.tolerance_used == doctest::Approx(1e-7));
        check_invariant(r);
    }
    double worst = 0.0;
    for (const auto& p : flow_monitor(traj, 0.5)) worst = std::max(worst, p.f);
    CHECK(worst <= 1.0 + 1e-7);
    const auto gd_traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 5, 8, std::nullopt, {}});
    CHECK_THROWS_AS(flow_monitor(gd_traj, 0.5), WrongMethod);
    const auto logistic_flow = run_flow(data, LossSpec::logistic(), FlowConfig{10.0, 1e-8, 8});
    CHECK_THROWS_AS(flow_monitor(logistic_flow, 0.5), WrongMethod);
}

TEST_CASE("lower bound on the adversarial dataset") {
    const auto [data, meta] = adversarial_dataset(1000, 0.125, 64);
    const auto traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 64, 16, std::nullopt, {}});
    auto q = query(BoundKind::lowerbound_violations);
    q.gamma = 0.125;
    q.T = 64;
    const auto r = certify(traj, data, q);
    CHECK(r.theoretical == 38.0);
    CHECK(r.empirical >= 38.0);
    CHECK(r.satisfied);
    CHECK(r.tolerance_used == 0.0);
}

TEST_CASE("SGD bounds") {
    const auto data = generate_separable(100, 5, 0.25, 6);
    const auto traj = run_sgd(data, LossSpec::logistic(), SGDConfig{1.0, 10000, 3, 64});
    const auto n = certify(traj, data, query(BoundKind::sgd_norm));
    CHECK(n.satisfied);
    const auto f = certify(traj, data, query(BoundKind::sgd_margin_fraction));
    CHECK_FALSE(f.certified);
    check_invariant(f);

    auto q = query(BoundKind::sgd_margin_fraction);
    q.gamma = 0.25;
    q.T = 10000;
    q.alpha = 0.5;
    const std::vector<double> deltas{0.01, 0.02, 0.0, 0.03};
    const auto e = certify_sgd_expectation(deltas, q);
    CHECK(e.certified);
    CHECK(e.satisfied);
    CHECK(e.empirical == doctest::Approx(0.015));
    check_invariant(e);
    CHECK_THROWS_AS(certify_sgd_expectation(std::vector<double>{0.1}, q), InvalidParam);
}

TEST_CASE("monotone replays") {
    const auto data = generate_separable(80, 4, 0.2, 12);
    const GDConfig cfg{1.0, 2000, 16, std::nullopt, {}};
    const auto d = certify_distance_monotone(data, LossSpec::logistic(), cfg);
    CHECK(d.satisfied);
    CHECK(d.empirical <= 1.0 + 1e-9);
    const auto r = certify_risk_monotone(data, LossSpec::logistic(), cfg);
    CHECK(r.satisfied);
}

TEST_CASE("report JSON round-trip") {
    const auto data = generate_separable(30, 3, 0.3, 1);
    const auto traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 100, 16, std::nullopt, {}});
    for (auto k : {BoundKind::gd_logistic_risk, BoundKind::gd_margin_fraction, BoundKind::margin_quantile}) {
        const auto r = certify(traj, data, query(k));
        const auto back = report_from_json(to_json(r));
        CHECK(to_json(back).dump() == to_json(r).dump());
        CHECK(back.status == r.status);
        if (std::isfinite(r.theoretical)) CHECK(back.theoretical == r.theoretical);
    }
}

TEST_CASE("norm bound at the origin tolerates summation rounding") {
    // The mean of 200 copies of log 2 lands one ulp high.
    const auto data = generate_separable(200, 5, 0.1, 1);
    const auto traj = run_gd(data, LossSpec::logistic(), GDConfig{1.0, 3, 64, std::nullopt, {}});
    BoundQuery q;
    q.kind = BoundKind::norm;
    q.T = 1;
    const auto r = certify(traj, data, q);
    CHECK(r.status == BoundStatus::satisfied);
    CHECK(r.theoretical == 0.0);
}
