#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marginlab/bounds.hpp"
#include "marginlab/dataset.hpp"
#include "marginlab/optim.hpp"

namespace marginlab {

/// Data law with support inside the unit ball and margin gamma w.r.t. w0.
struct DistributionSpec {
    std::vector<double> w0;
    double gamma = 0.25;
    SampleLaw law = SampleLaw::ball_rejection;
    std::string seed_domain = "default";

    std::size_t dim() const noexcept { return w0.size(); }
};

/// m folded i.i.d. samples from `dist`; the dataset's witness is dist.w0.
Dataset sample_dataset(const DistributionSpec& dist, std::size_t m, std::uint64_t seed);

struct GenErrorEstimate {
    double error_rate = 0.0;
    std::size_t n_test = 0;
    double wilson_halfwidth = 0.0;
};

/// 95% Wilson score interval half-width.
double wilson_halfwidth(double rate, std::size_t n);

/// Fraction of fresh samples with x.w <= 0.
GenErrorEstimate estimate_generalization(std::span<const double> w, const DistributionSpec& dist,
                                         std::size_t n_test, std::uint64_t seed);

struct SweepConfig {
    std::vector<Method> methods{Method::gd};
    std::vector<std::string> losses{"logistic"};
    std::vector<double> gammas{0.25};
    std::vector<std::size_t> ms{100};
    std::vector<double> Ts{100};
    double eta = 1.0;
    std::size_t d = 5;
    std::vector<std::uint64_t> seeds{1};
    std::vector<BoundKind> bounds;
    double alpha = 0.5;
    double p = 0.5;
    double rel_tol = 1e-8;
    /// Zero disables generalization estimates.
    std::size_t n_test = 0;
    std::filesystem::path output_dir = "sweep_out";

    static SweepConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Worker count from MARGINLAB_THREADS, defaulting to hardware concurrency.
std::size_t sweep_threads();

/// Runs every grid cell, writing reports/<cell>_<kind>.json and master.csv.
/// Cell failures become status rows; the sweep itself only throws on I/O errors.
std::filesystem::path run_sweep(const SweepConfig& cfg);

struct LowerBoundRun {
    std::uint64_t T = 0;
    AdversarialMeta meta;
    Trajectory trajectory;
    BoundReport report;
};

/// For each T: adversarial dataset, T steps of logistic GD, lower-bound check.
std::vector<LowerBoundRun> lowerbound_campaign(std::size_t m, double gamma,
                                               std::span<const std::uint64_t> T_grid, double eta);

struct InitTimeReport {
    double gamma = 0.0;
    double epsilon = 0.0;
    double eta = 0.0;
    std::uint64_t horizon = 0;
    std::uint64_t first_r_at_least_one = 0;
    double init_time_bound = 0.0;
    bool init_time_ok = false;
    bool r_stays_above = false;
    double s_at_init = 0.0;
    bool s_ok = false;
    bool u_nonpositive_until_init = false;
    std::optional<std::uint64_t> first_crossing;
    double crossing_bound = 0.0;
    bool crossing_ok = false;
    bool s_nondecreasing = false;

    bool all_ok() const noexcept {
        return init_time_ok && r_stays_above && s_ok && u_nonpositive_until_init && crossing_ok &&
               s_nondecreasing;
    }
    nlohmann::json to_json() const;
};

/// Runs the 2-D recursion to `horizon` and checks the initial-phase properties
/// (r reaches 1 within 32/(5 eta) + 1 steps and stays >= 15/16 afterwards,
/// s <= 3/10 at that time, u <= 0 before it) and the crossing-time bound
/// t >= 19 / (480 gamma^2 eps). Throws HorizonTooShort.
InitTimeReport inittime_check(double gamma, double epsilon, double eta, std::uint64_t horizon);

struct PlateauReport {
    std::vector<double> error_small;
    std::vector<double> error_large;
    double mean_small = 0.0;
    double mean_large = 0.0;
    double threshold = 0.0;
    bool holds = false;
    nlohmann::json to_json() const;
};

/// Logistic GD (eta = 1) to T_small and T_large on the same training set per
/// seed; holds iff mean error(T_large) <= 2 mean error(T_small) + 2/n_test.
PlateauReport plateau_check(const DistributionSpec& dist, std::size_t m, std::uint64_t T_small,
                            std::uint64_t T_large, std::span<const std::uint64_t> seeds,
                            std::size_t n_test);

/// Report for the non-certified reference curve against a measured error.
BoundReport reference_report(const GenErrorEstimate& estimate, const BoundQuery& query);

} // namespace marginlab
