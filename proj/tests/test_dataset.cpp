#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "marginlab/dataset.hpp"
#include "marginlab/errors.hpp"

using namespace marginlab;

namespace {

Dataset make(std::vector<double> pts, std::vector<double> w0, double gamma) {
    const auto d = w0.size();
    return Dataset(std::move(pts), d, std::move(w0), gamma, "test");
}

MarginProfile profile_of(std::vector<double> margins) {
    MarginProfile p;
    p.margins = std::move(margins);
    p.predictor_norm = 1.0;
    return p;
}

} // namespace

TEST_CASE("dataset validation") {
    CHECK_NOTHROW(make({1.0, 0.0}, {1.0, 0.0}, 1.0));
    CHECK_THROWS_AS(make({1.1, 0.0}, {1.0, 0.0}, 0.5), InvalidParam);
    CHECK_THROWS_AS(make({0.1, 0.0}, {1.0, 0.0}, 0.5), InvalidParam);
    CHECK_THROWS_AS(make({1.0, 0.0}, {2.0, 0.0}, 0.5), InvalidParam);
    CHECK_THROWS_AS(make({1.0, 0.0}, {1.0, 0.0}, 0.0), InvalidParam);
    CHECK_THROWS_AS(make({1.0, 0.0, 1.0}, {1.0, 0.0}, 0.5), InvalidParam);
    CHECK_THROWS_AS(make({NAN, 0.0}, {1.0, 0.0}, 0.5), InvalidParam);
}

TEST_CASE("generate_separable postconditions") {
    const auto data = generate_separable(5, 3, 0.3, 7);
    CHECK(data.size() == 5);
    CHECK(data.dim() == 3);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(norm(data.point(i)) <= 1.0);
        CHECK(dot(data.point(i), data.witness()) >= 0.3);
    }
}

TEST_CASE("generate_separable with gamma = 1 in one dimension") {
    for (std::uint64_t seed : {0, 1, 2, 99}) {
        const auto data = generate_separable(1, 1, 1.0, seed);
        CHECK(std::abs(data.point(0)[0]) == 1.0);
        CHECK(data.point(0)[0] == data.witness()[0]);
    }
}

TEST_CASE("generate_separable is deterministic per seed") {
    const auto a = generate_separable(100, 10, 0.25, 1);
    const auto b = generate_separable(100, 10, 0.25, 1);
    const auto c = generate_separable(100, 10, 0.25, 2);
    CHECK(std::ranges::equal(a.flat(), b.flat()));
    CHECK(std::vector<double>(a.witness().begin(), a.witness().end()) ==
          std::vector<double>(b.witness().begin(), b.witness().end()));
    CHECK_FALSE(std::ranges::equal(a.flat(), c.flat()));
}

TEST_CASE("two_cluster law stays inside the feasible set") {
    const std::vector<double> w0{0.6, 0.8, 0.0};
    const SeparableSampler sampler(w0, 0.4, SampleLaw::two_cluster);
    std::mt19937_64 rng(3);
    std::vector<double> x(3);
    for (int i = 0; i < 1000; ++i) {
        sampler.draw(rng, x);
        CHECK(norm(x) <= 1.0);
        CHECK(dot(x, w0) >= 0.4);
    }
}

TEST_CASE("adversarial dataset at gamma^2 T = 1") {
    const auto [data, meta] = adversarial_dataset(1000, 0.125, 64);
    CHECK(meta.minority_count == 38);
    CHECK(meta.epsilon == doctest::Approx(0.038));
    CHECK_FALSE(meta.degenerate);
    CHECK(meta.gamma_eff == 0.125);
    CHECK(data.size() == 1000);
    CHECK(data.point(0)[0] == 1.0);
    CHECK(data.point(999)[0] == -0.5);
    CHECK(data.point(999)[1] == 0.375);
    CHECK(misclassified_count(data, data.witness()) == 0);
}

TEST_CASE("adversarial dataset degenerates for long horizons") {
    const auto [data, meta] = adversarial_dataset(10, 0.125, 6400);
    CHECK(meta.minority_count == 0);
    CHECK(meta.degenerate);
    CHECK(meta.gamma_eff == 0.125);
    CHECK_THROWS_AS(adversarial_dataset(10, 0.2, 64), InvalidParam);
}

TEST_CASE("adversarial dataset keeps gamma_eff^2 T >= 1 once T >= 64") {
    for (std::uint64_t T : {64, 100, 1000, 100000}) {
        const auto [data, meta] = adversarial_dataset(100, 0.01, T);
        CHECK(meta.gamma_eff * meta.gamma_eff * static_cast<double>(T) >= 1.0 - 1e-12);
    }
    // Short horizons clamp at 1/8 so the minority point stays in the unit ball.
    const auto [data, meta] = adversarial_dataset(100, 0.01, 4);
    CHECK(meta.gamma_eff == 0.125);
}

TEST_CASE("figure dataset uses a 90/10 split") {
    const auto [data, meta] = figure_dataset(100, 0.2);
    CHECK(meta.minority_count == 10);
    CHECK(data.point(99)[0] == -0.5);
    CHECK(data.point(99)[1] == doctest::Approx(0.6));
}

TEST_CASE("margin_profile examples") {
    const auto one = make({1.0, 0.0}, {1.0, 0.0}, 1.0);
    const std::vector<double> w{3.0, 4.0};
    const auto p = margin_profile(one, w);
    REQUIRE(p.size() == 1);
    CHECK(p.margins[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.predictor_norm == doctest::Approx(5.0));

    const auto data = generate_separable(50, 4, 0.2, 11);
    const auto q = margin_profile(data, data.witness());
    CHECK(q.margins.front() >= 0.2 - 1e-12);
    CHECK_THROWS_AS(margin_profile(data, std::vector<double>(4, 0.0)), ZeroVector);
    CHECK_THROWS_AS(margin_profile(data, std::vector<double>(3, 1.0)), DimensionMismatch);
}

TEST_CASE("violation_count examples") {
    const auto p = profile_of({0.1, 0.2, 0.3});
    CHECK(violation_count(p, 0.15) == 1);
    CHECK(violation_count(p, -1.0) == 0);
    CHECK(violation_count(p, 0.3) == 3);
}

TEST_CASE("margin_at_quantile examples") {
    const auto p = profile_of({0.1, 0.2, 0.3});
    CHECK(margin_at_quantile(p, 0.34) == 0.2);
    CHECK(margin_at_quantile(p, 0.0) == 0.1);
    CHECK(margin_at_quantile(p, 1.0) == 0.3);
}

TEST_CASE("misclassified_count examples") {
    const auto data = make({1.0, 0.0, -0.5, 0.6}, {0.6, 0.8}, 0.17);
    CHECK(misclassified_count(data, std::vector<double>{1.0, 0.0}) == 1);
    CHECK(misclassified_count(data, data.witness()) == 0);
    const auto one = make({1.0, 0.0}, {1.0, 0.0}, 1.0);
    CHECK(misclassified_count(one, std::vector<double>{0.0, 0.0}) == 1);
}

TEST_CASE("dataset round-trips through CSV bit-exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "marginlab_test_dataset";
    std::filesystem::remove_all(dir);
    const auto data = generate_separable(40, 6, 0.17, 5);
    write_dataset(data, dir / "d.csv");
    CHECK(std::filesystem::exists(dir / "d.meta.json"));
    const auto back = read_dataset(dir / "d.csv");
    CHECK(std::ranges::equal(back.flat(), data.flat()));
    CHECK(back.gamma() == data.gamma());
    CHECK(back.tag() == data.tag());
    CHECK_THROWS_AS(read_dataset(dir / "missing.csv"), MissingInput);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    CHECK(mix_seed(7, 3) == mix_seed(7, 3));
}
