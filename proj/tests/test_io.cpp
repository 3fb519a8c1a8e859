#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "marginlab/errors.hpp"
#include "marginlab/io.hpp"

using namespace marginlab;

namespace fs = std::filesystem;

TEST_CASE("numbers round-trip through text") {
    for (double v : {0.0, 1.0, -2.5, 1.0 / 3.0, 1e-300, 6.02214076e23, std::numeric_limits<double>::min(),
                     std::numeric_limits<double>::max(), std::nextafter(1.0, 2.0)})
        CHECK(parse_number(format_double(v)) == v);
    CHECK(std::isnan(parse_number(format_double(std::nan("")))));
    CHECK(parse_number(format_double(HUGE_VAL)) == HUGE_VAL);
}

TEST_CASE("rationals parse to the nearest double") {
    CHECK(parse_number("1/8") == 0.125);
    CHECK(parse_number("3/10") == 0.3);
    CHECK(parse_number("19/480") == 19.0 / 480.0);
    CHECK(parse_number(" 1e4 ") == 10000.0);
    CHECK(parse_number("+2") == 2.0);
    CHECK_THROWS_AS(parse_number("1/0"), InvalidParam);
    CHECK_THROWS_AS(parse_number("abc"), InvalidParam);
    CHECK_THROWS_AS(parse_number(""), InvalidParam);
    CHECK_THROWS_AS(parse_number("1/2/3"), InvalidParam);
    CHECK_THROWS_AS(parse_number("0.5x"), InvalidParam);
}

TEST_CASE("trajectory files round-trip") {
    const auto dir = fs::temp_directory_path() / "marginlab_test_io";
    fs::remove_all(dir);
    const auto data = generate_separable(40, 3, 0.25, 8);
    const auto loss = LossSpec::logistic();
    const auto traj = run_sgd(data, loss, SGDConfig{1.0, 300, 4, 16});
    write_trajectory(traj, data, dir, {{"note", "test"}});
    CHECK(fs::exists(dir / "trajectory.csv"));
    CHECK(fs::exists(dir / "iterates.csv"));

    const auto back = read_trajectory(dir, data, loss);
    CHECK(back.method == Method::sgd);
    CHECK(back.final_w == traj.final_w);
    CHECK(*back.averaged_w == *traj.averaged_w);
    CHECK(back.seed == traj.seed);
    CHECK(back.steps == traj.steps);
    REQUIRE(back.checkpoints.size() == traj.checkpoints.size());
    for (std::size_t k = 0; k < traj.checkpoints.size(); ++k) {
        CHECK(back.checkpoints[k].at == traj.checkpoints[k].at);
        CHECK(back.checkpoints[k].w == traj.checkpoints[k].w);
        CHECK(back.checkpoints[k].risk == traj.checkpoints[k].risk);
        CHECK(back.checkpoints[k].max_norm == traj.checkpoints[k].max_norm);
    }

    const auto header = read_text(dir / "trajectory.csv").substr(0, 55);
    CHECK(header == "step_or_time,risk,norm,min_margin,q10_margin,q50_margin");
    // The first checkpoint is the origin, which has no normalized margins.
    CHECK(read_text(dir / "trajectory.csv").find("nan,nan,nan") != std::string::npos);

    CHECK_THROWS_AS(read_trajectory(dir, data, LossSpec::exponential()), InvalidParam);
    CHECK_THROWS_AS(read_trajectory(dir / "missing", data, loss), MissingInput);
    fs::remove_all(dir);
}

TEST_CASE("write_text creates parent directories") {
    const auto dir = fs::temp_directory_path() / "marginlab_test_io_nested";
    fs::remove_all(dir);
    write_text(dir / "a" / "b.txt", "hello");
    CHECK(read_text(dir / "a" / "b.txt") == "hello");
    CHECK_THROWS_AS(read_text(dir / "nothing.txt"), MissingInput);
    fs::remove_all(dir);
}
