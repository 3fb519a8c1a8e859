#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "marginlab/bounds.hpp"
#include "marginlab/cli.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/io.hpp"

using namespace marginlab;

namespace fs = std::filesystem;

namespace {

fs::path work() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "marginlab_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

/// Runs the CLI binary with `args`, capturing stdout and stderr in `log`.
int cli(const std::string& args, const fs::path& log = work() / "last.log") {
    const char* bin = std::getenv("MARGINLAB_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "MARGINLAB_BIN must point at the marginlab binary");
    const std::string cmd = "\"" + std::string(bin) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string out(const std::string& name) { return (work() / name).string(); }

} // namespace

TEST_CASE("run then verify") {
    CHECK(cli("run --method gd --loss logistic --gamma 0.25 --m 100 --steps 1000 --eta 1 --seed 1 --out " +
              out("gd")) == 0);
    CHECK(fs::exists(work() / "gd" / "trajectory.csv"));
    CHECK(fs::exists(work() / "gd" / "config.json"));
    CHECK(cli("verify --in " + out("gd") + " --bounds gd_logistic_risk,gd_margin_fraction --alpha 0.5") == 0);
    CHECK(fs::exists(work() / "gd" / "verify" / "reports" / "gd_logistic_risk.json"));
    CHECK(fs::exists(work() / "gd" / "verify" / "config.json"));
}

TEST_CASE("verify exit codes") {
    CHECK(cli("run --steps 200 --out " + out("short")) == 0);
    // Every report blocked by its precondition.
    CHECK(cli("verify --in " + out("short") + " --bounds gd_margin_fraction") == 2);
    // Claiming a larger margin than the data has breaks the norm bound.
    CHECK(cli("verify --in " + out("short") + " --bounds norm --gamma 1") == 1);
    // A bound for another method is a usage error.
    CHECK(cli("verify --in " + out("short") + " --bounds flow_risk") == 3);
    CHECK(cli("verify --in " + out("short") + " --bounds nonsense") == 3);
    CHECK(cli("verify --in " + out("nowhere") + " --bounds norm") == 4);
}

TEST_CASE("usage errors") {
    CHECK(cli("run --loss bogus --out " + out("bogus")) == 3);
    CHECK(cli("run --bogus-flag 1 --out " + out("bogus")) == 3);
    CHECK(cli("run --gamma 1/0 --out " + out("bogus")) == 3);
    CHECK(cli("run --steps 2.5 --out " + out("bogus")) == 3);
    CHECK(cli("run") == 3);
    CHECK(cli("") == 3);
    CHECK(cli("frobnicate") == 3);
    CHECK(cli("inittime --horizon 3 --out " + out("bogus")) == 3);
}

TEST_CASE("runtime errors") {
    const auto [data, meta] = figure_dataset(10, 0.2);
    write_dataset(data, work() / "fig.csv");
    CHECK(cli("run --loss poly:2 --eta 1e200 --steps 50 --data " + out("fig.csv") + " --out " + out("diverge")) == 4);
}

TEST_CASE("rational flags") {
    CHECK(cli("run --gamma 1/4 --steps 10 --out " + out("rational")) == 0);
    const auto cfg = nlohmann::json::parse(read_text(work() / "rational" / "config.json"));
    CHECK(cfg["gamma"].get<double>() == 0.25);
}

TEST_CASE("re-running with identical flags reproduces the content") {
    for (const std::string method : {"gd", "sgd", "flow"}) {
        const std::string flags = "run --method " + method + " --steps 300 --t-end 50 --seed 4 --out ";
        CHECK(cli(flags + out("again_a")) == 0);
        CHECK(cli(flags + out("again_b")) == 0);
        for (const char* f : {"config.json", "data.csv", "data.meta.json", "trajectory.csv", "iterates.csv", "final.json"})
            CHECK(read_text(work() / "again_a" / f) == read_text(work() / "again_b" / f));
        fs::remove_all(work() / "again_a");
        fs::remove_all(work() / "again_b");
    }
}

TEST_CASE("lowerbound, inittime and gen-error") {
    CHECK(cli("lowerbound --m 1000 --gamma 1/8 --T 64,256 --out " + out("lb")) == 0);
    const auto r = report_from_json(nlohmann::json::parse(read_text(work() / "lb" / "reports" / "lowerbound_T64.json")));
    CHECK(r.theoretical == 38.0);
    CHECK(r.satisfied);
    CHECK(cli("inittime --gamma 1/8 --epsilon 1/16 --eta 1/2 --horizon 1e4 --out " + out("it")) == 0);
    CHECK(fs::exists(work() / "it" / "reports" / "inittime.json"));
    CHECK(cli("run --steps 100 --out " + out("ge")) == 0);
    CHECK(cli("gen-error --in " + out("ge") + " --n-test 2000") == 0);
    const auto g = nlohmann::json::parse(read_text(work() / "ge" / "gen_error" / "reports" / "gen_error.json"));
    CHECK(g["error_rate"].get<double>() >= 0.0);
    CHECK_FALSE(g["reference"]["certified"].get<bool>());
}

TEST_CASE("sweep") {
    write_text(work() / "sweep.json", R"({"methods":["gd"],"losses":["logistic","exp"],"gammas":[0.25],"ms":[50],
        "Ts":[100],"seeds":[1],"bounds":["gd_logistic_risk"]})");
    CHECK(cli("sweep --config " + out("sweep.json") + " --out " + out("sw")) == 0);
    CHECK(fs::exists(work() / "sw" / "master.csv"));
    CHECK(fs::exists(work() / "sw" / "config.json"));
    write_text(work() / "bad.json", R"({"gammas":[2]})");
    CHECK(cli("sweep --config " + out("bad.json")) == 3);
}

TEST_CASE("plot data") {
    CHECK(cli("run --steps 100 --checkpoints 20 --out " + out("plot")) == 0);
    CHECK(cli("plot-data --in " + out("plot")) == 0);
    const auto csv = read_text(work() / "plot" / "plot_data.csv");
    std::size_t risk_rows = 0, pos = 0;
    while ((pos = csv.find("\nrun/risk,", pos)) != std::string::npos) {
        ++risk_rows;
        ++pos;
    }
    const auto traj = read_text(work() / "plot" / "trajectory.csv");
    CHECK(risk_rows == static_cast<std::size_t>(std::count(traj.begin(), traj.end(), '\n')) - 1);
    CHECK(csv.find("run/bound_gd_logistic_risk,") != std::string::npos);

    CHECK(cli("lowerbound --figure1 --m 100 --steps 50 --out " + out("fig1")) == 0);
    CHECK(cli("plot-data --in " + out("fig1")) == 0);
    CHECK(read_text(work() / "fig1" / "plot_data.csv").find("figure1/path,") != std::string::npos);

    fs::create_directories(work() / "empty");
    CHECK(cli("plot-data --in " + out("empty")) == 4);
    CHECK_THROWS_AS(emit_plot_data(work() / "empty"), MissingInput);
}

TEST_CASE("help output matches the snapshots") {
    for (const std::string sub : {"", "run", "verify", "lowerbound", "inittime", "sweep", "gen-error", "plot-data"}) {
        const auto log = work() / "help.log";
        CHECK(cli(sub + " --help", log) == 0);
        const auto name = sub.empty() ? std::string("help.txt") : "help_" + sub + ".txt";
        CHECK_MESSAGE(read_text(log) == read_text(fs::path(SNAPSHOT_DIR) / name), name);
    }
}
