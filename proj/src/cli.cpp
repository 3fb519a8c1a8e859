#include "marginlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "marginlab/bounds.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/experiment.hpp"
#include "marginlab/io.hpp"

namespace marginlab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_violated = 1;
constexpr int exit_precondition = 2;
constexpr int exit_usage = 3;
constexpr int exit_runtime = 4;

double number_flag(std::string_view flag, const std::string& text) {
    try {
        return parse_number(text);
    } catch (const InvalidParam& e) {
        throw InvalidParam("--" + std::string(flag) + ": " + e.what());
    }
}

std::uint64_t count_flag(std::string_view flag, const std::string& text) {
    const double v = number_flag(flag, text);
    if (!(v >= 0.0 && v <= 9007199254740992.0) || std::floor(v) != v)
        throw InvalidParam("--" + std::string(flag) + ": expected a nonnegative integer, got '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<std::uint64_t> count_list(std::string_view flag, const std::vector<std::string>& items) {
    std::vector<std::uint64_t> out;
    for (const auto& s : items) out.push_back(count_flag(flag, s));
    return out;
}

void echo_config(const fs::path& dir, const json& config) {
    write_text(dir / "config.json", config.dump(2) + "\n");
}

void write_report(const fs::path& file, const BoundReport& r) { write_text(file, to_json(r).dump(2) + "\n"); }

void print_report(const BoundReport& r) {
    std::cout << bound_kind_name(r.query.kind) << ": " << status_name(r.status)
              << (r.certified ? "" : " (not certified)") << "  theoretical=" << format_double(r.theoretical)
              << "  empirical=" << format_double(r.empirical) << "  slack=" << format_double(r.slack);
    if (!r.note.empty()) std::cout << "  [" << r.note << "]";
    std::cout << '\n';
}

int exit_for(const std::vector<BoundReport>& reports) {
    bool violated = false, all_precondition = !reports.empty();
    for (const auto& r : reports) {
        if (r.status == BoundStatus::violated && r.certified) violated = true;
        if (r.status != BoundStatus::precondition_not_met) all_precondition = false;
    }
    if (violated) return exit_violated;
    return all_precondition ? exit_precondition : exit_ok;
}

// ---- run ------------------------------------------------------------------

struct RunArgs {
    std::string method = "gd";
    std::string loss = "logistic";
    std::string gamma = "1/4";
    std::string m = "100";
    std::string d = "5";
    std::string steps = "1000";
    std::string t_end = "100";
    std::string eta = "1";
    std::string seed = "1";
    std::string rel_tol = "1e-8";
    std::string checkpoints = "64";
    std::string target_risk;
    std::string data;
    std::string out;
};

int do_run(const RunArgs& a) {
    const auto method = parse_method(a.method);
    const auto loss = LossSpec::parse(a.loss);
    const auto seed = count_flag("seed", a.seed);
    const auto steps = count_flag("steps", a.steps);
    const auto checkpoints = static_cast<std::size_t>(count_flag("checkpoints", a.checkpoints));
    const double eta = number_flag("eta", a.eta);
    const double t_end = number_flag("t-end", a.t_end);
    const double rel_tol = number_flag("rel-tol", a.rel_tol);
    if (checkpoints < 2) throw InvalidParam("--checkpoints must be at least 2");

    const Dataset data = a.data.empty() ? generate_separable(static_cast<std::size_t>(count_flag("m", a.m)),
                                                             static_cast<std::size_t>(count_flag("d", a.d)),
                                                             number_flag("gamma", a.gamma), seed)
                                        : read_dataset(a.data);

    json config{{"subcommand", "run"},
                {"method", method_name(method)},
                {"loss", loss.tag()},
                {"gamma", data.gamma()},
                {"m", data.size()},
                {"d", data.dim()},
                {"seed", seed},
                {"dataset", data.tag()},
                {"checkpoints", checkpoints}};

    const fs::path out = a.out;
    Trajectory traj;
    switch (method) {
    case Method::gd: {
        GDConfig cfg{eta, steps, checkpoints, std::nullopt, {}};
        if (!a.target_risk.empty()) cfg.target_risk = number_flag("target-risk", a.target_risk);
        config["eta"] = eta;
        config["steps"] = steps;
        config["target_risk"] = cfg.target_risk ? json(*cfg.target_risk) : json(nullptr);
        traj = run_gd(data, loss, cfg);
        break;
    }
    case Method::sgd: {
        const auto sgd_seed = mix_seed(seed, 1);
        config["eta"] = eta;
        config["steps"] = steps;
        config["sgd_seed"] = sgd_seed;
        traj = run_sgd(data, loss, SGDConfig{eta, steps, sgd_seed, checkpoints});
        break;
    }
    case Method::flow:
        config["t_end"] = t_end;
        config["rel_tol"] = rel_tol;
        traj = run_flow(data, loss, FlowConfig{t_end, rel_tol, checkpoints});
        break;
    }

    echo_config(out, config);
    write_dataset(data, out / "data.csv");
    write_trajectory(traj, data, out, config);
    const auto& fin = traj.final_checkpoint();
    std::cout << method_name(method) << " on " << data.tag() << ": final risk " << format_double(fin.risk)
              << ", max norm " << format_double(traj.max_norm_seen) << (traj.uncertified ? " (uncertified)" : "")
              << "\nwrote " << out.string() << '\n';
    return exit_ok;
}

// ---- verify ---------------------------------------------------------------

struct VerifyArgs {
    std::string in;
    std::vector<std::string> bounds;
    std::string alpha = "1/2";
    std::string p = "1";
    std::string T = "0";
    std::string gamma;
    std::string out;
};

Trajectory load_run(const fs::path& dir, const Dataset& data) {
    if (!fs::exists(dir / "final.json")) throw MissingInput("no final.json in " + dir.string());
    const auto fin = json::parse(read_text(dir / "final.json"));
    return read_trajectory(dir, data, LossSpec::parse(fin.at("loss").get<std::string>()));
}

int do_verify(const VerifyArgs& a) {
    const fs::path in = a.in;
    const fs::path out = a.out.empty() ? in / "verify" : fs::path(a.out);
    const auto data = read_dataset(in / "data.csv");
    const auto traj = load_run(in, data);

    BoundQuery base;
    base.alpha = number_flag("alpha", a.alpha);
    base.p = number_flag("p", a.p);
    base.T = number_flag("T", a.T);
    base.gamma = a.gamma.empty() ? data.gamma() : number_flag("gamma", a.gamma);

    std::vector<BoundKind> kinds;
    for (const auto& b : a.bounds) kinds.push_back(parse_bound_kind(b));

    json config{{"subcommand", "verify"}, {"in", in.string()},     {"alpha", base.alpha}, {"p", base.p},
                {"T", base.T},             {"gamma", base.gamma}, {"bounds", a.bounds}};
    echo_config(out, config);

    std::vector<BoundReport> reports;
    bool incompatible = false;
    for (auto kind : kinds) {
        auto q = base;
        q.kind = kind;
        try {
            auto r = certify(traj, data, q);
            write_report(out / "reports" / (std::string(bound_kind_name(kind)) + ".json"), r);
            print_report(r);
            reports.push_back(std::move(r));
        } catch (const IncompatibleQuery& e) {
            std::cerr << "error: " << e.what() << '\n';
            incompatible = true;
        }
    }
    const int code = exit_for(reports);
    if (code == exit_violated) return code;
    return incompatible ? exit_usage : code;
}

// ---- lowerbound -----------------------------------------------------------

struct LowerboundArgs {
    std::string m = "1000";
    std::string gamma = "1/8";
    std::vector<std::string> T{"64", "256", "1024"};
    std::string eta = "1";
    bool figure1 = false;
    std::string figure_gamma = "1/5";
    std::string steps = "200";
    std::string out;
};

int do_figure(const LowerboundArgs& a) {
    const auto m = static_cast<std::size_t>(count_flag("m", a.m));
    const double gamma = number_flag("figure-gamma", a.figure_gamma);
    const double eta = number_flag("eta", a.eta);
    const auto steps = count_flag("steps", a.steps);
    auto [data, meta] = figure_dataset(m, gamma);
    json config{{"subcommand", "lowerbound"}, {"figure1", true},  {"m", m},          {"figure_gamma", gamma},
                {"eta", eta},                 {"steps", steps}, {"dataset", data.tag()}};
    const fs::path out = fs::path(a.out) / "figure1";
    echo_config(a.out, config);
    const auto traj = run_gd(data, LossSpec::logistic(), GDConfig{eta, steps, steps + 1, std::nullopt, {}});
    write_dataset(data, out / "data.csv");
    write_trajectory(traj, data, out, config);
    std::cout << "figure trajectory (r, s) over " << steps << " steps written to " << out.string() << '\n';
    return exit_ok;
}

int do_lowerbound(const LowerboundArgs& a) {
    if (a.figure1) return do_figure(a);
    const auto m = static_cast<std::size_t>(count_flag("m", a.m));
    const double gamma = number_flag("gamma", a.gamma);
    const double eta = number_flag("eta", a.eta);
    const auto grid = count_list("T", a.T);
    json config{{"subcommand", "lowerbound"}, {"m", m}, {"gamma", gamma}, {"eta", eta}, {"T", grid}};
    const fs::path out = a.out;
    echo_config(out, config);

    const auto runs = lowerbound_campaign(m, gamma, grid, eta);
    std::vector<BoundReport> reports;
    for (const auto& run : runs) {
        const auto sub = out / ("T" + std::to_string(run.T));
        auto [data, meta] = adversarial_dataset(m, gamma, run.T);
        json cell = config;
        cell["T"] = run.T;
        cell["gamma_eff"] = meta.gamma_eff;
        cell["minority_count"] = meta.minority_count;
        write_dataset(data, sub / "data.csv");
        write_trajectory(run.trajectory, data, sub, cell);
        write_report(out / "reports" / ("lowerbound_T" + std::to_string(run.T) + ".json"), run.report);
        std::cout << "T=" << run.T << " ";
        print_report(run.report);
        reports.push_back(run.report);
    }
    return exit_for(reports);
}

// ---- inittime -------------------------------------------------------------

struct InittimeArgs {
    std::string gamma = "1/8";
    std::string epsilon = "1/8";
    std::string eta = "1";
    std::string horizon = "1000000";
    std::string out;
};

int do_inittime(const InittimeArgs& a) {
    const double gamma = number_flag("gamma", a.gamma);
    const double epsilon = number_flag("epsilon", a.epsilon);
    const double eta = number_flag("eta", a.eta);
    const auto horizon = count_flag("horizon", a.horizon);
    echo_config(a.out, {{"subcommand", "inittime"},
                        {"gamma", gamma},
                        {"epsilon", epsilon},
                        {"eta", eta},
                        {"horizon", horizon}});
    const auto r = inittime_check(gamma, epsilon, eta, horizon);
    const auto j = r.to_json();
    write_text(fs::path(a.out) / "reports" / "inittime.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << '\n';
    return r.all_ok() ? exit_ok : exit_violated;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
    std::string config;
    std::string out;
};

int do_sweep(const SweepArgs& a) {
    auto cfg = SweepConfig::from_json(json::parse(read_text(a.config)));
    if (!a.out.empty()) cfg.output_dir = a.out;
    const auto dir = run_sweep(cfg);
    std::istringstream csv(read_text(dir / "master.csv"));
    std::string line;
    std::getline(csv, line);
    bool violated = false, failed = false;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        if (line.ends_with(",violated")) violated = true;
        if (line.find(",error: ") != std::string::npos || line.find(",\"error: ") != std::string::npos)
            failed = true;
    }
    std::cout << rows << " cells written to " << dir.string() << '\n';
    if (violated) return exit_violated;
    return failed ? exit_runtime : exit_ok;
}

// ---- gen-error ------------------------------------------------------------

struct GenErrorArgs {
    std::string in;
    std::string n_test = "100000";
    std::string seed = "1";
    std::string law = "ball_rejection";
    std::string C = "50";
    std::string out;
};

int do_gen_error(const GenErrorArgs& a) {
    const fs::path in = a.in;
    const fs::path out = a.out.empty() ? in / "gen_error" : fs::path(a.out);
    const auto data = read_dataset(in / "data.csv");
    const auto traj = load_run(in, data);
    const auto n_test = static_cast<std::size_t>(count_flag("n-test", a.n_test));
    const auto seed = count_flag("seed", a.seed);
    const double C = number_flag("C", a.C);
    if (a.law != "ball_rejection" && a.law != "two_cluster")
        throw InvalidParam("--law: expected ball_rejection or two_cluster");

    DistributionSpec dist;
    dist.w0.assign(data.witness().begin(), data.witness().end());
    dist.gamma = data.gamma();
    dist.law = a.law == "two_cluster" ? SampleLaw::two_cluster : SampleLaw::ball_rejection;
    dist.seed_domain = "gen-error";

    echo_config(out, {{"subcommand", "gen-error"},
                      {"in", in.string()},
                      {"n_test", n_test},
                      {"seed", seed},
                      {"law", a.law},
                      {"C", C}});
    const auto& w = traj.averaged_w ? *traj.averaged_w : traj.final_w;
    const auto est = estimate_generalization(w, dist, n_test, seed);

    BoundQuery q;
    q.kind = BoundKind::generalization_reference;
    q.gamma = data.gamma();
    q.m = data.size();
    q.T = traj.method == Method::flow ? traj.final_checkpoint().at : static_cast<double>(std::max<std::uint64_t>(traj.steps, 1));
    q.C = C;
    const auto ref = reference_report(est, q);
    json j{{"error_rate", est.error_rate},
           {"n_test", est.n_test},
           {"wilson_halfwidth", est.wilson_halfwidth},
           {"law", a.law},
           {"reference", to_json(ref)}};
    write_text(out / "reports" / "gen_error.json", j.dump(2) + "\n");
    std::cout << "test error " << format_double(est.error_rate) << " +/- " << format_double(est.wilson_halfwidth)
              << " (n=" << n_test << "), reference curve " << format_double(ref.theoretical) << '\n';
    return exit_ok;
}

// ---- plot-data ------------------------------------------------------------

std::vector<std::vector<std::string>> read_rows(const fs::path& file) {
    std::istringstream in(read_text(file));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        rows.push_back(std::move(cols));
    }
    return rows;
}

void emit_series(std::string& out, const std::string& series, const std::string& x, const std::string& y) {
    out += series + ',' + x + ',' + y + '\n';
}

void emit_run(std::string& out, const fs::path& dir, const std::string& prefix) {
    const auto fin = json::parse(read_text(dir / "final.json"));
    const auto method = parse_method(fin.at("method").get<std::string>());
    const auto loss = LossSpec::parse(fin.at("loss").get<std::string>());
    const double eta = fin.at("eta").get<double>();
    std::optional<double> gamma;
    if (fs::exists(dir / "data.meta.json"))
        gamma = json::parse(read_text(dir / "data.meta.json")).at("gamma").get<double>();

    const auto traj = read_rows(dir / "trajectory.csv");
    static const char* columns[] = {"risk", "norm", "min_margin", "q10_margin", "q50_margin"};
    for (std::size_t c = 0; c < 5; ++c)
        for (const auto& row : traj) emit_series(out, prefix + "/" + columns[c], row.at(0), row.at(c + 1));

    const auto iters = read_rows(dir / "iterates.csv");
    const std::size_t d = iters.empty() ? 0 : iters.front().size() - 2;
    for (std::size_t j = 0; j < d; ++j)
        for (const auto& row : iters) emit_series(out, prefix + "/w" + std::to_string(j), row.at(0), row.at(j + 2));
    if (d == 2)
        for (const auto& row : iters) emit_series(out, prefix + "/path", row.at(2), row.at(3));

    if (!gamma) return;
    for (const auto& row : traj) {
        const double at = parse_number(row.at(0));
        const double risk = parse_number(row.at(1));
        if (method == Method::gd && loss.kind() == LossKind::logistic && eta == 1.0)
            emit_series(out, prefix + "/bound_gd_logistic_risk", row.at(0),
                        format_double(gd_logistic_risk_bound(*gamma, at)));
        if (method == Method::flow && loss.kind() == LossKind::exponential && at > 0.0)
            emit_series(out, prefix + "/bound_flow_risk", row.at(0), format_double(flow_risk_bound(*gamma, at)));
        if (method == Method::sgd && loss.kind() == LossKind::logistic && eta == 1.0)
            emit_series(out, prefix + "/bound_sgd_norm", row.at(0), format_double(sgd_norm_bound(*gamma, at)));
        const bool smooth = method == Method::flow ||
                            (method == Method::gd && loss.smoothness() && eta * *loss.smoothness() <= 1.0);
        if (smooth && risk > 0.0 && risk <= loss.value_at_zero())
            emit_series(out, prefix + "/bound_norm", row.at(0), format_double(norm_bound(loss, *gamma, risk)));
    }
}

struct PlotArgs {
    std::string in;
};

int do_plot(const PlotArgs& a) {
    const auto file = emit_plot_data(a.in);
    std::cout << "wrote " << file.string() << '\n';
    return exit_ok;
}

} // namespace

fs::path emit_plot_data(const fs::path& report_dir) {
    if (!fs::is_directory(report_dir)) throw MissingInput("not a directory: " + report_dir.string());
    std::vector<fs::path> runs;
    for (const auto& entry : fs::recursive_directory_iterator(report_dir))
        if (entry.is_regular_file() && entry.path().filename() == "iterates.csv" &&
            fs::exists(entry.path().parent_path() / "final.json") &&
            fs::exists(entry.path().parent_path() / "trajectory.csv"))
            runs.push_back(entry.path().parent_path());
    if (runs.empty()) throw MissingInput("no trajectories under " + report_dir.string());
    std::sort(runs.begin(), runs.end());

    std::string out = "series,x,y\n";
    for (const auto& dir : runs) {
        auto rel = fs::relative(dir, report_dir).generic_string();
        emit_run(out, dir, rel == "." ? "run" : rel);
    }
    const auto file = report_dir / "plot_data.csv";
    write_text(file, out);
    return file;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"marginlab: margin and risk certification for linear classifiers on separable data", "marginlab"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    RunArgs run;
    auto* s_run = app.add_subcommand("run", "Generate or load a dataset and run an optimizer");
    s_run->add_option("--method", run.method, "gd, sgd or flow");
    s_run->add_option("--loss", run.loss, "exp, logistic or poly:<b>");
    s_run->add_option("--gamma", run.gamma, "Margin of the generated dataset")->type_name("NUM");
    s_run->add_option("--m", run.m, "Number of points")->type_name("NUM");
    s_run->add_option("--d", run.d, "Dimension")->type_name("NUM");
    s_run->add_option("--steps", run.steps, "Updates for gd and sgd")->type_name("NUM");
    s_run->add_option("--t-end", run.t_end, "Horizon for flow")->type_name("NUM");
    s_run->add_option("--eta", run.eta, "Step size for gd and sgd")->type_name("NUM");
    s_run->add_option("--seed", run.seed, "Dataset seed; the sgd stream derives from it")->type_name("NUM");
    s_run->add_option("--rel-tol", run.rel_tol, "Flow integrator tolerance")->type_name("NUM");
    s_run->add_option("--checkpoints", run.checkpoints, "Number of recorded checkpoints")->type_name("NUM");
    s_run->add_option("--target-risk", run.target_risk, "Stop gd once the risk reaches this value")->type_name("NUM");
    s_run->add_option("--data", run.data, "Read this dataset CSV instead of generating one");
    s_run->add_option("--out", run.out, "Output directory")->required();

    VerifyArgs verify;
    auto* s_verify = app.add_subcommand("verify", "Certify bounds against a stored run");
    s_verify->add_option("--in", verify.in, "Directory written by run")->required();
    s_verify->add_option("--bounds", verify.bounds, "Comma-separated bound kinds")->required()->delimiter(',')->type_name("LIST")->default_str("");
    s_verify->add_option("--alpha", verify.alpha, "Margin trade-off parameter")->type_name("NUM");
    s_verify->add_option("--p", verify.p, "Violating fraction for quantile bounds")->type_name("NUM");
    s_verify->add_option("--T", verify.T, "Checkpoint to certify (0 = final)")->type_name("NUM");
    s_verify->add_option("--gamma", verify.gamma, "Override the dataset margin")->type_name("NUM");
    s_verify->add_option("--out", verify.out, "Output directory (default <in>/verify)");

    LowerboundArgs lb;
    auto* s_lb = app.add_subcommand("lowerbound", "Run the adversarial margin-violation campaign");
    s_lb->add_option("--m", lb.m, "Number of points")->type_name("NUM");
    s_lb->add_option("--gamma", lb.gamma, "Margin, in (0, 1/8]")->type_name("NUM");
    s_lb->add_option("--T", lb.T, "Comma-separated horizons")->delimiter(',')->type_name("LIST")->default_str("64,256,1024");
    s_lb->add_option("--eta", lb.eta, "Step size, at most 1")->type_name("NUM");
    s_lb->add_flag("--figure1", lb.figure1, "Record the dense 2-D path on the 90/10 two-cluster dataset instead");
    s_lb->add_option("--figure-gamma", lb.figure_gamma, "Margin for --figure1")->type_name("NUM");
    s_lb->add_option("--steps", lb.steps, "Updates for --figure1")->type_name("NUM");
    s_lb->add_option("--out", lb.out, "Output directory")->required();

    InittimeArgs it;
    auto* s_it = app.add_subcommand("inittime", "Check the initial-phase properties of the 2-D recursion");
    s_it->add_option("--gamma", it.gamma, "Margin, in (0, 1/8]")->type_name("NUM");
    s_it->add_option("--epsilon", it.epsilon, "Minority weight, in (0, 1/8]")->type_name("NUM");
    s_it->add_option("--eta", it.eta, "Step size, in (0, 1]")->type_name("NUM");
    s_it->add_option("--horizon", it.horizon, "Simulated steps")->type_name("NUM");
    s_it->add_option("--out", it.out, "Output directory")->required();

    SweepArgs sw;
    auto* s_sw = app.add_subcommand("sweep", "Run a parameter grid from a JSON config");
    s_sw->add_option("--config", sw.config, "Sweep config JSON")->required();
    s_sw->add_option("--out", sw.out, "Override output_dir from the config");

    GenErrorArgs ge;
    auto* s_ge = app.add_subcommand("gen-error", "Estimate the test error of a stored run");
    s_ge->add_option("--in", ge.in, "Directory written by run")->required();
    s_ge->add_option("--n-test", ge.n_test, "Fresh samples")->type_name("NUM");
    s_ge->add_option("--seed", ge.seed, "Test-set seed")->type_name("NUM");
    s_ge->add_option("--law", ge.law, "ball_rejection or two_cluster");
    s_ge->add_option("--C", ge.C, "Constant of the reference curve")->type_name("NUM");
    s_ge->add_option("--out", ge.out, "Output directory (default <in>/gen_error)");

    PlotArgs pl;
    auto* s_pl = app.add_subcommand("plot-data", "Write long-format plot data for every run in a directory");
    s_pl->add_option("--in", pl.in, "Directory to scan")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (s_run->parsed()) return do_run(run);
        if (s_verify->parsed()) return do_verify(verify);
        if (s_lb->parsed()) return do_lowerbound(lb);
        if (s_it->parsed()) return do_inittime(it);
        if (s_sw->parsed()) return do_sweep(sw);
        if (s_ge->parsed()) return do_gen_error(ge);
        if (s_pl->parsed()) return do_plot(pl);
    } catch (const InvalidParam& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const IncompatibleQuery& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const WrongMethod& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const HorizonTooShort& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_usage;
}

} // namespace marginlab
