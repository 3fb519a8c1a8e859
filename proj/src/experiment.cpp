#include "marginlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "marginlab/errors.hpp"
#include "marginlab/io.hpp"

namespace marginlab {

namespace {

// FNV-1a, so seed domains hash identically across standard libraries.
std::uint64_t hash_text(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string_view law_name(SampleLaw law) {
    return law == SampleLaw::two_cluster ? "two_cluster" : "ball_rejection";
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

Dataset sample_dataset(const DistributionSpec& dist, std::size_t m, std::uint64_t seed) {
    if (m == 0) throw InvalidParam("need m >= 1");
    const SeparableSampler sampler(dist.w0, dist.gamma, dist.law);
    std::mt19937_64 rng(mix_seed(seed, hash_text(dist.seed_domain)));
    const std::size_t d = dist.dim();
    std::vector<double> pts(m * d);
    for (std::size_t i = 0; i < m; ++i) sampler.draw(rng, std::span<double>(pts.data() + i * d, d));
    std::ostringstream tag;
    tag << "sample_dataset(law=" << law_name(dist.law) << ",domain=" << dist.seed_domain << ",m=" << m
        << ",d=" << d << ",gamma=" << format_double(dist.gamma) << ",seed=" << seed << ")";
    return Dataset(std::move(pts), d, dist.w0, dist.gamma, tag.str());
}

double wilson_halfwidth(double rate, std::size_t n) {
    if (n == 0) throw InvalidParam("Wilson interval needs n >= 1");
    constexpr double z = 1.96;
    const double nd = static_cast<double>(n);
    const double z2 = z * z;
    return z / (1.0 + z2 / nd) * std::sqrt(rate * (1.0 - rate) / nd + z2 / (4.0 * nd * nd));
}

GenErrorEstimate estimate_generalization(std::span<const double> w, const DistributionSpec& dist,
                                         std::size_t n_test, std::uint64_t seed) {
    if (n_test == 0) throw InvalidParam("n_test must be positive");
    if (w.size() != dist.dim()) throw DimensionMismatch("predictor dimension does not match the distribution");
    const SeparableSampler sampler(dist.w0, dist.gamma, dist.law);
    std::mt19937_64 rng(mix_seed(seed, hash_text(dist.seed_domain) ^ 0x7465737473657421ULL));
    std::vector<double> x(dist.dim());
    std::size_t errors = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
        sampler.draw(rng, x);
        if (dot(x, w) <= 0.0) ++errors;
    }
    GenErrorEstimate e;
    e.n_test = n_test;
    e.error_rate = static_cast<double>(errors) / static_cast<double>(n_test);
    e.wilson_halfwidth = wilson_halfwidth(e.error_rate, n_test);
    return e;
}

SweepConfig SweepConfig::from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{"methods", "losses", "gammas", "ms",      "Ts",     "eta",
                                                "d",       "seeds",  "bounds", "alpha",   "p",      "rel_tol",
                                                "n_test",  "output_dir"};
    if (!j.is_object()) throw InvalidParam("sweep config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InvalidParam("unknown sweep config field '" + key + "'");

    SweepConfig c;
    try {
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& s : j["methods"]) c.methods.push_back(parse_method(s.get<std::string>()));
        }
        if (j.contains("losses")) c.losses = j["losses"].get<std::vector<std::string>>();
        if (j.contains("gammas")) c.gammas = j["gammas"].get<std::vector<double>>();
        if (j.contains("ms")) c.ms = j["ms"].get<std::vector<std::size_t>>();
        if (j.contains("Ts")) c.Ts = j["Ts"].get<std::vector<double>>();
        if (j.contains("eta")) c.eta = j["eta"].get<double>();
        if (j.contains("d")) c.d = j["d"].get<std::size_t>();
        if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("bounds"))
            for (const auto& s : j["bounds"]) c.bounds.push_back(parse_bound_kind(s.get<std::string>()));
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("p")) c.p = j["p"].get<double>();
        if (j.contains("rel_tol")) c.rel_tol = j["rel_tol"].get<double>();
        if (j.contains("n_test")) c.n_test = j["n_test"].get<std::size_t>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParam(std::string("malformed sweep config: ") + e.what());
    }

    if (c.methods.empty() || c.losses.empty() || c.gammas.empty() || c.ms.empty() || c.Ts.empty() ||
        c.seeds.empty())
        throw InvalidParam("sweep grids must be nonempty");
    for (const auto& l : c.losses) LossSpec::parse(l);
    for (double g : c.gammas)
        if (!(g > 0.0 && g <= 1.0)) throw InvalidParam("sweep gamma outside (0, 1]");
    for (auto m : c.ms)
        if (m == 0) throw InvalidParam("sweep m must be positive");
    for (double T : c.Ts)
        if (!(T >= 1.0) || !std::isfinite(T)) throw InvalidParam("sweep T must be >= 1");
    if (!(c.eta > 0.0)) throw InvalidParam("eta must be positive");
    if (c.d == 0) throw InvalidParam("d must be positive");
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw InvalidParam("alpha must lie in [0, 1]");
    if (!(c.p > 0.0 && c.p <= 1.0)) throw InvalidParam("p must lie in (0, 1]");
    if (!(c.rel_tol > 0.0)) throw InvalidParam("rel_tol must be positive");
    return c;
}

nlohmann::json SweepConfig::to_json() const {
    nlohmann::json j;
    j["methods"] = nlohmann::json::array();
    for (auto m : methods) j["methods"].push_back(method_name(m));
    j["losses"] = losses;
    j["gammas"] = gammas;
    j["ms"] = ms;
    j["Ts"] = Ts;
    j["eta"] = eta;
    j["d"] = d;
    j["seeds"] = seeds;
    j["bounds"] = nlohmann::json::array();
    for (auto b : bounds) j["bounds"].push_back(bound_kind_name(b));
    j["alpha"] = alpha;
    j["p"] = p;
    j["rel_tol"] = rel_tol;
    j["n_test"] = n_test;
    j["output_dir"] = output_dir.string();
    return j;
}

std::size_t sweep_threads() {
    if (const char* env = std::getenv("MARGINLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Cell {
    std::size_t index = 0;
    Method method = Method::gd;
    std::string loss;
    double gamma = 0.0;
    std::size_t m = 0;
    double T = 0.0;
    std::uint64_t seed = 0;
};

struct CellResult {
    double final_risk = std::nan("");
    double max_norm = std::nan("");
    double min_margin = std::nan("");
    double gen_error = std::nan("");
    double gen_halfwidth = std::nan("");
    std::size_t satisfied = 0;
    std::size_t total = 0;
    std::string status = "ok";
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string cell_name(const Cell& c) {
    std::ostringstream s;
    s << "cell" << std::setw(4) << std::setfill('0') << c.index;
    return s.str();
}

// Status precedence: error > violated > uncertified > incompatible > precondition_not_met > ok.
int severity(std::string_view s) {
    if (s.starts_with("error")) return 5;
    if (s == "violated") return 4;
    if (s.starts_with("uncertified")) return 3;
    if (s.starts_with("incompatible")) return 2;
    if (s == "precondition_not_met") return 1;
    return 0;
}

void raise_status(CellResult& r, std::string s) {
    if (severity(s) > severity(r.status)) r.status = std::move(s);
}

CellResult run_cell(const SweepConfig& cfg, const Cell& cell, const std::filesystem::path& reports) {
    CellResult out;
    out.total = cfg.bounds.size();
    try {
        const auto loss = LossSpec::parse(cell.loss);
        // Streams depend on the data parameters and seed only, so every method
        // and loss in the grid sees the same training set for a given cell seed.
        const std::uint64_t data_seed =
            mix_seed(mix_seed(cell.seed, cell.m), mix_seed(cfg.d, hash_text(format_double(cell.gamma))));
        DistributionSpec dist{random_unit_vector(cfg.d, mix_seed(data_seed, 11)), cell.gamma,
                              SampleLaw::ball_rejection, "sweep"};
        const auto data = sample_dataset(dist, cell.m, data_seed);

        Trajectory traj;
        const auto steps = static_cast<std::uint64_t>(std::llround(cell.T));
        switch (cell.method) {
        case Method::gd: traj = run_gd(data, loss, GDConfig{cfg.eta, steps, 64, std::nullopt, {}}); break;
        case Method::sgd: traj = run_sgd(data, loss, SGDConfig{cfg.eta, steps, mix_seed(data_seed, 1), 64}); break;
        case Method::flow: traj = run_flow(data, loss, FlowConfig{cell.T, cfg.rel_tol, 64}); break;
        }

        const auto& predictor = traj.averaged_w ? *traj.averaged_w : traj.final_w;
        const auto& fin = traj.final_checkpoint();
        out.final_risk = fin.risk;
        out.max_norm = traj.max_norm_seen;
        if (norm(predictor) > 1e-300) out.min_margin = margin_profile(data, predictor).margins.front();

        std::optional<GenErrorEstimate> gen;
        if (cfg.n_test > 0) {
            gen = estimate_generalization(predictor, dist, cfg.n_test, mix_seed(data_seed, 2));
            out.gen_error = gen->error_rate;
            out.gen_halfwidth = gen->wilson_halfwidth;
        }

        for (auto kind : cfg.bounds) {
            BoundQuery q;
            q.kind = kind;
            q.gamma = cell.gamma;
            q.m = cell.m;
            q.alpha = cfg.alpha;
            q.p = cfg.p;
            const auto file = reports / (cell_name(cell) + "_" + std::string(bound_kind_name(kind)) + ".json");
            try {
                BoundReport r;
                if (kind == BoundKind::generalization_reference) {
                    if (!gen) throw IncompatibleQuery("generalization_reference: needs n_test > 0");
                    q.T = cell.T;
                    r = reference_report(*gen, q);
                } else if (kind == BoundKind::lowerbound_violations) {
                    throw IncompatibleQuery("lowerbound_violations: needs the adversarial dataset; use lowerbound");
                } else {
                    r = certify(traj, data, q);
                }
                r.dataset_ref = data.tag();
                write_text(file, to_json(r).dump(2) + "\n");
                if (r.satisfied) ++out.satisfied;
                if (r.status == BoundStatus::violated && r.certified) raise_status(out, "violated");
                else if (r.status == BoundStatus::precondition_not_met) raise_status(out, "precondition_not_met");
            } catch (const IncompatibleQuery& e) {
                const std::string what = e.what();
                const bool smooth = what.find("uncertified combination") != std::string::npos;
                nlohmann::json j{{"kind", bound_kind_name(kind)},
                                 {"status", smooth ? "uncertified combination" : "incompatible"},
                                 {"note", what},
                                 {"dataset_ref", data.tag()}};
                write_text(file, j.dump(2) + "\n");
                raise_status(out, smooth ? "uncertified combination" : "incompatible: " + what);
            }
        }
    } catch (const std::exception& e) {
        raise_status(out, std::string("error: ") + e.what());
    }
    return out;
}

} // namespace

std::filesystem::path run_sweep(const SweepConfig& cfg) {
    std::vector<Cell> cells;
    for (auto method : cfg.methods)
        for (const auto& loss : cfg.losses)
            for (double gamma : cfg.gammas)
                for (auto m : cfg.ms)
                    for (double T : cfg.Ts)
                        for (auto seed : cfg.seeds)
                            cells.push_back({cells.size(), method, loss, gamma, m, T, seed});

    const auto dir = cfg.output_dir;
    const auto reports = dir / "reports";
    std::filesystem::create_directories(reports);
    write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");

    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) results[i] = run_cell(cfg, cells[i], reports);
    };
    const std::size_t n_threads = std::min(sweep_threads(), std::max<std::size_t>(cells.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::string csv = "method,loss,gamma,m,T,eta,seed,final_risk,max_norm,min_margin,gen_error,gen_halfwidth,"
                      "bounds_satisfied_count,bounds_total,status\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        const auto& r = results[i];
        csv += std::string(method_name(c.method)) + ',' + csv_field(c.loss) + ',' + format_double(c.gamma) + ',' +
               std::to_string(c.m) + ',' + format_double(c.T) + ',' + format_double(cfg.eta) + ',' +
               std::to_string(c.seed) + ',' + format_double(r.final_risk) + ',' + format_double(r.max_norm) +
               ',' + format_double(r.min_margin) + ',' + format_double(r.gen_error) + ',' +
               format_double(r.gen_halfwidth) + ',' + std::to_string(r.satisfied) + ',' +
               std::to_string(r.total) + ',' + csv_field(r.status) + '\n';
    }
    write_text(dir / "master.csv", csv);

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream stamp;
    stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << '\n';
    write_text(dir / "timestamp.txt", stamp.str());
    return dir;
}

std::vector<LowerBoundRun> lowerbound_campaign(std::size_t m, double gamma, std::span<const std::uint64_t> T_grid,
                                               double eta) {
    if (!(gamma > 0.0 && gamma <= 0.125)) throw InvalidParam("gamma must lie in (0, 1/8]");
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidParam("eta must lie in (0, 1]");
    if (m == 0) throw InvalidParam("need m >= 1");
    std::vector<LowerBoundRun> out;
    for (auto T : T_grid) {
        if (T == 0) throw InvalidParam("T must be positive");
        auto [data, meta] = adversarial_dataset(m, gamma, T);
        LowerBoundRun run;
        run.T = T;
        run.meta = meta;
        run.trajectory = run_gd(data, LossSpec::logistic(), GDConfig{eta, T, 64, std::nullopt, {}});
        BoundQuery q;
        q.kind = BoundKind::lowerbound_violations;
        q.gamma = gamma;
        q.T = static_cast<double>(T);
        run.report = certify(run.trajectory, data, q);
        out.push_back(std::move(run));
    }
    return out;
}

nlohmann::json InitTimeReport::to_json() const {
    nlohmann::json j;
    j["gamma"] = gamma;
    j["epsilon"] = epsilon;
    j["eta"] = eta;
    j["horizon"] = horizon;
    j["first_r_at_least_one"] = first_r_at_least_one;
    j["init_time_bound"] = init_time_bound;
    j["init_time_ok"] = init_time_ok;
    j["r_stays_above"] = r_stays_above;
    j["s_at_init"] = s_at_init;
    j["s_ok"] = s_ok;
    j["u_nonpositive_until_init"] = u_nonpositive_until_init;
    j["first_crossing"] = first_crossing ? nlohmann::json(*first_crossing) : nlohmann::json(nullptr);
    j["crossing_bound"] = crossing_bound;
    j["crossing_ok"] = crossing_ok;
    j["crossing_note"] = first_crossing ? "crossing observed" : "no crossing within horizon";
    j["s_nondecreasing"] = s_nondecreasing;
    j["all_ok"] = all_ok();
    return j;
}

InitTimeReport inittime_check(double gamma, double epsilon, double eta, std::uint64_t horizon) {
    if (!(gamma > 0.0 && gamma <= 0.125)) throw InvalidParam("gamma must lie in (0, 1/8]");
    if (!(epsilon > 0.0 && epsilon <= 0.125)) throw InvalidParam("epsilon must lie in (0, 1/8]");
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidParam("eta must lie in (0, 1]");
    const auto needed = static_cast<std::uint64_t>(std::ceil(32.0 / (5.0 * eta))) + 1;
    if (horizon < needed) throw HorizonTooShort("horizon must be at least " + std::to_string(needed));

    const auto trace = lowerbound_recursion(gamma, epsilon, eta, horizon);
    InitTimeReport r;
    r.gamma = gamma;
    r.epsilon = epsilon;
    r.eta = eta;
    r.horizon = horizon;
    r.init_time_bound = 32.0 / (5.0 * eta) + 1.0;
    r.crossing_bound = 19.0 / (480.0 * gamma * gamma * epsilon);

    const auto& rows = trace.rows;
    const auto init = std::find_if(rows.begin(), rows.end(), [](const auto& row) { return row.r >= 1.0; });
    if (init != rows.end()) {
        r.first_r_at_least_one = init->t;
        r.init_time_ok = static_cast<double>(init->t) <= r.init_time_bound;
        r.r_stays_above = std::all_of(init, rows.end(), [](const auto& row) { return row.r >= 15.0 / 16.0; });
        r.s_at_init = init->s;
        r.s_ok = init->s <= 0.3;
        r.u_nonpositive_until_init =
            std::all_of(rows.begin(), std::next(init), [](const auto& row) { return row.u <= 0.0; });
    }
    const auto cross = std::find_if(rows.begin(), rows.end(), [](const auto& row) { return row.u > 0.0; });
    if (cross != rows.end()) r.first_crossing = cross->t;
    r.crossing_ok = !r.first_crossing || static_cast<double>(*r.first_crossing) >= r.crossing_bound;
    r.s_nondecreasing = std::adjacent_find(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
                            return b.s < a.s;
                        }) == rows.end();
    return r;
}

nlohmann::json PlateauReport::to_json() const {
    return {{"error_small", error_small}, {"error_large", error_large}, {"mean_small", mean_small},
            {"mean_large", mean_large},   {"threshold", threshold},     {"holds", holds},
            {"certified", false}};
}

PlateauReport plateau_check(const DistributionSpec& dist, std::size_t m, std::uint64_t T_small,
                            std::uint64_t T_large, std::span<const std::uint64_t> seeds, std::size_t n_test) {
    if (m == 0 || n_test == 0 || seeds.empty()) throw InvalidParam("need m, n_test >= 1 and at least one seed");
    if (T_small < m) throw InvalidParam("T_small must be at least m");
    if (T_large < 10 * T_small) throw InvalidParam("T_large must be at least 10 T_small");

    PlateauReport r;
    const auto loss = LossSpec::logistic();
    for (auto seed : seeds) {
        const auto data = sample_dataset(dist, m, mix_seed(seed, 0));
        std::vector<double> w_small;
        GDConfig cfg{1.0, T_large, 16, std::nullopt, {}};
        cfg.observer = [&](std::uint64_t t, std::span<const double> w) {
            if (t == T_small + 1) w_small.assign(w.begin(), w.end());
        };
        const auto traj = run_gd(data, loss, cfg);
        const auto test_seed = mix_seed(seed, 1);
        r.error_small.push_back(estimate_generalization(w_small, dist, n_test, test_seed).error_rate);
        r.error_large.push_back(estimate_generalization(traj.final_w, dist, n_test, test_seed).error_rate);
    }
    r.mean_small = mean_of(r.error_small);
    r.mean_large = mean_of(r.error_large);
    r.threshold = 2.0 * r.mean_small + 2.0 / static_cast<double>(n_test);
    r.holds = r.mean_large <= r.threshold;
    return r;
}

BoundReport reference_report(const GenErrorEstimate& estimate, const BoundQuery& query) {
    BoundReport r;
    r.query = query;
    r.query.kind = BoundKind::generalization_reference;
    r.theoretical = generalization_reference(query.gamma, static_cast<double>(query.m), query.T, query.C);
    r.empirical = estimate.error_rate;
    r.slack = r.theoretical - r.empirical;
    r.tolerance_used = 0.0;
    r.satisfied = r.slack >= 0.0;
    r.status = r.satisfied ? BoundStatus::satisfied : BoundStatus::violated;
    r.certified = false;
    r.note = "reference curve with an assumed constant C; not a certified bound";
    return r;
}

} // namespace marginlab
