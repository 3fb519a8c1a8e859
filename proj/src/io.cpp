#include "marginlab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "marginlab/errors.hpp"

namespace marginlab {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

double parse_decimal(std::string_view text, std::string_view whole) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text == "nan") return std::nan("");
    if (text == "inf") return HUGE_VAL;
    if (text == "-inf") return -HUGE_VAL;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw InvalidParam("not a number: '" + std::string(whole) + "'");
    return v;
}

} // namespace

double parse_number(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_decimal(text, text);
    const double num = parse_decimal(text.substr(0, slash), text);
    const double den = parse_decimal(text.substr(slash + 1), text);
    if (den == 0.0) throw InvalidParam("zero denominator in '" + std::string(text) + "'");
    return num / den;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto end = line.find(sep, start);
        out.push_back(line.substr(start, end == std::string_view::npos ? end : end - start));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

} // namespace

void write_trajectory(const Trajectory& traj, const Dataset& data, const std::filesystem::path& dir,
                      const nlohmann::json& config) {
    std::string csv = "step_or_time,risk,norm,min_margin,q10_margin,q50_margin\n";
    std::string iter = "step_or_time,max_norm";
    for (std::size_t j = 0; j < data.dim(); ++j) iter += ",w" + std::to_string(j);
    iter += '\n';

    for (const auto& c : traj.checkpoints) {
        std::string q0 = "nan", q10 = "nan", q50 = "nan";
        if (c.norm > 1e-300) {
            const auto prof = margin_profile(data, c.w);
            q0 = format_double(prof.margins.front());
            q10 = format_double(margin_at_quantile(prof, 0.1));
            q50 = format_double(margin_at_quantile(prof, 0.5));
        }
        csv += format_double(c.at) + ',' + format_double(c.risk) + ',' + format_double(c.norm) + ',' + q0 +
               ',' + q10 + ',' + q50 + '\n';
        iter += format_double(c.at) + ',' + format_double(c.max_norm);
        for (double v : c.w) iter += ',' + format_double(v);
        iter += '\n';
    }
    write_text(dir / "trajectory.csv", csv);
    write_text(dir / "iterates.csv", iter);

    nlohmann::json fin;
    fin["method"] = method_name(traj.method);
    fin["loss"] = traj.loss_tag;
    fin["dataset_tag"] = traj.dataset_tag;
    fin["final_w"] = traj.final_w;
    fin["averaged_w"] = traj.averaged_w ? nlohmann::json(*traj.averaged_w) : nlohmann::json(nullptr);
    fin["max_norm_seen"] = traj.max_norm_seen;
    fin["eta"] = traj.eta;
    fin["rel_tol"] = traj.rel_tol;
    fin["steps"] = traj.steps;
    fin["uncertified"] = traj.uncertified;
    fin["seeds"] = nlohmann::json::object();
    if (traj.seed) fin["seeds"]["sgd"] = *traj.seed;
    fin["config"] = config;
    write_text(dir / "final.json", fin.dump(2) + "\n");
}

Trajectory read_trajectory(const std::filesystem::path& dir, const Dataset& data, const LossSpec& loss) {
    if (!std::filesystem::exists(dir / "final.json") || !std::filesystem::exists(dir / "iterates.csv"))
        throw MissingInput("no trajectory in " + dir.string());
    const auto fin = nlohmann::json::parse(read_text(dir / "final.json"));

    Trajectory traj;
    traj.method = parse_method(fin.at("method").get<std::string>());
    traj.loss_tag = fin.at("loss").get<std::string>();
    traj.dataset_tag = fin.at("dataset_tag").get<std::string>();
    traj.final_w = fin.at("final_w").get<std::vector<double>>();
    if (!fin.at("averaged_w").is_null()) traj.averaged_w = fin.at("averaged_w").get<std::vector<double>>();
    traj.max_norm_seen = fin.at("max_norm_seen").get<double>();
    traj.eta = fin.at("eta").get<double>();
    traj.rel_tol = fin.at("rel_tol").get<double>();
    traj.steps = fin.at("steps").get<std::uint64_t>();
    traj.uncertified = fin.at("uncertified").get<bool>();
    if (fin.at("seeds").contains("sgd")) traj.seed = fin["seeds"]["sgd"].get<std::uint64_t>();
    if (traj.loss_tag != loss.tag()) throw InvalidParam("trajectory was produced with loss " + traj.loss_tag);

    std::istringstream in(read_text(dir / "iterates.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != data.dim() + 2) throw InvalidParam("iterates.csv row width does not match the dataset");
        Checkpoint c;
        c.at = parse_number(cols[0]);
        c.max_norm = parse_number(cols[1]);
        for (std::size_t j = 0; j < data.dim(); ++j) c.w.push_back(parse_number(cols[j + 2]));
        c.risk = empirical_risk(data, loss, c.w);
        c.norm = norm(c.w);
        traj.checkpoints.push_back(std::move(c));
    }
    if (traj.checkpoints.empty()) throw MissingInput("iterates.csv holds no checkpoints");
    return traj;
}

} // namespace marginlab
