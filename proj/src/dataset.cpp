#include "marginlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "marginlab/errors.hpp"
#include "marginlab/io.hpp"

namespace marginlab {

namespace {

constexpr double validation_tol = 1e-12;

std::string describe(std::string_view what, std::size_t i) {
    return std::string(what) + " (point " + std::to_string(i) + ")";
}

void fill_unit_gaussian(std::mt19937_64& rng, std::span<double> out) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double n = 0.0;
    do {
        for (auto& v : out) v = gauss(rng);
        n = norm(out);
    } while (n == 0.0);
    for (auto& v : out) v /= n;
}

} // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Dataset::Dataset(std::vector<double> flat_points, std::size_t dim, std::vector<double> witness,
                 double gamma, std::string tag)
    : points_(std::move(flat_points)), m_(0), d_(dim), witness_(std::move(witness)), gamma_(gamma),
      tag_(std::move(tag)) {
    if (d_ == 0) throw InvalidParam("dataset dimension must be positive");
    if (points_.empty() || points_.size() % d_ != 0)
        throw InvalidParam("point buffer is empty or not a multiple of the dimension");
    m_ = points_.size() / d_;
    if (witness_.size() != d_) throw InvalidParam("witness dimension does not match the points");
    if (!(gamma_ > 0.0 && gamma_ <= 1.0)) throw InvalidParam("gamma must lie in (0, 1]");
    if (std::abs(norm(witness_) - 1.0) > validation_tol) throw InvalidParam("witness is not a unit vector");
    for (std::size_t i = 0; i < m_; ++i) {
        const auto x = point(i);
        for (double v : x)
            if (!std::isfinite(v)) throw InvalidParam(describe("non-finite coordinate", i));
        if (norm(x) > 1.0 + validation_tol) throw InvalidParam(describe("point outside the unit ball", i));
        if (dot(x, witness_) < gamma_ - validation_tol)
            throw InvalidParam(describe("witness margin below gamma", i));
    }
}

SeparableSampler::SeparableSampler(std::vector<double> w0, double gamma, SampleLaw law)
    : w0_(std::move(w0)), gamma_(gamma), law_(law) {
    if (!(gamma_ > 0.0 && gamma_ <= 1.0)) throw InvalidParam("gamma must lie in (0, 1]");
    if (w0_.empty() || std::abs(norm(w0_) - 1.0) > validation_tol)
        throw InvalidParam("sampler witness must be a unit vector");
}

void SeparableSampler::draw(std::mt19937_64& rng, std::span<double> out) const {
    const std::size_t d = w0_.size();
    // With gamma = 1 the feasible set {||x|| <= 1, x.w0 >= 1} is the single point w0.
    if (gamma_ >= 1.0) {
        std::copy(w0_.begin(), w0_.end(), out.begin());
        return;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        fill_unit_gaussian(rng, out);
        if (law_ == SampleLaw::ball_rejection) {
            const double r = std::pow(unit(rng), 1.0 / static_cast<double>(d));
            for (auto& v : out) v *= r;
            const double t = dot(out, w0_);
            if (t < 0.0)
                for (std::size_t j = 0; j < d; ++j) out[j] -= 2.0 * t * w0_[j];
        } else {
            // Ball of radius (1 - gamma)/2 around ((1 + gamma)/2) w0: inside the
            // unit ball and at margin >= gamma by the triangle inequality.
            const double r = 0.5 * (1.0 - gamma_) * std::pow(unit(rng), 1.0 / static_cast<double>(d));
            const double c = 0.5 * (1.0 + gamma_);
            for (std::size_t j = 0; j < d; ++j) out[j] = c * w0_[j] + r * out[j];
        }
        if (dot(out, w0_) >= gamma_ && norm(out) <= 1.0) return;
    }
    throw InvalidParam("rejection sampling exhausted its attempt budget; gamma too close to 1 for this dimension");
}

std::vector<double> random_unit_vector(std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> v(d);
    fill_unit_gaussian(rng, v);
    return v;
}

Dataset generate_separable(std::size_t m, std::size_t d, double gamma, std::uint64_t seed) {
    if (m == 0 || d == 0) throw InvalidParam("need m >= 1 and d >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidParam("gamma must lie in (0, 1]");
    std::mt19937_64 rng(seed);
    std::vector<double> w0(d);
    fill_unit_gaussian(rng, w0);
    const SeparableSampler sampler(w0, gamma);
    std::vector<double> pts(m * d);
    for (std::size_t i = 0; i < m; ++i) sampler.draw(rng, std::span<double>(pts.data() + i * d, d));
    std::ostringstream tag;
    tag << "generate_separable(m=" << m << ",d=" << d << ",gamma=" << format_double(gamma)
        << ",seed=" << seed << ")";
    return Dataset(std::move(pts), d, std::move(w0), gamma, tag.str());
}

namespace {

std::pair<Dataset, AdversarialMeta> two_cluster_layout(std::size_t m, std::size_t k, double gamma,
                                                       std::string tag) {
    std::vector<double> pts;
    pts.reserve(2 * m);
    for (std::size_t i = 0; i < m - k; ++i) {
        pts.push_back(1.0);
        pts.push_back(0.0);
    }
    for (std::size_t i = 0; i < k; ++i) {
        pts.push_back(-0.5);
        pts.push_back(3.0 * gamma);
    }
    const double n = std::hypot(gamma, 0.5);
    std::vector<double> w{gamma / n, 0.5 / n};
    AdversarialMeta meta;
    meta.gamma_eff = gamma;
    meta.minority_count = k;
    meta.epsilon = static_cast<double>(k) / static_cast<double>(m);
    meta.degenerate = k == 0;
    return {Dataset(std::move(pts), 2, std::move(w), gamma, std::move(tag)), meta};
}

} // namespace

std::pair<Dataset, AdversarialMeta> adversarial_dataset(std::size_t m, double gamma, std::uint64_t T) {
    if (m == 0 || T == 0) throw InvalidParam("need m >= 1 and T >= 1");
    if (!(gamma > 0.0 && gamma <= 0.125)) throw InvalidParam("gamma must lie in (0, 1/8]");
    const double Td = static_cast<double>(T);
    const double gamma_eff = std::max(gamma, std::min(1.0 / std::sqrt(Td), 0.125));
    const double scale = std::max(1.0, gamma * gamma * Td);
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(m) / (26.0 * scale)));
    std::ostringstream tag;
    tag << "adversarial_dataset(m=" << m << ",gamma=" << format_double(gamma) << ",T=" << T << ")";
    return two_cluster_layout(m, k, gamma_eff, tag.str());
}

std::pair<Dataset, AdversarialMeta> figure_dataset(std::size_t m, double gamma) {
    if (m == 0) throw InvalidParam("need m >= 1");
    if (!(gamma > 0.0) || 0.25 + 9.0 * gamma * gamma > 1.0)
        throw InvalidParam("figure gamma must keep (-1/2, 3 gamma) inside the unit ball");
    const std::size_t k = m / 10;
    std::ostringstream tag;
    tag << "figure_dataset(m=" << m << ",gamma=" << format_double(gamma) << ")";
    return two_cluster_layout(m, k, gamma, tag.str());
}

MarginProfile margin_profile(const Dataset& data, std::span<const double> w) {
    if (w.size() != data.dim()) throw DimensionMismatch("predictor dimension does not match dataset");
    const double n = norm(w);
    if (!(n > 1e-300)) throw ZeroVector("margin profile needs a nonzero predictor");
    std::vector<double> unit(w.begin(), w.end());
    for (auto& v : unit) v /= n;
    MarginProfile p;
    p.predictor_norm = n;
    p.margins.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        p.margins[i] = std::clamp(dot(data.point(i), unit), -1.0, 1.0);
    std::sort(p.margins.begin(), p.margins.end());
    return p;
}

std::size_t violation_count(const MarginProfile& profile, double tau) {
    return static_cast<std::size_t>(
        std::upper_bound(profile.margins.begin(), profile.margins.end(), tau) - profile.margins.begin());
}

double margin_at_quantile(const MarginProfile& profile, double p) {
    if (profile.margins.empty()) throw InvalidParam("empty margin profile");
    const double m = static_cast<double>(profile.size());
    const double k = std::floor(std::clamp(p, 0.0, 1.0) * m);
    if (k < m) return profile.margins[static_cast<std::size_t>(k)];
    return profile.margins.back();
}

std::size_t misclassified_count(const Dataset& data, std::span<const double> w) {
    if (w.size() != data.dim()) throw DimensionMismatch("predictor dimension does not match dataset");
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (dot(data.point(i), w) <= 0.0) ++count;
    return count;
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

void write_dataset(const Dataset& data, const std::filesystem::path& csv_path) {
    std::string body;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.point(i);
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j) body += ',';
            body += format_double(x[j]);
        }
        body += '\n';
    }
    write_text(csv_path, body);

    nlohmann::json meta;
    meta["m"] = data.size();
    meta["d"] = data.dim();
    meta["gamma"] = data.gamma();
    meta["witness_w0"] = std::vector<double>(data.witness().begin(), data.witness().end());
    meta["tag"] = data.tag();
    write_text(meta_path_for(csv_path), meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
    const auto meta_path = meta_path_for(csv_path);
    if (!std::filesystem::exists(csv_path) || !std::filesystem::exists(meta_path))
        throw MissingInput("dataset files not found: " + csv_path.string());
    const auto meta = nlohmann::json::parse(read_text(meta_path));
    const auto d = meta.at("d").get<std::size_t>();
    const auto m = meta.at("m").get<std::size_t>();

    std::vector<double> pts;
    pts.reserve(m * d);
    std::istringstream in(read_text(csv_path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t start = 0, cols = 0;
        while (start <= line.size()) {
            const auto end = std::min(line.find(',', start), line.size());
            pts.push_back(parse_number(std::string_view(line).substr(start, end - start)));
            ++cols;
            start = end + 1;
        }
        if (cols != d) throw InvalidParam("dataset row has " + std::to_string(cols) + " columns, expected " + std::to_string(d));
    }
    if (pts.size() != m * d) throw InvalidParam("dataset row count does not match its metadata");
    return Dataset(std::move(pts), d, meta.at("witness_w0").get<std::vector<double>>(),
                   meta.at("gamma").get<double>(), meta.at("tag").get<std::string>());
}

} // namespace marginlab
