#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace marginlab {

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Points with their binary labels folded in (x_i := y_i x_i), stored row-major,
/// plus a unit witness w0 and the margin gamma it certifies.
///
/// Construction validates ||x_i|| <= 1, ||w0|| = 1 and min_i x_i.w0 >= gamma,
/// each to 1e-12, and throws InvalidParam if any fails.
class Dataset {
public:
    Dataset(std::vector<double> flat_points, std::size_t dim, std::vector<double> witness,
            double gamma, std::string tag);

    std::size_t size() const noexcept { return m_; }
    std::size_t dim() const noexcept { return d_; }
    std::span<const double> point(std::size_t i) const noexcept {
        return {points_.data() + i * d_, d_};
    }
    std::span<const double> flat() const noexcept { return points_; }
    std::span<const double> witness() const noexcept { return witness_; }
    double gamma() const noexcept { return gamma_; }
    const std::string& tag() const noexcept { return tag_; }

private:
    std::vector<double> points_;
    std::size_t m_;
    std::size_t d_;
    std::vector<double> witness_;
    double gamma_;
    std::string tag_;
};

/// Sorted normalized margins x_i.w/||w||.
struct MarginProfile {
    std::vector<double> margins;
    double predictor_norm = 0.0;

    std::size_t size() const noexcept { return margins.size(); }
};

struct AdversarialMeta {
    double gamma_eff = 0.0;
    double epsilon = 0.0;
    std::size_t minority_count = 0;
    bool degenerate = false;
};

enum class SampleLaw { ball_rejection, two_cluster };

/// Draws one folded point with ||x|| <= 1 and x.w0 >= gamma. The caller owns the
/// random stream so generation is a pure function of (parameters, seed).
class SeparableSampler {
public:
    SeparableSampler(std::vector<double> w0, double gamma, SampleLaw law = SampleLaw::ball_rejection);

    void draw(std::mt19937_64& rng, std::span<double> out) const;

    std::span<const double> witness() const noexcept { return w0_; }
    double gamma() const noexcept { return gamma_; }

    static constexpr std::size_t max_attempts = 1'000'000;

private:
    std::vector<double> w0_;
    double gamma_;
    SampleLaw law_;
};

/// SplitMix64 finalizer over (a, b); derives independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Uniform random unit vector in R^d.
std::vector<double> random_unit_vector(std::size_t d, std::uint64_t seed);

Dataset generate_separable(std::size_t m, std::size_t d, double gamma, std::uint64_t seed);

/// Majority (1, 0) and minority (-1/2, 3 gamma_eff) clusters with minority size
/// floor(m / (26 max(1, gamma^2 T))). gamma_eff = max(gamma, 1/sqrt(T)) for
/// T >= 64; below that it is clamped to 1/8 so the construction stays inside
/// the unit ball and the 2-D recursion's parameter range.
std::pair<Dataset, AdversarialMeta> adversarial_dataset(std::size_t m, double gamma, std::uint64_t T);

/// Illustration layout: 90% at (1, 0), 10% at (-1/2, 3 gamma). Accepts gamma
/// outside (0, 1/8] as long as the points stay in the unit ball.
std::pair<Dataset, AdversarialMeta> figure_dataset(std::size_t m, double gamma);

MarginProfile margin_profile(const Dataset& data, std::span<const double> w);

/// #{i : margin_i <= tau}.
std::size_t violation_count(const MarginProfile& profile, double tau);

/// (floor(p m) + 1)-th smallest margin, clamped to the largest.
double margin_at_quantile(const MarginProfile& profile, double p);

/// #{i : x_i.w <= 0}.
std::size_t misclassified_count(const Dataset& data, std::span<const double> w);

/// CSV of points (17 significant digits) plus `<stem>.meta.json` next to it.
void write_dataset(const Dataset& data, const std::filesystem::path& csv_path);
Dataset read_dataset(const std::filesystem::path& csv_path);

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

} // namespace marginlab
