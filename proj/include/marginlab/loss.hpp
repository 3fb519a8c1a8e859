#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace marginlab {

class Dataset;

enum class LossKind { exponential, logistic, polynomial };

/// A convex, strictly decreasing margin loss l(z) together with the constants
/// the bounds need: l(0) and the Lipschitz constant of l' (absent when l' is
/// not globally Lipschitz, as for the exponential loss).
///
/// The polynomial family is l(z) = z^{-b} for z >= 1, continued below 1 by the
/// quadratic 1 - b(z-1) + b(b+1)/2 (z-1)^2, which matches value and slope at
/// z = 1 and keeps l' globally b(b+1)-Lipschitz.
class LossSpec {
public:
    static LossSpec exponential();
    static LossSpec logistic();
    static LossSpec polynomial(double b);

    /// Parses `exp`, `logistic` or `poly:<b>`; throws InvalidParam otherwise.
    static LossSpec parse(std::string_view text);

    LossKind kind() const noexcept { return kind_; }
    double tail_exponent() const noexcept { return b_; }
    std::optional<double> smoothness() const noexcept { return mu_; }
    double value_at_zero() const noexcept { return value_at_zero_; }

    /// Round-trips through parse().
    std::string tag() const;

    bool operator==(const LossSpec&) const = default;

private:
    LossSpec(LossKind kind, double b, std::optional<double> mu, double l0)
        : kind_(kind), b_(b), mu_(mu), value_at_zero_(l0) {}

    LossKind kind_;
    double b_;
    std::optional<double> mu_;
    double value_at_zero_;
};

double eval(const LossSpec& loss, double z);
double deriv(const LossSpec& loss, double z);

/// Unique z with l(z) = y for y in (0, l(0)]; |l(z) - y| <= 1e-12 y.
/// Throws DomainError outside that interval.
double inverse(const LossSpec& loss, double y);

double empirical_risk(const Dataset& data, const LossSpec& loss, std::span<const double> w);
std::vector<double> risk_gradient(const Dataset& data, const LossSpec& loss,
                                  std::span<const double> w);

} // namespace marginlab
