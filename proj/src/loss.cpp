#include "marginlab/loss.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "marginlab/dataset.hpp"
#include "marginlab/errors.hpp"

namespace marginlab {

LossSpec LossSpec::exponential() { return {LossKind::exponential, 0.0, std::nullopt, 1.0}; }

LossSpec LossSpec::logistic() { return {LossKind::logistic, 0.0, 0.25, std::log(2.0)}; }

LossSpec LossSpec::polynomial(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidParam("polynomial tail exponent must be positive");
    return {LossKind::polynomial, b, b * (b + 1.0), 1.0 + b + b * (b + 1.0) / 2.0};
}

LossSpec LossSpec::parse(std::string_view text) {
    if (text == "exp") return exponential();
    if (text == "logistic") return logistic();
    constexpr std::string_view prefix = "poly:";
    if (text.substr(0, prefix.size()) == prefix) {
        const auto rest = text.substr(prefix.size());
        double b = 0.0;
        const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), b);
        if (ec == std::errc{} && ptr == rest.data() + rest.size() && !rest.empty() && b > 0.0 &&
            std::isfinite(b))
            return polynomial(b);
    }
    throw InvalidParam("unknown loss '" + std::string(text) + "' (expected exp, logistic or poly:<b>)");
}

std::string LossSpec::tag() const {
    switch (kind_) {
    case LossKind::exponential: return "exp";
    case LossKind::logistic: return "logistic";
    case LossKind::polynomial: {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, b_);
        return "poly:" + std::string(buf, res.ptr);
    }
    }
    return {};
}

double eval(const LossSpec& loss, double z) {
    switch (loss.kind()) {
    case LossKind::exponential: return std::exp(-z);
    case LossKind::logistic:
        // log(1 + e^{-z}) = max(-z, 0) + log1p(e^{-|z|})
        return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    case LossKind::polynomial: {
        const double b = loss.tail_exponent();
        if (z >= 1.0) return std::pow(z, -b);
        const double u = z - 1.0;
        return 1.0 - b * u + 0.5 * b * (b + 1.0) * u * u;
    }
    }
    return 0.0;
}

double deriv(const LossSpec& loss, double z) {
    switch (loss.kind()) {
    case LossKind::exponential: return -std::exp(-z);
    case LossKind::logistic:
        if (z >= 0.0) {
            const double e = std::exp(-z);
            return -e / (1.0 + e);
        }
        return -1.0 / (1.0 + std::exp(z));
    case LossKind::polynomial: {
        const double b = loss.tail_exponent();
        if (z >= 1.0) return -b * std::pow(z, -b - 1.0);
        return -b + b * (b + 1.0) * (z - 1.0);
    }
    }
    return 0.0;
}

double inverse(const LossSpec& loss, double y) {
    if (!(y > 0.0) || y > loss.value_at_zero())
        throw DomainError("loss inverse needs y in (0, l(0)]");
    if (y == loss.value_at_zero()) return 0.0;
    switch (loss.kind()) {
    case LossKind::exponential: return -std::log(y);
    case LossKind::logistic: return -std::log(std::expm1(y));
    case LossKind::polynomial: {
        if (y <= 1.0) return std::pow(y, -1.0 / loss.tail_exponent());
        // Quadratic branch on [0, 1): bisection until the bracket stops shrinking.
        double lo = 0.0, hi = 1.0;
        while (true) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (eval(loss, mid) > y) lo = mid;
            else hi = mid;
        }
        return std::abs(eval(loss, lo) - y) <= std::abs(eval(loss, hi) - y) ? lo : hi;
    }
    }
    return 0.0;
}

namespace {

void check_dim(const Dataset& data, std::span<const double> w) {
    if (w.size() != data.dim())
        throw DimensionMismatch("predictor has dimension " + std::to_string(w.size()) +
                                ", dataset has " + std::to_string(data.dim()));
}

} // namespace

double empirical_risk(const Dataset& data, const LossSpec& loss, std::span<const double> w) {
    check_dim(data, w);
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) sum += eval(loss, dot(data.point(i), w));
    return sum / static_cast<double>(data.size());
}

std::vector<double> risk_gradient(const Dataset& data, const LossSpec& loss,
                                  std::span<const double> w) {
    check_dim(data, w);
    std::vector<double> g(data.dim(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.point(i);
        const double c = deriv(loss, dot(x, w));
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += c * x[j];
    }
    const double m = static_cast<double>(data.size());
    for (auto& v : g) v /= m;
    return g;
}

} // namespace marginlab
