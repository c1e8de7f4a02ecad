#include "hrex/norming.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hrex/error.hpp"

namespace hrex {

NormingConstants norming_constants(std::uint64_t n) {
    require(n >= 2, ErrorCode::InvalidArgument, "norming constants need n >= 2, got " + std::to_string(n));
    const double log_n = std::log(static_cast<double>(n));
    const double a = std::sqrt(2.0 * log_n);
    const double b = a - (std::log(log_n) + std::log(4.0 * std::numbers::pi)) / (2.0 * a);
    return {n, a, b};
}

double std_normal_cdf(double x) {
    require(!std::isnan(x), ErrorCode::InvalidArgument, "std_normal_cdf of NaN");
    // erfc carries ~1 ulp relative error, far inside the 1e-12 absolute budget.
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double hr_bivariate_cdf(ExtendedReal lambda, double x, double y) {
    require(!std::isnan(x) && !std::isnan(y), ErrorCode::InvalidArgument, "hr_bivariate_cdf of NaN");
    if (lambda.is_infinite()) return std::exp(-std::exp(-x) - std::exp(-y));
    const double lam = lambda.value();
    require(!std::isnan(lam) && lam >= 0.0, ErrorCode::InvalidArgument, "lambda must be in [0, inf]");
    if (lam == 0.0) return std::exp(-std::exp(-std::min(x, y)));

    const double root = std::sqrt(lam);
    const double weight_y = x == y ? std_normal_cdf(root) : std_normal_cdf(root + (x - y) / (2.0 * root));
    const double weight_x = x == y ? std_normal_cdf(root) : std_normal_cdf(root + (y - x) / (2.0 * root));
    // Guard 0 * inf when one coordinate is infinite.
    const double term_y = weight_y == 0.0 ? 0.0 : weight_y * std::exp(-y);
    const double term_x = weight_x == 0.0 ? 0.0 : weight_x * std::exp(-x);
    return std::exp(-term_y - term_x);
}

double limit_cdf(std::span<const double> theta, std::span<const double> x) {
    require(theta.size() == x.size(), ErrorCode::DimensionMismatch,
            "theta has " + std::to_string(theta.size()) + " entries, x has " + std::to_string(x.size()));
    double exponent = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        require(theta[i] >= 0.0 && theta[i] <= 1.0, ErrorCode::InvalidArgument, "theta entries must lie in [0, 1]");
        require(!std::isnan(x[i]), ErrorCode::InvalidArgument, "limit_cdf of NaN");
        if (theta[i] != 0.0) exponent += theta[i] * std::exp(-x[i]);
    }
    return std::exp(-exponent);
}

}  // namespace hrex
