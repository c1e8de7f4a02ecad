#pragma once

#include <cstdint>
#include <span>

#include "hrex/extended_real.hpp"

namespace hrex {

/// Gumbel norming for maxima of n standard normals: u_n(x) = x / a_n + b_n.
struct NormingConstants {
    std::uint64_t n = 0;
    double a_n = 0.0;
    double b_n = 0.0;
};

/// Requires n >= 2.
NormingConstants norming_constants(std::uint64_t n);

inline double threshold(const NormingConstants& c, double x) { return x / c.a_n + c.b_n; }

/// Standard normal CDF; accepts +-inf, rejects NaN.
double std_normal_cdf(double x);

/// Bivariate Huesler-Reiss max-stable CDF H_lambda(x, y), lambda in [0, inf].
/// lambda = 0 (complete dependence) and lambda = inf (independence) are
/// evaluated as their own closed forms.
double hr_bivariate_cdf(ExtendedReal lambda, double x, double y);

/// exp(-sum_i theta_i e^{-x_i}); theta entries must lie in [0, 1].
double limit_cdf(std::span<const double> theta, std::span<const double> x);

}  // namespace hrex
