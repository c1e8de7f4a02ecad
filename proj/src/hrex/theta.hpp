#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hrex/correlation.hpp"

namespace hrex {

/// Index of a limiting Gaussian variable W_{k,i}^{(t)}: k >= 1 is the time
/// offset plus one (k = 1 is lag 0), t the 0-based component.
struct WIndex {
    std::uint64_t k = 1;
    std::size_t t = 0;

    friend bool operator==(const WIndex&, const WIndex&) = default;
};

/// Covariance of the W variables attached to one target component.
struct WCovariance {
    std::size_t target = 0;
    std::vector<WIndex> indices;
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd factor;  ///< factor * factor^T == matrix (eigenvalues clipped at 0)

    std::optional<std::size_t> position(const WIndex& w) const;
};

/// Builds Cov(W_{k,i}^{(j)}, W_{l,i}^{(t)}) over every W index with lag
/// k - 1 <= max_lag and 0 < delta_{ti}(k-1) < inf. Zero deltas carry no W.
/// Throws InvalidDeltaSpec when an entry is undefined (infinite cross delta)
/// or the smallest eigenvalue is below -1e-10 * dimension.
WCovariance build_w_covariance(const DeltaSpec& spec, std::size_t target, std::uint64_t max_lag);

struct ConstraintRow {
    WIndex w;
    double scale = 0.0;  ///< sqrt(delta); 0 makes the row the pure event A/2 <= bound
    double bound = 0.0;  ///< delta + (x_t - x_i) / 2
};

/// The events A/2 + scale * W <= bound whose joint probability is theta_i(x).
struct ConstraintSet {
    std::size_t target = 0;
    std::vector<ConstraintRow> rows;
    bool includes_lag0_cross = false;
};

ConstraintSet build_constraints(const DeltaSpec& spec, std::span<const double> x, std::size_t target,
                                std::uint64_t max_lag);

struct ThetaEstimate {
    double value = 1.0;
    double std_error = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t truncation_K = 0;
};

struct MonteCarloOptions {
    std::uint64_t samples = 1'000'000;
    std::uint64_t seed = 0;
    std::uint64_t domain = 0;
    unsigned threads = 0;
};

/// Plain Monte Carlo over N i.i.d. draws of (A, W). Several constraint sets
/// are scored against the same draws (common random numbers), so a set that
/// adds rows to another can only score lower on every path.
std::vector<ThetaEstimate> estimate_theta(std::span<const ConstraintSet> sets, const WCovariance& wcov,
                                          const MonteCarloOptions& options);

ThetaEstimate estimate_theta(const ConstraintSet& set, const WCovariance& wcov, const MonteCarloOptions& options);

struct ThetaReport {
    ThetaEstimate estimate;
    /// Present when the constraint set was truncated: the estimate at 2K on
    /// the same draws, and estimate - doubled (nonnegative).
    std::optional<ThetaEstimate> doubled;
    std::optional<double> truncation_gap;
};

/// theta_i(x) for a delta spec. `max_lag` defaults to the spec's finite
/// horizon and is required when the horizon is unbounded.
ThetaReport theta_for_spec(const DeltaSpec& spec, std::span<const double> x, std::size_t target,
                           std::optional<std::uint64_t> max_lag, const MonteCarloOptions& options);

/// integral_0^inf e^{-a} Phi((delta + shift - a/2) / sqrt(delta)) da by
/// adaptive Gauss-Kronrod, absolute error <= 1e-9.
double theta_oracle_single(double delta, double shift);

/// The same integral by composite trapezoid on [0, upper] with a fixed step;
/// the independent second route the oracle is checked against.
double theta_oracle_single_trapezoid(double delta, double shift, double upper = 50.0, double step = 1e-4);

/// The symmetric split of the Huesler-Reiss exponent,
/// (Phi(sqrt(l) + (x2-x1)/(2 sqrt(l))), Phi(sqrt(l) + (x1-x2)/(2 sqrt(l)))).
std::pair<double, double> theta_bivariate_closed_form(double lambda, double x1, double x2);

}  // namespace hrex
