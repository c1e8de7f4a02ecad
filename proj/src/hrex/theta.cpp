#include "hrex/theta.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hrex/error.hpp"
#include "hrex/norming.hpp"
#include "hrex/parallel.hpp"
#include "hrex/rng.hpp"

namespace hrex {

std::optional<std::size_t> WCovariance::position(const WIndex& w) const {
    for (std::size_t p = 0; p < indices.size(); ++p)
        if (indices[p] == w) return p;
    return std::nullopt;
}

WCovariance build_w_covariance(const DeltaSpec& spec, std::size_t target, std::uint64_t max_lag) {
    const std::size_t d = spec.dim();
    require(target < d, ErrorCode::InvalidArgument, "target component out of range");

    WCovariance out;
    out.target = target;
    std::vector<double> deltas;
    for (std::uint64_t k = 1; k <= max_lag + 1; ++k) {
        for (std::size_t t = 0; t < d; ++t) {
            const ExtendedReal delta = spec(t, target, k - 1);
            if (delta.is_infinite() || delta.value() == 0.0) continue;
            out.indices.push_back({k, t});
            deltas.push_back(delta.value());
        }
    }

    const auto m = static_cast<Eigen::Index>(out.indices.size());
    out.matrix.resize(m, m);
    for (Eigen::Index p = 0; p < m; ++p) {
        for (Eigen::Index q = p; q < m; ++q) {
            const WIndex& a = out.indices[static_cast<std::size_t>(p)];
            const WIndex& b = out.indices[static_cast<std::size_t>(q)];
            const std::uint64_t gap = a.k > b.k ? a.k - b.k : b.k - a.k;
            const ExtendedReal cross = spec(a.t, b.t, gap);
            require(cross.is_finite(), ErrorCode::InvalidDeltaSpec,
                    "delta(" + std::to_string(a.t + 1) + "," + std::to_string(b.t + 1) + "," + std::to_string(gap) +
                        ") is infinite while both endpoints are finite; W covariance undefined");
            const double da = deltas[static_cast<std::size_t>(p)];
            const double db = deltas[static_cast<std::size_t>(q)];
            const double v = (da + db - cross.value()) / (2.0 * std::sqrt(da * db));
            out.matrix(p, q) = v;
            out.matrix(q, p) = v;
        }
    }

    if (m == 0) {
        out.factor.resize(0, 0);
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(out.matrix);
    const double smallest = solver.eigenvalues().minCoeff();
    require(smallest >= -1e-10 * static_cast<double>(m), ErrorCode::InvalidDeltaSpec,
            "W covariance is not positive semidefinite (smallest eigenvalue " + number(smallest) + ")");
    out.factor = solver.eigenvectors() * solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return out;
}

ConstraintSet build_constraints(const DeltaSpec& spec, std::span<const double> x, std::size_t target,
                                std::uint64_t max_lag) {
    const std::size_t d = spec.dim();
    require(x.size() == d, ErrorCode::DimensionMismatch, "x must have one entry per component");
    require(target < d, ErrorCode::InvalidArgument, "target component out of range");

    ConstraintSet cs;
    cs.target = target;
    cs.includes_lag0_cross = target >= 1;
    auto add_row = [&](std::uint64_t k, std::size_t t, double delta) {
        cs.rows.push_back({{k, t}, std::sqrt(delta), delta + (x[t] - x[target]) / 2.0});
    };
    for (std::size_t s = 0; s < target; ++s) {
        const ExtendedReal delta = spec(s, target, 0);
        if (delta.is_finite()) add_row(1, s, delta.value());
    }
    for (std::uint64_t k = 2; k <= max_lag + 1; ++k) {
        for (std::size_t t = 0; t < d; ++t) {
            const ExtendedReal delta = spec(t, target, k - 1);
            if (delta.is_finite()) add_row(k, t, delta.value());
        }
    }
    return cs;
}

namespace {

constexpr std::uint64_t kChunk = std::uint64_t{1} << 16;

struct CompiledRow {
    std::ptrdiff_t position;  // -1 for rows without a Gaussian part
    double scale;
    double bound;
};

}  // namespace

std::vector<ThetaEstimate> estimate_theta(std::span<const ConstraintSet> sets, const WCovariance& wcov,
                                          const MonteCarloOptions& options) {
    require(options.samples >= 1, ErrorCode::InvalidArgument, "theta estimation needs N >= 1");
    std::vector<std::vector<CompiledRow>> compiled(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
        for (const auto& row : sets[s].rows) {
            std::ptrdiff_t pos = -1;
            if (row.scale != 0.0) {
                const auto p = wcov.position(row.w);
                require(p.has_value(), ErrorCode::DimensionMismatch,
                        "constraint references W index (k=" + std::to_string(row.w.k) + ", t=" +
                            std::to_string(row.w.t + 1) + ") missing from the W covariance");
                pos = static_cast<std::ptrdiff_t>(*p);
            }
            compiled[s].push_back({pos, row.scale, row.bound});
        }
    }

    const std::uint64_t n = options.samples;
    const std::uint64_t chunks = (n + kChunk - 1) / kChunk;
    const std::uint64_t domain = options.domain != 0 ? options.domain : domains::theta;
    const auto m = static_cast<Eigen::Index>(wcov.indices.size());
    std::vector<std::vector<std::uint64_t>> tallies(chunks, std::vector<std::uint64_t>(sets.size(), 0));

    bool any_rows = false;
    for (const auto& rows : compiled) any_rows = any_rows || !rows.empty();

    if (any_rows) {
        parallel_for(chunks, options.threads, [&](std::size_t c) {
            Stream stream(options.seed, domain, c);
            Eigen::VectorXd z(m), w(m);
            const std::uint64_t begin = c * kChunk;
            const std::uint64_t end = std::min(n, begin + kChunk);
            auto& tally = tallies[c];
            for (std::uint64_t draw = begin; draw < end; ++draw) {
                const double half_a = 0.5 * stream.exponential();
                if (m > 0) {
                    for (Eigen::Index q = 0; q < m; ++q) z(q) = stream.normal();
                    w.noalias() = wcov.factor * z;
                }
                for (std::size_t s = 0; s < compiled.size(); ++s) {
                    bool inside = true;
                    for (const auto& row : compiled[s]) {
                        const double lhs = half_a + (row.position >= 0 ? row.scale * w(row.position) : 0.0);
                        if (lhs > row.bound) {
                            inside = false;
                            break;
                        }
                    }
                    tally[s] += inside ? 1 : 0;
                }
            }
        });
    }

    std::vector<ThetaEstimate> out(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
        out[s].samples = n;
        if (compiled[s].empty()) {
            out[s].value = 1.0;
            out[s].std_error = 0.0;
            continue;
        }
        std::uint64_t hits = 0;
        for (const auto& tally : tallies) hits += tally[s];
        const double p = static_cast<double>(hits) / static_cast<double>(n);
        out[s].value = p;
        out[s].std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    }
    return out;
}

ThetaEstimate estimate_theta(const ConstraintSet& set, const WCovariance& wcov, const MonteCarloOptions& options) {
    return estimate_theta(std::span<const ConstraintSet>(&set, 1), wcov, options).front();
}

ThetaReport theta_for_spec(const DeltaSpec& spec, std::span<const double> x, std::size_t target,
                           std::optional<std::uint64_t> max_lag, const MonteCarloOptions& options) {
    const auto horizon = spec.finite_horizon();
    require(max_lag.has_value() || horizon.has_value(), ErrorCode::InvalidArgument,
            "delta spec has finite entries at unbounded lags; a truncation K is required");
    const std::uint64_t k = max_lag.value_or(horizon.value_or(0));
    const bool truncated = !horizon.has_value() || k < *horizon;

    ThetaReport report;
    if (!truncated) {
        const WCovariance wcov = build_w_covariance(spec, target, k);
        report.estimate = estimate_theta(build_constraints(spec, x, target, k), wcov, options);
        report.estimate.truncation_K = k;
        return report;
    }
    const std::uint64_t doubled_k = std::max<std::uint64_t>(2 * k, k + 1);
    const WCovariance wcov = build_w_covariance(spec, target, doubled_k);
    const ConstraintSet sets[2] = {build_constraints(spec, x, target, k),
                                   build_constraints(spec, x, target, doubled_k)};
    auto estimates = estimate_theta(sets, wcov, options);
    estimates[0].truncation_K = k;
    estimates[1].truncation_K = doubled_k;
    report.estimate = estimates[0];
    report.doubled = estimates[1];
    report.truncation_gap = estimates[0].value - estimates[1].value;
    return report;
}

double theta_oracle_single(double delta, double shift) {
    require(delta > 0.0 && std::isfinite(delta), ErrorCode::InvalidArgument, "oracle needs 0 < delta < inf");
    const double bound = delta + shift;
    const double root = std::sqrt(delta);
    auto integrand = [&](double a) { return std::exp(-a) * std_normal_cdf((bound - 0.5 * a) / root); };
    double error = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-14, &error);
    require(error <= 1e-9, ErrorCode::InvalidArgument,
            "quadrature did not reach 1e-9 (estimated error " + number(error) + ")");
    return value;
}

double theta_oracle_single_trapezoid(double delta, double shift, double upper, double step) {
    require(delta > 0.0 && std::isfinite(delta), ErrorCode::InvalidArgument, "oracle needs 0 < delta < inf");
    require(step > 0.0 && upper > 0.0, ErrorCode::InvalidArgument, "trapezoid needs positive step and range");
    const double bound = delta + shift;
    const double root = std::sqrt(delta);
    auto f = [&](double a) { return std::exp(-a) * std_normal_cdf((bound - 0.5 * a) / root); };
    const auto steps = static_cast<std::uint64_t>(std::llround(upper / step));
    double sum = 0.5 * (f(0.0) + f(static_cast<double>(steps) * step));
    for (std::uint64_t s = 1; s < steps; ++s) sum += f(static_cast<double>(s) * step);
    return sum * step;
}

std::pair<double, double> theta_bivariate_closed_form(double lambda, double x1, double x2) {
    require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument, "closed form needs 0 < lambda < inf");
    const double root = std::sqrt(lambda);
    return {std_normal_cdf(root + (x2 - x1) / (2.0 * root)), std_normal_cdf(root + (x1 - x2) / (2.0 * root))};
}

}  // namespace hrex
