#include "hrex/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hrex/error.hpp"
#include "hrex/norming.hpp"
#include "hrex/parallel.hpp"
#include "hrex/rng.hpp"

namespace hrex {

namespace {

constexpr std::uint64_t kReplicateChunk = 64;

struct Neumaier {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            carry += (sum - t) + v;
        else
            carry += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

std::vector<double> thresholds_for(std::uint64_t n, std::span<const double> x) {
    const auto c = norming_constants(n);
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = threshold(c, x[i]);
    return u;
}

double binomial_se(double p, std::uint64_t r) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(r)); }

// Only delta_12(0) may be finite.
std::optional<ExtendedReal> bivariate_lambda(const DeltaSpec& spec) {
    if (spec.dim() != 2) return std::nullopt;
    const auto h = spec.finite_horizon();
    if (!h || *h != 0) return std::nullopt;
    const auto lambda = spec(0, 1, 0);
    if (lambda.is_infinite()) return std::nullopt;
    return lambda;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
    require(!cfg.n_list.empty(), ErrorCode::InvalidArgument, "n_list is empty");
    for (std::size_t k = 0; k < cfg.n_list.size(); ++k) {
        require(cfg.n_list[k] >= 2, ErrorCode::InvalidArgument, "sample sizes must be >= 2");
        if (k > 0)
            require(cfg.n_list[k] > cfg.n_list[k - 1], ErrorCode::InvalidArgument,
                    "n_list must be strictly increasing");
    }
    require(cfg.replicates >= 100, ErrorCode::InvalidArgument, "replicates must be >= 100");
    require(!cfg.x_grid.empty(), ErrorCode::InvalidArgument, "x_grid is empty");
    for (const auto& x : cfg.x_grid)
        require(x.size() == cfg.model.dim(), ErrorCode::DimensionMismatch, "grid point dimension differs from model");
    if (cfg.limit_spec)
        require(cfg.limit_spec->dim() == cfg.model.dim(), ErrorCode::DimensionMismatch,
                "limit spec dimension differs from model");
}

std::vector<double> simulate_maxima(const CorrelationModel& model, std::uint64_t n, std::uint64_t replicates,
                                    SamplerKind sampler, std::uint64_t seed, unsigned threads) {
    const std::size_t d = model.dim();
    const auto source =
        make_sampler(model, static_cast<std::size_t>(n), sampler, seed, derive_domain(domains::experiment, n));
    std::vector<double> maxima(replicates * d);
    const std::uint64_t chunks = (replicates + kReplicateChunk - 1) / kReplicateChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::uint64_t first = c * kReplicateChunk;
        const std::uint64_t count = std::min(kReplicateChunk, replicates - first);
        source->generate(first, count, [&](std::uint64_t r, std::span<const double> path) {
            double* out = maxima.data() + r * d;
            std::fill(out, out + d, -std::numeric_limits<double>::infinity());
            for (std::size_t k = 0; k < path.size(); k += d)
                for (std::size_t i = 0; i < d; ++i) out[i] = std::max(out[i], path[k + i]);
        });
    });
    return maxima;
}

EmpiricalCdf count_below_thresholds(std::span<const double> maxima, std::size_t d, std::uint64_t n,
                                    const std::vector<std::vector<double>>& x_grid) {
    require(d > 0 && maxima.size() % d == 0, ErrorCode::DimensionMismatch, "maxima size is not a multiple of d");
    EmpiricalCdf emp;
    emp.n = n;
    emp.x_grid = x_grid;
    emp.replicates = maxima.size() / d;
    emp.counts.assign(x_grid.size(), 0);
    for (std::size_t g = 0; g < x_grid.size(); ++g) {
        require(x_grid[g].size() == d, ErrorCode::DimensionMismatch, "grid point dimension differs from maxima");
        const auto u = thresholds_for(n, x_grid[g]);
        std::uint64_t count = 0;
        for (std::uint64_t r = 0; r < emp.replicates; ++r) {
            bool below = true;
            for (std::size_t i = 0; i < d && below; ++i) below = maxima[r * d + i] <= u[i];
            count += below ? 1 : 0;
        }
        emp.counts[g] = count;
    }
    return emp;
}

std::vector<EmpiricalCdf> run_maxima_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<EmpiricalCdf> out;
    out.reserve(cfg.n_list.size());
    for (const auto n : cfg.n_list) {
        const auto maxima = simulate_maxima(cfg.model, n, cfg.replicates, cfg.sampler, cfg.seed, cfg.threads);
        out.push_back(count_below_thresholds(maxima, cfg.model.dim(), n, cfg.x_grid));
    }
    return out;
}

ConvergenceEntry compare_to_limit(const EmpiricalCdf& emp, const std::vector<std::vector<double>>& theta_per_point) {
    require(theta_per_point.size() == emp.x_grid.size() && emp.counts.size() == emp.x_grid.size(),
            ErrorCode::DimensionMismatch, "theta values do not match the grid");
    require(emp.replicates > 0, ErrorCode::InvalidArgument, "empirical CDF has no replicates");
    ConvergenceEntry entry;
    entry.n = emp.n;
    for (std::size_t g = 0; g < emp.x_grid.size(); ++g) {
        PointDeviation p;
        p.x = emp.x_grid[g];
        p.empirical = static_cast<double>(emp.counts[g]) / static_cast<double>(emp.replicates);
        p.limit = limit_cdf(theta_per_point[g], p.x);
        p.deviation = std::abs(p.empirical - p.limit);
        p.std_error = binomial_se(p.empirical, emp.replicates);
        entry.sup_deviation = std::max(entry.sup_deviation, p.deviation);
        entry.max_std_error = std::max(entry.max_std_error, p.std_error);
        entry.points.push_back(std::move(p));
    }
    return entry;
}

LimitThetas limit_thetas(const DeltaSpec& spec, const std::vector<std::vector<double>>& x_grid,
                         const ThetaSettings& settings, std::uint64_t seed, unsigned threads) {
    const std::size_t d = spec.dim();
    LimitThetas out;
    out.theta.assign(x_grid.size(), std::vector<double>(d, 1.0));
    if (spec.all_infinite()) {
        out.method = "product_gumbel";
        return out;
    }
    if (const auto lambda = bivariate_lambda(spec)) {
        out.method = "hr_closed_form";
        for (std::size_t g = 0; g < x_grid.size(); ++g) {
            const double x1 = x_grid[g][0];
            const double x2 = x_grid[g][1];
            if (lambda->value() == 0.0) {
                out.theta[g] = x1 <= x2 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
            } else {
                const auto [t1, t2] = theta_bivariate_closed_form(lambda->value(), x1, x2);
                out.theta[g] = {t1, t2};
            }
        }
        return out;
    }
    out.method = "theta_monte_carlo";
    MonteCarloOptions mc;
    mc.samples = settings.samples;
    mc.seed = seed;
    mc.domain = domains::theta;
    mc.threads = threads;
    for (std::size_t g = 0; g < x_grid.size(); ++g)
        for (std::size_t i = 0; i < d; ++i)
            out.theta[g][i] = theta_for_spec(spec, x_grid[g], i, settings.max_lag, mc).estimate.value;
    return out;
}

bool trend_decreasing(std::span<const ConvergenceEntry> entries) {
    for (std::size_t k = 1; k < entries.size(); ++k) {
        const auto& a = entries[k - 1];
        const auto& b = entries[k];
        const double band = 2.0 * std::hypot(a.max_std_error, b.max_std_error);
        if (b.sup_deviation > a.sup_deviation + band) return false;
    }
    return true;
}

ConvergenceReport run_convergence(const ExperimentConfig& cfg) {
    validate(cfg);
    const DeltaSpec* spec = cfg.limit_spec ? &*cfg.limit_spec : nullptr;
    if (!spec && cfg.model.delta_spec()) spec = &*cfg.model.delta_spec();
    require(spec != nullptr, ErrorCode::InvalidArgument,
            "model '" + cfg.model.name() + "' has no delta spec; supply a limit spec");

    const auto thetas = limit_thetas(*spec, cfg.x_grid, cfg.theta, cfg.seed, cfg.threads);
    ConvergenceReport report;
    report.limit_method = thetas.method;
    for (const auto& emp : run_maxima_experiment(cfg)) report.entries.push_back(compare_to_limit(emp, thetas.theta));

    report.decreasing = trend_decreasing(report.entries);
    if (!report.decreasing) report.failures.push_back("trend: sup deviation is not decreasing within 2 SE per step");
    if (cfg.max_final_deviation && report.entries.back().sup_deviation > *cfg.max_final_deviation) {
        std::ostringstream msg;
        msg << "final deviation " << report.entries.back().sup_deviation << " exceeds " << *cfg.max_final_deviation;
        report.failures.push_back(msg.str());
    }
    report.passed = report.failures.empty();
    return report;
}

std::string convergence_csv(const ConvergenceReport& report) {
    std::ostringstream out;
    out.precision(17);
    const std::size_t d = report.entries.empty() || report.entries[0].points.empty()
                              ? 0
                              : report.entries[0].points[0].x.size();
    out << "n";
    for (std::size_t i = 1; i <= d; ++i) out << ",x" << i;
    out << ",empirical,limit,deviation,std_error\n";
    for (const auto& e : report.entries)
        for (const auto& p : e.points) {
            out << e.n;
            for (double v : p.x) out << ',' << v;
            out << ',' << p.empirical << ',' << p.limit << ',' << p.deviation << ',' << p.std_error << '\n';
        }
    return out.str();
}

DiscreteMatrixDistribution product_distribution(std::size_t n, std::size_t d, const std::vector<CellLaw>& cells) {
    require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "matrix must be at least 1 x 1");
    require(cells.size() == n * d, ErrorCode::DimensionMismatch, "need one cell law per matrix entry");
    std::uint64_t total = 1;
    for (const auto& cell : cells) {
        require(!cell.values.empty() && cell.values.size() == cell.probabilities.size(), ErrorCode::InvalidArgument,
                "cell law needs matching nonempty values and probabilities");
        for (double p : cell.probabilities)
            require(p >= 0.0 && std::isfinite(p), ErrorCode::InvalidArgument, "cell probabilities must be >= 0");
        for (double v : cell.values) require(!std::isnan(v), ErrorCode::InvalidArgument, "cell value is NaN");
        total *= cell.values.size();
        require(total <= kMaxAtoms, ErrorCode::SupportTooLarge, "support exceeds 1e6 atoms");
    }

    DiscreteMatrixDistribution dist{n, d, {}};
    dist.atoms.reserve(total);
    std::vector<std::size_t> digit(cells.size(), 0);
    for (std::uint64_t a = 0; a < total; ++a) {
        MatrixAtom atom;
        atom.values.resize(cells.size());
        atom.probability = 1.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            atom.values[c] = cells[c].values[digit[c]];
            atom.probability *= cells[c].probabilities[digit[c]];
        }
        dist.atoms.push_back(std::move(atom));
        for (std::size_t c = cells.size(); c-- > 0;) {
            if (++digit[c] < cells[c].values.size()) break;
            digit[c] = 0;
        }
    }
    return dist;
}

Lemma1Result lemma1_check(const DiscreteMatrixDistribution& dist, std::span<const double> thresholds) {
    const std::size_t n = dist.n;
    const std::size_t d = dist.d;
    require(thresholds.size() == d, ErrorCode::DimensionMismatch, "need one threshold per column");
    for (double u : thresholds) require(std::isfinite(u), ErrorCode::InvalidArgument, "thresholds must be finite");
    require(dist.atoms.size() <= kMaxAtoms, ErrorCode::SupportTooLarge, "support exceeds 1e6 atoms");

    Neumaier lhs;
    Neumaier rhs;
    Lemma1Result result;
    result.atoms = dist.atoms.size();
    // suffix[k * d + i] = max of column i over rows k .. n-1; row n holds -inf.
    std::vector<double> suffix((n + 1) * d);
    for (const auto& atom : dist.atoms) {
        require(atom.values.size() == n * d, ErrorCode::DimensionMismatch, "atom has the wrong shape");
        for (std::size_t i = 0; i < d; ++i) suffix[n * d + i] = -std::numeric_limits<double>::infinity();
        for (std::size_t k = n; k-- > 0;)
            for (std::size_t i = 0; i < d; ++i)
                suffix[k * d + i] = std::max(atom.values[k * d + i], suffix[(k + 1) * d + i]);

        bool exceeds = false;
        for (std::size_t i = 0; i < d; ++i) exceeds = exceeds || suffix[i] > thresholds[i];

        std::uint64_t events = 0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                if (!(atom.values[k * d + i] > thresholds[i])) continue;
                bool hit = true;
                for (std::size_t s = 0; s < i && hit; ++s) hit = suffix[k * d + s] <= thresholds[s];
                for (std::size_t t = i; t < d && hit; ++t) hit = suffix[(k + 1) * d + t] <= thresholds[t];
                events += hit ? 1 : 0;
            }

        if (exceeds) lhs.add(atom.probability);
        for (std::uint64_t e = 0; e < events; ++e) rhs.add(atom.probability);
        if (events != (exceeds ? 1u : 0u)) ++result.mismatched_atoms;
    }
    result.lhs = lhs.value();
    result.rhs = rhs.value();
    result.difference = std::abs(result.lhs - result.rhs);
    return result;
}

BlockConsistency block_consistency_check(const CorrelationModel& model, std::uint64_t n, std::uint64_t r_n,
                                         std::uint64_t replicates, std::span<const double> x, SamplerKind sampler,
                                         std::uint64_t seed, unsigned threads) {
    const std::size_t d = model.dim();
    require(x.size() == d, ErrorCode::DimensionMismatch, "x has the wrong dimension");
    require(n >= 2 && r_n >= 1 && r_n <= n, ErrorCode::InvalidArgument, "need 1 <= r_n <= n and n >= 2");
    require(replicates >= 1, ErrorCode::InvalidArgument, "replicates must be positive");
    const auto u = thresholds_for(n, x);
    const auto source =
        make_sampler(model, static_cast<std::size_t>(n), sampler, seed, derive_domain(domains::block_check, n));

    const std::uint64_t chunks = (replicates + kReplicateChunk - 1) / kReplicateChunk;
    std::vector<std::uint64_t> full_hits(chunks, 0);
    std::vector<std::uint64_t> block_hits(chunks, 0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::uint64_t first = c * kReplicateChunk;
        const std::uint64_t count = std::min(kReplicateChunk, replicates - first);
        source->generate(first, count, [&](std::uint64_t, std::span<const double> path) {
            bool block_ok = true;
            bool full_ok = true;
            for (std::size_t k = 0; k < n && full_ok; ++k)
                for (std::size_t i = 0; i < d; ++i)
                    if (path[k * d + i] > u[i]) {
                        full_ok = false;
                        if (k < r_n) block_ok = false;
                        break;
                    }
            if (!block_ok) return;
            ++block_hits[c];
            if (full_ok) ++full_hits[c];
        });
    });

    std::uint64_t full = 0;
    std::uint64_t block = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        full += full_hits[c];
        block += block_hits[c];
    }
    BlockConsistency out;
    out.q_n = n / r_n;
    const double q = static_cast<double>(out.q_n);
    out.full_prob = static_cast<double>(full) / static_cast<double>(replicates);
    out.block_prob = static_cast<double>(block) / static_cast<double>(replicates);
    out.block_prob_power = std::pow(out.block_prob, q);
    out.gap = std::abs(out.full_prob - out.block_prob_power);
    const double se_full = binomial_se(out.full_prob, replicates);
    const double se_block = q * std::pow(out.block_prob, q - 1.0) * binomial_se(out.block_prob, replicates);
    out.std_error = std::hypot(se_full, se_block);
    return out;
}

}  // namespace hrex
