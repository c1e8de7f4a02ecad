#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrex/correlation.hpp"
#include "hrex/sampler.hpp"
#include "hrex/theta.hpp"

namespace hrex {

/// Gumbel-scale level used in place of x = +inf; u_n(50) sits far above any
/// simulated maximum at desk scale.
inline constexpr double kInfinitySurrogate = 50.0;

struct ThetaSettings {
    std::uint64_t samples = 1'000'000;
    std::optional<std::uint64_t> max_lag;
};

struct ExperimentConfig {
    CorrelationModel model = iid_model(1);
    /// Delta spec of the limit law; defaults to the model's own.
    std::optional<DeltaSpec> limit_spec;
    std::vector<std::uint64_t> n_list;
    std::uint64_t replicates = 0;
    std::vector<std::vector<double>> x_grid;
    std::uint64_t seed = 0;
    SamplerKind sampler = SamplerKind::Cholesky;
    unsigned threads = 0;
    ThetaSettings theta;
    std::optional<double> max_final_deviation;
};

/// Throws InvalidArgument unless n_list is strictly increasing (n >= 2),
/// replicates >= 100 and the grid is nonempty with d entries per point.
void validate(const ExperimentConfig& cfg);

/// Componentwise maxima of `replicates` paths, row-major replicates x d.
/// Replicate r reads substream r of derive_domain(experiment, n), so the
/// result depends only on (model, n, sampler, seed).
std::vector<double> simulate_maxima(const CorrelationModel& model, std::uint64_t n, std::uint64_t replicates,
                                    SamplerKind sampler, std::uint64_t seed, unsigned threads);

struct EmpiricalCdf {
    std::uint64_t n = 0;
    std::vector<std::vector<double>> x_grid;
    std::vector<std::uint64_t> counts;  ///< replicates with M_n^(i) <= u_n(x_i) for all i
    std::uint64_t replicates = 0;
};

EmpiricalCdf count_below_thresholds(std::span<const double> maxima, std::size_t d, std::uint64_t n,
                                    const std::vector<std::vector<double>>& x_grid);

std::vector<EmpiricalCdf> run_maxima_experiment(const ExperimentConfig& cfg);

struct PointDeviation {
    std::vector<double> x;
    double empirical = 0.0;
    double limit = 0.0;
    double deviation = 0.0;
    double std_error = 0.0;
};

struct ConvergenceEntry {
    std::uint64_t n = 0;
    std::vector<PointDeviation> points;
    double sup_deviation = 0.0;
    double max_std_error = 0.0;
};

/// theta_per_point[g] holds theta_1..theta_d at grid point g.
ConvergenceEntry compare_to_limit(const EmpiricalCdf& emp, const std::vector<std::vector<double>>& theta_per_point);

/// Limit-side theta values per grid point plus the route that produced them
/// ("product_gumbel", "hr_closed_form" or "theta_monte_carlo").
struct LimitThetas {
    std::vector<std::vector<double>> theta;
    std::string method;
};

LimitThetas limit_thetas(const DeltaSpec& spec, const std::vector<std::vector<double>>& x_grid,
                         const ThetaSettings& settings, std::uint64_t seed, unsigned threads);

/// Sup deviations may rise by at most 2 combined standard errors per step.
bool trend_decreasing(std::span<const ConvergenceEntry> entries);

struct ConvergenceReport {
    std::vector<ConvergenceEntry> entries;
    std::string limit_method;
    bool decreasing = false;
    bool passed = false;  ///< decreasing, and within max_final_deviation when set
    std::vector<std::string> failures;
};

ConvergenceReport run_convergence(const ExperimentConfig& cfg);

/// "n,x1,..,xd,empirical,limit,deviation,std_error" rows.
std::string convergence_csv(const ConvergenceReport& report);

// ---------------------------------------------------------------------------
// Decomposition identity for the probability that some column maximum exceeds
// its threshold, checked by exhaustive enumeration.

struct MatrixAtom {
    std::vector<double> values;  ///< row-major n x d
    double probability = 0.0;
};

struct DiscreteMatrixDistribution {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<MatrixAtom> atoms;
};

struct CellLaw {
    std::vector<double> values;
    std::vector<double> probabilities;
};

inline constexpr std::uint64_t kMaxAtoms = 1'000'000;

/// Independent cells (row-major n x d laws). Throws SupportTooLarge beyond 1e6 atoms.
DiscreteMatrixDistribution product_distribution(std::size_t n, std::size_t d, const std::vector<CellLaw>& cells);

struct Lemma1Result {
    double lhs = 0.0;
    double rhs = 0.0;
    double difference = 0.0;
    std::uint64_t atoms = 0;
    /// Atoms whose exceedance indicator differs from their count of
    /// decomposition events; zero whenever the identity holds atom by atom.
    std::uint64_t mismatched_atoms = 0;
};

Lemma1Result lemma1_check(const DiscreteMatrixDistribution& dist, std::span<const double> thresholds);

struct BlockConsistency {
    double full_prob = 0.0;
    double block_prob = 0.0;
    double block_prob_power = 0.0;
    double gap = 0.0;
    double std_error = 0.0;  ///< combined standard error of the gap
    std::uint64_t q_n = 0;
};

/// P(all M_n <= u_n(x)) against P(all M_{r_n} <= u_n(x))^{q_n}; the block
/// maxima are taken over the first r_n rows of the same paths.
BlockConsistency block_consistency_check(const CorrelationModel& model, std::uint64_t n, std::uint64_t r_n,
                                         std::uint64_t replicates, std::span<const double> x, SamplerKind sampler,
                                         std::uint64_t seed, unsigned threads);

}  // namespace hrex
