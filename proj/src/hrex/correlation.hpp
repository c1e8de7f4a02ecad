#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "hrex/extended_real.hpp"

namespace hrex {

/// Sample size n of the triangular array. Kept in log form so that limit
/// sweeps can reach sizes (ln n ~ 1e6) that do not fit in a double.
struct SampleSize {
    double count = 0.0;  ///< n itself; +inf when only the logarithm is representable
    double log = 0.0;    ///< ln n

    static SampleSize of(std::uint64_t n) { return {static_cast<double>(n), std::log(static_cast<double>(n))}; }
    static SampleSize from_log(double log_n) { return {std::exp(log_n), log_n}; }
};

/// One tabulated delta_ij(k). Component indices are 0-based.
struct DeltaEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    std::uint64_t k = 0;
    ExtendedReal delta;
};

/// The limit matrix-function delta_ij(k) = lim (1 - rho_ij(k, n)) ln n.
///
/// delta_ii(0) is always 0. Entries with k >= 1 must be strictly positive;
/// zero there is rejected (the limit theory only covers (0, inf]).
class DeltaSpec {
  public:
    using Function = std::function<ExtendedReal(std::size_t i, std::size_t j, std::uint64_t k)>;

    /// Tabulated spec; every entry not listed takes `default_value`.
    static DeltaSpec from_entries(std::size_t d, const std::vector<DeltaEntry>& entries,
                                  ExtendedReal default_value = ExtendedReal::infinity());

    /// Functional spec. `finite_horizon` is the largest lag with a finite
    /// value, or nullopt when finite values continue forever.
    static DeltaSpec from_function(std::size_t d, Function fn, std::optional<std::uint64_t> finite_horizon);

    std::size_t dim() const { return d_; }
    ExtendedReal operator()(std::size_t i, std::size_t j, std::uint64_t k) const;
    std::optional<std::uint64_t> finite_horizon() const { return horizon_; }

    /// Canonical (i <= j) table entries; empty for functional specs.
    std::vector<DeltaEntry> entries() const;
    ExtendedReal default_value() const { return default_; }
    bool is_tabulated() const { return !fn_; }

    /// True when every delta other than delta_ii(0) is infinite.
    bool all_infinite() const;

  private:
    DeltaSpec() = default;

    std::size_t d_ = 0;
    std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, ExtendedReal> table_;
    ExtendedReal default_ = ExtendedReal::infinity();
    Function fn_;
    std::optional<std::uint64_t> horizon_;
};

/// rho_ij(k, n): correlation of component i at time t with component j at
/// time t + k, for the array at sample size n. Evaluation is pure and
/// reentrant; indices are 0-based.
class CorrelationModel {
  public:
    using Function = std::function<double(std::size_t i, std::size_t j, std::uint64_t k, const SampleSize& n)>;

    CorrelationModel(std::string name, std::size_t d, Function rho, std::optional<std::uint64_t> max_lag,
                     std::optional<DeltaSpec> delta = std::nullopt);

    const std::string& name() const { return name_; }
    std::size_t dim() const { return d_; }

    /// Lag beyond which rho is identically zero; nullopt when unbounded.
    std::optional<std::uint64_t> max_lag() const { return max_lag_; }

    double rho(std::size_t i, std::size_t j, std::uint64_t k, const SampleSize& n) const;

    /// The delta limit this model realizes, when known by construction.
    const std::optional<DeltaSpec>& delta_spec() const { return delta_; }

  private:
    std::string name_;
    std::size_t d_;
    Function rho_;
    std::optional<std::uint64_t> max_lag_;
    std::optional<DeltaSpec> delta_;
};

inline constexpr double kRhoFloor = -1.0 + 1e-9;

/// rho = 1 - delta / ln n (clamped to [-1 + 1e-9, 1]) for finite delta, 0 for
/// delta = inf. Needs n >= 2 at evaluation time.
CorrelationModel hr_family(const DeltaSpec& spec);

/// rho = exp(-delta / ln n). Same delta limit as hr_family, and positive
/// semidefinite at every n whenever delta is a valid variogram.
CorrelationModel hr_exp_family(const DeltaSpec& spec);

/// Independent standard normal vectors with independent components.
CorrelationModel iid_model(std::size_t d);

struct RhoEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    std::uint64_t k = 0;
    double rho = 0.0;
};

/// n-independent table; unlisted entries are 0 (rho_ii(0) = 1 implicitly).
CorrelationModel tabulated_model(std::size_t d, const std::vector<RhoEntry>& entries);

/// rho_ij(k) = cross_ij * decay^k, with cross a correlation matrix (row-major d*d).
CorrelationModel geometric_model(std::size_t d, const std::vector<double>& cross, double decay);

/// rho = value for every (i, j, k) except rho_ii(0) = 1.
CorrelationModel constant_model(std::size_t d, double value);

struct BlockParameters {
    std::uint64_t n = 0;
    std::uint64_t l_n = 0;
    std::uint64_t r_n = 0;
    std::uint64_t q_n = 0;
};

/// Requires 1 <= l_n < r_n <= n; q_n = floor(n / r_n).
BlockParameters make_block_parameters(std::uint64_t n, std::uint64_t l_n, std::uint64_t r_n);

struct DeltaEstimateOptions {
    double divergence_threshold = 1e6;
    double tolerance = 1e-6;
};

struct DeltaEstimate {
    ExtendedReal value;
    std::vector<double> sequence;  ///< (1 - rho) ln n along the grid
    double max_successive_diff = 0.0;
    double last_successive_diff = 0.0;
    bool diverged = false;
    bool converged = false;
};

/// Evaluates (1 - rho_ij(k, n)) ln n along a strictly increasing grid (>= 3
/// points). Reports inf when the last value exceeds the divergence threshold
/// and the last three values increase.
DeltaEstimate estimate_delta(const CorrelationModel& model, std::size_t i, std::size_t j, std::uint64_t k,
                             const std::vector<SampleSize>& grid, const DeltaEstimateOptions& options = {});

/// |rho| exp(-(2 ln n - ln ln n) / (1 + |rho|)); needs |rho| < 1 and n >= 3.
double berman_term(double rho, const SampleSize& n);

/// (n^2 / r_n) sum_{i,j} sum_{s = l_n}^{n} berman_term(rho_ij(s, n), n).
double check_long_range(const CorrelationModel& model, const BlockParameters& params);

/// sum_{i,j} sum_{s = m}^{r_n} n^{-(1-rho)/(1+rho)} (ln n)^{-rho/(1+rho)} / sqrt(1 - rho^2).
double check_short_range(const CorrelationModel& model, std::uint64_t n, std::uint64_t m, std::uint64_t r_n);

/// sum_{i,j} max_{l_n <= k <= n} |rho_ij(k, n)| ln n.
double check_simplified(const CorrelationModel& model, std::uint64_t n, std::uint64_t l_n);

struct ConditionSweepOptions {
    double alpha = 0.25;  ///< l_n = floor(n^alpha)
    double beta = 0.5;    ///< r_n = floor(n^beta)
    std::uint64_t m = 1;
};

struct ConditionRow {
    std::uint64_t n = 0;
    std::uint64_t l_n = 0;
    std::uint64_t r_n = 0;
    double long_range = 0.0;
    double short_range = 0.0;
    double simplified = 0.0;
};

/// A checker passes when its values do not increase along the sweep.
struct ConditionTable {
    std::vector<ConditionRow> rows;
    bool long_range_passes = true;
    bool short_range_passes = true;
    bool simplified_passes = true;
};

ConditionTable condition_sweep(const CorrelationModel& model, const std::vector<std::uint64_t>& n_list,
                               const ConditionSweepOptions& options = {});

}  // namespace hrex
