#include "hrex/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "hrex/error.hpp"

namespace hrex {

namespace {

std::tuple<std::size_t, std::size_t, std::uint64_t> canonical_key(std::size_t i, std::size_t j, std::uint64_t k) {
    return {std::min(i, j), std::max(i, j), k};
}

void validate_delta_value(std::size_t i, std::size_t j, std::uint64_t k, ExtendedReal delta) {
    const std::string where = "delta(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," +
                              std::to_string(k) + ")";
    if (delta.is_infinite()) {
        require(!(i == j && k == 0), ErrorCode::InvalidDeltaSpec, where + " must be 0");
        return;
    }
    require(!std::isnan(delta.value()) && delta.value() >= 0.0, ErrorCode::InvalidDeltaSpec,
            where + " must be nonnegative");
    if (i == j && k == 0) {
        require(delta.value() == 0.0, ErrorCode::InvalidDeltaSpec, where + " must be 0");
    } else if (k >= 1) {
        require(delta.value() > 0.0, ErrorCode::InvalidDeltaSpec, where + " must be > 0 for lags k >= 1");
    }
}

}  // namespace

DeltaSpec DeltaSpec::from_entries(std::size_t d, const std::vector<DeltaEntry>& entries, ExtendedReal default_value) {
    require(d >= 1, ErrorCode::InvalidDeltaSpec, "dimension must be positive");
    DeltaSpec spec;
    spec.d_ = d;
    spec.default_ = default_value;
    if (default_value.is_finite()) {
        require(default_value.value() > 0.0, ErrorCode::InvalidDeltaSpec, "finite default delta must be > 0");
    }
    std::uint64_t horizon = 0;
    for (const auto& e : entries) {
        require(e.i < d && e.j < d, ErrorCode::InvalidDeltaSpec,
                "component index out of range in delta entry (dimension " + std::to_string(d) + ")");
        validate_delta_value(e.i, e.j, e.k, e.delta);
        const auto key = canonical_key(e.i, e.j, e.k);
        if (auto it = spec.table_.find(key); it != spec.table_.end()) {
            require(it->second == e.delta, ErrorCode::InvalidDeltaSpec,
                    "conflicting values for delta(" + std::to_string(e.i + 1) + "," + std::to_string(e.j + 1) + "," +
                        std::to_string(e.k) + ") and its transpose");
        }
        spec.table_[key] = e.delta;
        if (e.delta.is_finite()) horizon = std::max(horizon, e.k);
    }
    if (default_value.is_finite()) {
        spec.horizon_ = std::nullopt;
    } else {
        spec.horizon_ = horizon;
    }
    return spec;
}

DeltaSpec DeltaSpec::from_function(std::size_t d, Function fn, std::optional<std::uint64_t> finite_horizon) {
    require(d >= 1, ErrorCode::InvalidDeltaSpec, "dimension must be positive");
    require(static_cast<bool>(fn), ErrorCode::InvalidArgument, "delta function is empty");
    DeltaSpec spec;
    spec.d_ = d;
    spec.fn_ = std::move(fn);
    spec.horizon_ = finite_horizon;
    return spec;
}

ExtendedReal DeltaSpec::operator()(std::size_t i, std::size_t j, std::uint64_t k) const {
    require(i < d_ && j < d_, ErrorCode::InvalidArgument, "delta component index out of range");
    if (i == j && k == 0) return 0.0;
    if (fn_) {
        const ExtendedReal value = fn_(std::min(i, j), std::max(i, j), k);
        validate_delta_value(i, j, k, value);
        return value;
    }
    if (auto it = table_.find(canonical_key(i, j, k)); it != table_.end()) return it->second;
    return default_;
}

std::vector<DeltaEntry> DeltaSpec::entries() const {
    std::vector<DeltaEntry> out;
    out.reserve(table_.size());
    for (const auto& [key, value] : table_) {
        const auto& [i, j, k] = key;
        out.push_back({i, j, k, value});
    }
    return out;
}

bool DeltaSpec::all_infinite() const {
    if (fn_) {
        if (horizon_ && *horizon_ == 0) {
            for (std::size_t i = 0; i < d_; ++i)
                for (std::size_t j = i + 1; j < d_; ++j)
                    if ((*this)(i, j, 0).is_finite()) return false;
            return true;
        }
        return false;
    }
    if (default_.is_finite()) return false;
    for (const auto& [key, value] : table_) {
        const auto& [i, j, k] = key;
        if (i == j && k == 0) continue;
        if (value.is_finite()) return false;
    }
    return true;
}

CorrelationModel::CorrelationModel(std::string name, std::size_t d, Function rho,
                                   std::optional<std::uint64_t> max_lag, std::optional<DeltaSpec> delta)
    : name_(std::move(name)), d_(d), rho_(std::move(rho)), max_lag_(max_lag), delta_(std::move(delta)) {
    require(d_ >= 1, ErrorCode::InvalidArgument, "model dimension must be positive");
    require(static_cast<bool>(rho_), ErrorCode::InvalidArgument, "model correlation function is empty");
}

double CorrelationModel::rho(std::size_t i, std::size_t j, std::uint64_t k, const SampleSize& n) const {
    require(i < d_ && j < d_, ErrorCode::InvalidArgument, "component index out of range");
    if (max_lag_ && k > *max_lag_) return 0.0;
    return rho_(i, j, k, n);
}

CorrelationModel hr_family(const DeltaSpec& spec) {
    auto rho = [spec](std::size_t i, std::size_t j, std::uint64_t k, const SampleSize& n) {
        const ExtendedReal delta = spec(i, j, k);
        if (delta.is_infinite()) return 0.0;
        require(n.log > 0.0, ErrorCode::InvalidArgument, "hr family needs sample size n >= 2");
        return std::clamp(1.0 - delta.value() / n.log, kRhoFloor, 1.0);
    };
    return CorrelationModel("hr", spec.dim(), rho, spec.finite_horizon(), spec);
}

CorrelationModel hr_exp_family(const DeltaSpec& spec) {
    auto rho = [spec](std::size_t i, std::size_t j, std::uint64_t k, const SampleSize& n) {
        const ExtendedReal delta = spec(i, j, k);
        if (delta.is_infinite()) return 0.0;
        require(n.log > 0.0, ErrorCode::InvalidArgument, "hr_exp family needs sample size n >= 2");
        return std::exp(-delta.value() / n.log);
    };
    return CorrelationModel("hr_exp", spec.dim(), rho, spec.finite_horizon(), spec);
}

CorrelationModel iid_model(std::size_t d) {
    auto rho = [](std::size_t i, std::size_t j, std::uint64_t k, const SampleSize&) {
        return i == j && k == 0 ? 1.0 : 0.0;
    };
    auto spec = DeltaSpec::from_entries(d, {});
    return CorrelationModel("iid", d, rho, 0, spec);
}

CorrelationModel tabulated_model(std::size_t d, const std::vector<RhoEntry>& entries) {
    using Key = std::tuple<std::size_t, std::size_t, std::uint64_t>;
    std::map<Key, double> table;
    std::uint64_t max_lag = 0;
    for (const auto& e : entries) {
        require(e.i < d && e.j < d, ErrorCode::InvalidArgument, "tabulated entry component out of range");
        require(std::isfinite(e.rho) && std::fabs(e.rho) <= 1.0, ErrorCode::InvalidArgument,
                "tabulated correlations must lie in [-1, 1]");
        if (e.i == e.j && e.k == 0) {
            require(e.rho == 1.0, ErrorCode::InvalidArgument, "rho_ii(0) must be 1");
            continue;
        }
        const Key key = canonical_key(e.i, e.j, e.k);
        if (auto it = table.find(key); it != table.end()) {
            require(it->second == e.rho, ErrorCode::InvalidArgument, "conflicting tabulated entry and transpose");
        }
        table[key] = e.rho;
        if (e.rho != 0.0) max_lag = std::max(max_lag, e.k);
    }
    auto rho = [table = std::move(table)](std::size_t i, std::size_t j, std::uint64_t k, const SampleSize&) {
        if (i == j && k == 0) return 1.0;
        auto it = table.find(canonical_key(i, j, k));
        return it == table.end() ? 0.0 : it->second;
    };
    return CorrelationModel("tabulated", d, rho, max_lag);
}

CorrelationModel geometric_model(std::size_t d, const std::vector<double>& cross, double decay) {
    require(cross.size() == d * d, ErrorCode::DimensionMismatch, "cross-correlation matrix must be d x d");
    require(std::fabs(decay) < 1.0, ErrorCode::InvalidArgument, "geometric decay must satisfy |decay| < 1");
    for (std::size_t i = 0; i < d; ++i) {
        require(cross[i * d + i] == 1.0, ErrorCode::InvalidArgument, "cross-correlation diagonal must be 1");
        for (std::size_t j = 0; j < d; ++j) {
            require(cross[i * d + j] == cross[j * d + i], ErrorCode::InvalidArgument,
                    "cross-correlation matrix must be symmetric");
        }
    }
    auto rho = [cross, decay, d](std::size_t i, std::size_t j, std::uint64_t k, const SampleSize&) {
        return cross[i * d + j] * std::pow(decay, static_cast<double>(k));
    };
    return CorrelationModel("geometric", d, rho, std::nullopt);
}

CorrelationModel constant_model(std::size_t d, double value) {
    require(std::fabs(value) < 1.0, ErrorCode::InvalidArgument, "constant correlation must satisfy |rho| < 1");
    auto rho = [value](std::size_t i, std::size_t j, std::uint64_t k, const SampleSize&) {
        return i == j && k == 0 ? 1.0 : value;
    };
    return CorrelationModel("constant", d, rho, std::nullopt);
}

BlockParameters make_block_parameters(std::uint64_t n, std::uint64_t l_n, std::uint64_t r_n) {
    require(l_n >= 1 && l_n < r_n && r_n <= n, ErrorCode::InvalidArgument,
            "block parameters need 1 <= l_n < r_n <= n (got l_n=" + std::to_string(l_n) +
                ", r_n=" + std::to_string(r_n) + ", n=" + std::to_string(n) + ")");
    return {n, l_n, r_n, n / r_n};
}

DeltaEstimate estimate_delta(const CorrelationModel& model, std::size_t i, std::size_t j, std::uint64_t k,
                             const std::vector<SampleSize>& grid, const DeltaEstimateOptions& options) {
    require(grid.size() >= 3, ErrorCode::InvalidArgument, "estimate_delta needs at least 3 grid points");
    for (std::size_t g = 1; g < grid.size(); ++g) {
        require(grid[g].log > grid[g - 1].log, ErrorCode::InvalidArgument, "n grid must be strictly increasing");
    }
    DeltaEstimate out;
    out.sequence.reserve(grid.size());
    for (const auto& n : grid) out.sequence.push_back((1.0 - model.rho(i, j, k, n)) * n.log);

    const auto& seq = out.sequence;
    for (std::size_t g = 1; g < seq.size(); ++g) {
        out.max_successive_diff = std::max(out.max_successive_diff, std::fabs(seq[g] - seq[g - 1]));
    }
    const std::size_t last = seq.size() - 1;
    out.last_successive_diff = std::fabs(seq[last] - seq[last - 1]);
    out.diverged = seq[last] > options.divergence_threshold && seq[last] > seq[last - 1] &&
                   seq[last - 1] > seq[last - 2];
    if (out.diverged) {
        out.value = ExtendedReal::infinity();
    } else {
        out.value = seq[last];
        out.converged = out.last_successive_diff <= options.tolerance * std::max(1.0, std::fabs(seq[last]));
    }
    return out;
}

double berman_term(double rho, const SampleSize& n) {
    require(std::fabs(rho) < 1.0, ErrorCode::InvalidArgument, "berman_term needs |rho| < 1");
    require(n.log >= std::log(3.0) - 1e-12, ErrorCode::InvalidArgument, "berman_term needs n >= 3");
    const double a = std::fabs(rho);
    if (a == 0.0) return 0.0;
    return a * std::exp(-(2.0 * n.log - std::log(n.log)) / (1.0 + a));
}

double check_long_range(const CorrelationModel& model, const BlockParameters& params) {
    const SampleSize n = SampleSize::of(params.n);
    std::uint64_t last = params.n;
    if (model.max_lag()) last = std::min(last, *model.max_lag());
    const std::size_t d = model.dim();
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            for (std::uint64_t s = params.l_n; s <= last; ++s) sum += berman_term(model.rho(i, j, s, n), n);
    return n.count * n.count / static_cast<double>(params.r_n) * sum;
}

double check_short_range(const CorrelationModel& model, std::uint64_t n_count, std::uint64_t m, std::uint64_t r_n) {
    require(n_count >= 2, ErrorCode::InvalidArgument, "check_short_range needs n >= 2");
    require(m >= 1, ErrorCode::InvalidArgument, "check_short_range needs m >= 1");
    const SampleSize n = SampleSize::of(n_count);
    const double log_log = std::log(n.log);
    const std::size_t d = model.dim();
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::uint64_t s = m; s <= r_n; ++s) {
                const double rho = model.rho(i, j, s, n);
                require(std::fabs(rho) < 1.0, ErrorCode::InvalidArgument,
                        "check_short_range: |rho| = 1 at lag " + std::to_string(s));
                const double exponent = -((1.0 - rho) * n.log + rho * log_log) / (1.0 + rho);
                sum += std::exp(exponent) / std::sqrt(1.0 - rho * rho);
            }
        }
    }
    return sum;
}

double check_simplified(const CorrelationModel& model, std::uint64_t n_count, std::uint64_t l_n) {
    require(l_n >= 1 && l_n <= n_count, ErrorCode::InvalidArgument, "check_simplified needs 1 <= l_n <= n");
    const SampleSize n = SampleSize::of(n_count);
    std::uint64_t last = n_count;
    if (model.max_lag()) last = std::min(last, *model.max_lag());
    const std::size_t d = model.dim();
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double largest = 0.0;
            for (std::uint64_t k = l_n; k <= last; ++k) largest = std::max(largest, std::fabs(model.rho(i, j, k, n)));
            sum += largest * n.log;
        }
    }
    return sum;
}

namespace {

bool nonincreasing(const std::vector<ConditionRow>& rows, double ConditionRow::*field) {
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double a = rows[k - 1].*field;
        const double b = rows[k].*field;
        if (b > a + 1e-12 * std::fabs(a)) return false;
    }
    return true;
}

}  // namespace

ConditionTable condition_sweep(const CorrelationModel& model, const std::vector<std::uint64_t>& n_list,
                               const ConditionSweepOptions& options) {
    require(!n_list.empty(), ErrorCode::InvalidArgument, "condition sweep needs at least one n");
    require(options.alpha > 0.0 && options.alpha < options.beta && options.beta <= 1.0, ErrorCode::InvalidArgument,
            "condition sweep needs 0 < alpha < beta <= 1");
    ConditionTable table;
    for (const auto n : n_list) {
        require(n >= 3, ErrorCode::InvalidArgument, "condition sweep needs n >= 3");
        const double nd = static_cast<double>(n);
        const auto l_n = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(std::pow(nd, options.alpha))));
        auto r_n = static_cast<std::uint64_t>(std::floor(std::pow(nd, options.beta)));
        r_n = std::min(n, std::max(r_n, l_n + 1));
        ConditionRow row;
        row.n = n;
        row.l_n = l_n;
        row.r_n = r_n;
        row.long_range = check_long_range(model, make_block_parameters(n, l_n, r_n));
        row.short_range = check_short_range(model, n, options.m, r_n);
        row.simplified = check_simplified(model, n, l_n);
        table.rows.push_back(row);
    }
    table.long_range_passes = nonincreasing(table.rows, &ConditionRow::long_range);
    table.short_range_passes = nonincreasing(table.rows, &ConditionRow::short_range);
    table.simplified_passes = nonincreasing(table.rows, &ConditionRow::simplified);
    return table;
}

}  // namespace hrex
