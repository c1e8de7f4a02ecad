#include "hrex/json_io.hpp"

#include <cmath>
#include <optional>

#include "hrex/error.hpp"

namespace hrex::json {

namespace {

const json& field(const json& j, const char* key) {
    require(j.is_object(), ErrorCode::Parse, std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    require(it != j.end(), ErrorCode::Parse, std::string("missing field '") + key + "'");
    return *it;
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key);
}

std::size_t component(const json& j, const char* key, std::size_t d) {
    const auto v = get<std::int64_t>(j, key);
    require(v >= 1 && static_cast<std::size_t>(v) <= d, ErrorCode::Parse,
            std::string("component '") + key + "' must be in 1..d");
    return static_cast<std::size_t>(v - 1);
}

double coordinate(const json& j) {
    if (j.is_string()) {
        require(j.get<std::string>() == "inf", ErrorCode::Parse, "grid coordinate strings must be \"inf\"");
        return kInfinitySurrogate;
    }
    require(j.is_number(), ErrorCode::Parse, "grid coordinate must be a number or \"inf\"");
    return j.get<double>();
}

}  // namespace

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::Parse, e.what());
    }
}

ExtendedReal extended_from_json(const json& j) {
    if (j.is_string()) {
        require(j.get<std::string>() == "inf", ErrorCode::Parse, "extended reals are numbers or \"inf\"");
        return ExtendedReal::infinity();
    }
    require(j.is_number(), ErrorCode::Parse, "extended reals are numbers or \"inf\"");
    const double v = j.get<double>();
    require(std::isfinite(v), ErrorCode::Parse, "non-finite number");
    return ExtendedReal(v);
}

json to_json(const ExtendedReal& v) {
    if (v.is_infinite()) return "inf";
    return v.value();
}

DeltaSpec delta_spec_from_json(const json& j) {
    const auto d = get<std::size_t>(j, "d");
    require(d >= 1, ErrorCode::Parse, "d must be >= 1");
    std::vector<DeltaEntry> entries;
    if (j.contains("entries")) {
        const auto& list = field(j, "entries");
        require(list.is_array(), ErrorCode::Parse, "'entries' must be an array");
        for (const auto& e : list) {
            DeltaEntry entry;
            entry.i = component(e, "i", d);
            entry.j = component(e, "j", d);
            entry.k = get<std::uint64_t>(e, "k");
            entry.delta = extended_from_json(field(e, "delta"));
            entries.push_back(entry);
        }
    }
    const ExtendedReal fallback = j.contains("default") ? extended_from_json(j["default"]) : ExtendedReal::infinity();
    return DeltaSpec::from_entries(d, entries, fallback);
}

json to_json(const DeltaSpec& spec) {
    require(spec.is_tabulated(), ErrorCode::InvalidArgument, "functional delta specs have no JSON form");
    json entries = json::array();
    for (const auto& e : spec.entries())
        entries.push_back({{"i", e.i + 1}, {"j", e.j + 1}, {"k", e.k}, {"delta", to_json(e.delta)}});
    return {{"d", spec.dim()}, {"entries", entries}, {"default", to_json(spec.default_value())}};
}

CorrelationModel model_from_json(const json& j) {
    const auto name = get<std::string>(j, "name");
    if (name == "hr") return hr_family(delta_spec_from_json(field(j, "delta")));
    if (name == "hr_exp") return hr_exp_family(delta_spec_from_json(field(j, "delta")));
    const auto d = get<std::size_t>(j, "d");
    require(d >= 1, ErrorCode::Parse, "d must be >= 1");
    if (name == "iid") return iid_model(d);
    if (name == "tabulated") {
        std::vector<RhoEntry> entries;
        for (const auto& e : field(j, "rho")) {
            RhoEntry r;
            r.i = component(e, "i", d);
            r.j = component(e, "j", d);
            r.k = get<std::uint64_t>(e, "k");
            r.rho = get<double>(e, "rho");
            entries.push_back(r);
        }
        return tabulated_model(d, entries);
    }
    if (name == "geometric") {
        const auto rows = get<std::vector<std::vector<double>>>(j, "cross");
        require(rows.size() == d, ErrorCode::Parse, "'cross' must have d rows");
        std::vector<double> cross;
        for (const auto& row : rows) {
            require(row.size() == d, ErrorCode::Parse, "'cross' must have d columns");
            cross.insert(cross.end(), row.begin(), row.end());
        }
        return geometric_model(d, cross, get<double>(j, "decay"));
    }
    if (name == "constant") return constant_model(d, get<double>(j, "value"));
    fail(ErrorCode::Parse, "unknown model name '" + name + "'");
}

SamplerKind sampler_from_string(const std::string& name) {
    if (name == "cholesky") return SamplerKind::Cholesky;
    if (name == "circulant") return SamplerKind::Circulant;
    fail(ErrorCode::Parse, "sampler must be \"cholesky\" or \"circulant\"");
}

std::string to_string(SamplerKind kind) { return kind == SamplerKind::Cholesky ? "cholesky" : "circulant"; }

std::vector<std::vector<double>> grid_from_json(const json& j) {
    require(j.is_array(), ErrorCode::Parse, "x_grid must be an array of points");
    std::vector<std::vector<double>> grid;
    for (const auto& point : j) {
        require(point.is_array(), ErrorCode::Parse, "grid points must be arrays");
        std::vector<double> x;
        for (const auto& c : point) x.push_back(coordinate(c));
        grid.push_back(std::move(x));
    }
    return grid;
}

ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.model = model_from_json(field(j, "model"));
    if (j.contains("limit_delta")) cfg.limit_spec = delta_spec_from_json(j["limit_delta"]);
    cfg.n_list = get<std::vector<std::uint64_t>>(j, "n_list");
    cfg.replicates = get<std::uint64_t>(j, "replicates");
    cfg.x_grid = grid_from_json(field(j, "x_grid"));
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    cfg.sampler = sampler_from_string(get_or<std::string>(j, "sampler", "cholesky"));
    cfg.threads = get_or<unsigned>(j, "threads", 0);
    if (j.contains("theta")) {
        const auto& t = j["theta"];
        cfg.theta.samples = get_or<std::uint64_t>(t, "samples", cfg.theta.samples);
        if (t.contains("max_lag")) cfg.theta.max_lag = get<std::uint64_t>(t, "max_lag");
    }
    if (j.contains("max_final_deviation")) cfg.max_final_deviation = get<double>(j, "max_final_deviation");
    validate(cfg);
    return cfg;
}

json to_json(const ThetaEstimate& est) {
    return {{"value", est.value},
            {"std_error", est.std_error},
            {"samples", est.samples},
            {"truncation_K", est.truncation_K}};
}

json to_json(const ThetaReport& report) {
    json out = to_json(report.estimate);
    if (report.doubled) {
        out["doubled"] = to_json(*report.doubled);
        out["truncation_gap"] = *report.truncation_gap;
    }
    return out;
}

json to_json(const ConvergenceReport& report) {
    json entries = json::array();
    for (const auto& e : report.entries) {
        json points = json::array();
        for (const auto& p : e.points)
            points.push_back({{"x", p.x},
                              {"empirical", p.empirical},
                              {"limit", p.limit},
                              {"deviation", p.deviation},
                              {"std_error", p.std_error}});
        entries.push_back(
            {{"n", e.n}, {"sup_deviation", e.sup_deviation}, {"max_std_error", e.max_std_error}, {"points", points}});
    }
    return {{"limit_method", report.limit_method},
            {"trend_rule", "sup deviation may rise by at most 2 combined standard errors per step"},
            {"trend", report.decreasing ? "decreasing" : "not decreasing"},
            {"passed", report.passed},
            {"failures", report.failures},
            {"entries", entries}};
}

json to_json(const ConditionTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"n", r.n},
                        {"l_n", r.l_n},
                        {"r_n", r.r_n},
                        {"long_range", r.long_range},
                        {"short_range", r.short_range},
                        {"simplified", r.simplified}});
    auto verdict = [](bool ok) { return ok ? "passes" : "fails"; };
    return {{"rows", rows},
            {"long_range", verdict(table.long_range_passes)},
            {"short_range", verdict(table.short_range_passes)},
            {"simplified", verdict(table.simplified_passes)}};
}

json to_json(const Lemma1Result& r) {
    return {{"lhs", r.lhs},
            {"rhs", r.rhs},
            {"difference", r.difference},
            {"atoms", r.atoms},
            {"mismatched_atoms", r.mismatched_atoms}};
}

json to_json(const BlockConsistency& r) {
    return {{"full_prob", r.full_prob},
            {"block_prob", r.block_prob},
            {"block_prob_power", r.block_prob_power},
            {"gap", r.gap},
            {"std_error", r.std_error},
            {"q_n", r.q_n}};
}

}  // namespace hrex::json
