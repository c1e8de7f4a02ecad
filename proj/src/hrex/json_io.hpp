#pragma once

#include <json.hpp>

#include <string>

#include "hrex/correlation.hpp"
#include "hrex/experiments.hpp"
#include "hrex/extended_real.hpp"
#include "hrex/theta.hpp"

// JSON surfaces use 1-based component indices and the string "inf" for
// infinite extended reals. Malformed documents raise ErrorCode::Parse.
namespace hrex::json {

using nlohmann::json;

ExtendedReal extended_from_json(const json& j);
json to_json(const ExtendedReal& v);

/// {"d": 2, "entries": [{"i": 1, "j": 2, "k": 0, "delta": 1.0}], "default": "inf"}
DeltaSpec delta_spec_from_json(const json& j);
json to_json(const DeltaSpec& spec);

/// {"name": "hr" | "hr_exp", "delta": {...}}, {"name": "iid", "d": 2},
/// {"name": "tabulated", "d": 2, "rho": [{"i", "j", "k", "rho"}]},
/// {"name": "geometric", "d": 2, "cross": [[1, 0.5], [0.5, 1]], "decay": 0.7},
/// {"name": "constant", "d": 1, "value": 0.3}
CorrelationModel model_from_json(const json& j);

SamplerKind sampler_from_string(const std::string& name);
std::string to_string(SamplerKind kind);

/// Grid coordinates may be "inf", mapped to the +inf surrogate.
std::vector<std::vector<double>> grid_from_json(const json& j);

/// {"model": {...}, "limit_delta": {...}?, "n_list": [...], "replicates": R,
///  "x_grid": [[...]], "seed": s, "sampler": "cholesky", "threads": 0,
///  "theta": {"samples": N, "max_lag": K}?, "max_final_deviation": 0.05?}
ExperimentConfig experiment_from_json(const json& j);

json to_json(const ThetaEstimate& est);
json to_json(const ThetaReport& report);
json to_json(const ConvergenceReport& report);
json to_json(const ConditionTable& table);
json to_json(const Lemma1Result& result);
json to_json(const BlockConsistency& result);

json parse(const std::string& text);

}  // namespace hrex::json
