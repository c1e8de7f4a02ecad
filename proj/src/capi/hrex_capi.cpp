#include "hrex/hrex.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "hrex/correlation.hpp"
#include "hrex/error.hpp"
#include "hrex/experiments.hpp"
#include "hrex/json_io.hpp"
#include "hrex/logging.hpp"
#include "hrex/norming.hpp"
#include "hrex/rng.hpp"
#include "hrex/sampler.hpp"
#include "hrex/theta.hpp"

struct hrex_delta_spec {
    hrex::DeltaSpec spec;
};

struct hrex_model {
    hrex::CorrelationModel model;
};

struct hrex_paths {
    std::vector<hrex::SamplePath> paths;
    std::size_t n = 0;
    std::size_t d = 0;
};

namespace {

thread_local std::string last_error;

hrex_status to_status(hrex::ErrorCode code) {
    using hrex::ErrorCode;
    switch (code) {
        case ErrorCode::InvalidArgument: return HREX_INVALID_ARGUMENT;
        case ErrorCode::DimensionMismatch: return HREX_DIMENSION_MISMATCH;
        case ErrorCode::NotPositiveSemidefinite: return HREX_NOT_POSITIVE_SEMIDEFINITE;
        case ErrorCode::EmbeddingNotPSD: return HREX_EMBEDDING_NOT_PSD;
        case ErrorCode::InvalidDeltaSpec: return HREX_INVALID_DELTA_SPEC;
        case ErrorCode::SupportTooLarge: return HREX_SUPPORT_TOO_LARGE;
        case ErrorCode::Io: return HREX_IO;
        case ErrorCode::Parse: return HREX_PARSE;
    }
    return HREX_INTERNAL;
}

template <class F>
hrex_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return HREX_OK;
    } catch (const hrex::Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "Internal: out of memory";
        return HREX_INTERNAL;
    } catch (const std::exception& e) {
        last_error = std::string("Internal: ") + e.what();
        return HREX_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    hrex::require(p != nullptr, hrex::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

char* duplicate(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

hrex::ExtendedReal extended(double v) {
    hrex::require(!std::isnan(v), hrex::ErrorCode::InvalidArgument, "NaN extended real");
    return hrex::ExtendedReal::from_double(v);
}

hrex::SamplerKind sampler_kind(hrex_sampler_kind kind) {
    hrex::require(kind == HREX_SAMPLER_CHOLESKY || kind == HREX_SAMPLER_CIRCULANT, hrex::ErrorCode::InvalidArgument,
                  "unknown sampler kind");
    return kind == HREX_SAMPLER_CHOLESKY ? hrex::SamplerKind::Cholesky : hrex::SamplerKind::Circulant;
}

hrex_theta_estimate to_c(const hrex::ThetaEstimate& e) { return {e.value, e.std_error, e.samples, e.truncation_K}; }

hrex_log_fn log_fn = nullptr;
void* log_user = nullptr;

}  // namespace

extern "C" {

const char* hrex_version(void) { return "0.1.0"; }

const char* hrex_status_name(hrex_status status) {
    switch (status) {
        case HREX_OK: return "Ok";
        case HREX_INVALID_ARGUMENT: return "InvalidArgument";
        case HREX_DIMENSION_MISMATCH: return "DimensionMismatch";
        case HREX_NOT_POSITIVE_SEMIDEFINITE: return "NotPositiveSemidefinite";
        case HREX_EMBEDDING_NOT_PSD: return "EmbeddingNotPSD";
        case HREX_INVALID_DELTA_SPEC: return "InvalidDeltaSpec";
        case HREX_SUPPORT_TOO_LARGE: return "SupportTooLarge";
        case HREX_IO: return "Io";
        case HREX_PARSE: return "Parse";
        case HREX_INTERNAL: return "Internal";
    }
    return "Unknown";
}

const char* hrex_last_error(void) { return last_error.c_str(); }

void hrex_string_free(char* s) { std::free(s); }

void hrex_set_log_callback(hrex_log_fn fn, void* user) {
    log_fn = fn;
    log_user = user;
    if (!fn) {
        hrex::set_log_sink({});
        return;
    }
    hrex::set_log_sink([](const std::string& message) { log_fn(message.c_str(), log_user); });
}

hrex_status hrex_norming_constants(uint64_t n, double* a_n, double* b_n) {
    return guarded([&] {
        need(a_n, "a_n");
        need(b_n, "b_n");
        const auto c = hrex::norming_constants(n);
        *a_n = c.a_n;
        *b_n = c.b_n;
    });
}

hrex_status hrex_threshold(uint64_t n, double x, double* u) {
    return guarded([&] {
        need(u, "u");
        *u = hrex::threshold(hrex::norming_constants(n), x);
    });
}

hrex_status hrex_hlambda(double lambda, double x, double y, double* out) {
    return guarded([&] {
        need(out, "out");
        *out = hrex::hr_bivariate_cdf(extended(lambda), x, y);
    });
}

hrex_status hrex_limit_cdf(size_t d, const double* theta, const double* x, double* out) {
    return guarded([&] {
        need(theta, "theta");
        need(x, "x");
        need(out, "out");
        *out = hrex::limit_cdf({theta, d}, {x, d});
    });
}

hrex_status hrex_delta_spec_from_json(const char* json, hrex_delta_spec** out) {
    return guarded([&] {
        need(json, "json");
        need(out, "out");
        *out = new hrex_delta_spec{hrex::json::delta_spec_from_json(hrex::json::parse(json))};
    });
}

hrex_status hrex_delta_spec_create(size_t d, size_t count, const size_t* i, const size_t* j, const uint64_t* k,
                                   const double* delta, double default_delta, hrex_delta_spec** out) {
    return guarded([&] {
        need(out, "out");
        if (count > 0) {
            need(i, "i");
            need(j, "j");
            need(k, "k");
            need(delta, "delta");
        }
        std::vector<hrex::DeltaEntry> entries;
        for (size_t e = 0; e < count; ++e) entries.push_back({i[e], j[e], k[e], extended(delta[e])});
        *out = new hrex_delta_spec{hrex::DeltaSpec::from_entries(d, entries, extended(default_delta))};
    });
}

void hrex_delta_spec_free(hrex_delta_spec* spec) { delete spec; }

size_t hrex_delta_spec_dim(const hrex_delta_spec* spec) { return spec ? spec->spec.dim() : 0; }

hrex_status hrex_delta_spec_value(const hrex_delta_spec* spec, size_t i, size_t j, uint64_t k, double* out) {
    return guarded([&] {
        need(spec, "spec");
        need(out, "out");
        *out = spec->spec(i, j, k).as_double();
    });
}

hrex_status hrex_model_from_json(const char* json, hrex_model** out) {
    return guarded([&] {
        need(json, "json");
        need(out, "out");
        *out = new hrex_model{hrex::json::model_from_json(hrex::json::parse(json))};
    });
}

hrex_status hrex_model_hr(const hrex_delta_spec* spec, hrex_model** out) {
    return guarded([&] {
        need(spec, "spec");
        need(out, "out");
        *out = new hrex_model{hrex::hr_family(spec->spec)};
    });
}

hrex_status hrex_model_iid(size_t d, hrex_model** out) {
    return guarded([&] {
        need(out, "out");
        *out = new hrex_model{hrex::iid_model(d)};
    });
}

void hrex_model_free(hrex_model* model) { delete model; }

size_t hrex_model_dim(const hrex_model* model) { return model ? model->model.dim() : 0; }

hrex_status hrex_model_rho(const hrex_model* model, size_t i, size_t j, uint64_t k, uint64_t n, double* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        hrex::require(n >= 2, hrex::ErrorCode::InvalidArgument, "n must be >= 2");
        *out = model->model.rho(i, j, k, hrex::SampleSize::of(n));
    });
}

hrex_status hrex_check_long_range(const hrex_model* model, uint64_t n, uint64_t l_n, uint64_t r_n, double* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = hrex::check_long_range(model->model, hrex::make_block_parameters(n, l_n, r_n));
    });
}

hrex_status hrex_check_short_range(const hrex_model* model, uint64_t n, uint64_t m, uint64_t r_n, double* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = hrex::check_short_range(model->model, n, m, r_n);
    });
}

hrex_status hrex_check_simplified(const hrex_model* model, uint64_t n, uint64_t l_n, double* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = hrex::check_simplified(model->model, n, l_n);
    });
}

hrex_status hrex_check_json(const char* config, char** result, int* passed) {
    return guarded([&] {
        need(config, "config");
        need(result, "result");
        const auto j = hrex::json::parse(config);
        hrex::require(j.is_object() && j.contains("model") && j.contains("n_list"), hrex::ErrorCode::Parse,
                      "check config needs 'model' and 'n_list'");
        const auto model = hrex::json::model_from_json(j["model"]);
        hrex::ConditionSweepOptions options;
        try {
            const auto n_list = j["n_list"].get<std::vector<std::uint64_t>>();
            options.alpha = j.value("alpha", options.alpha);
            options.beta = j.value("beta", options.beta);
            options.m = j.value("m", options.m);
            const auto table = hrex::condition_sweep(model, n_list, options);
            auto out = hrex::json::to_json(table);
            out["model"] = model.name();
            out["alpha"] = options.alpha;
            out["beta"] = options.beta;
            out["m"] = options.m;
            if (passed)
                *passed = table.long_range_passes && table.short_range_passes && table.simplified_passes ? 1 : 0;
            *result = duplicate(out.dump(2));
        } catch (const nlohmann::json::exception& e) {
            hrex::fail(hrex::ErrorCode::Parse, e.what());
        }
    });
}

hrex_theta_options hrex_theta_options_default(void) { return {1000000, 0, 0, 0, 0}; }

hrex_status hrex_theta(const hrex_delta_spec* spec, size_t target, const double* x,
                       const hrex_theta_options* options, hrex_theta_estimate* estimate, hrex_theta_estimate* doubled,
                       int* has_doubled) {
    return guarded([&] {
        need(spec, "spec");
        need(x, "x");
        need(estimate, "estimate");
        const auto opts = options ? *options : hrex_theta_options_default();
        hrex::MonteCarloOptions mc;
        mc.samples = opts.samples;
        mc.seed = opts.seed;
        mc.domain = hrex::domains::theta;
        mc.threads = opts.threads;
        const std::optional<std::uint64_t> lag =
            opts.has_max_lag ? std::optional<std::uint64_t>(opts.max_lag) : std::nullopt;
        const auto report = hrex::theta_for_spec(spec->spec, {x, spec->spec.dim()}, target, lag, mc);
        *estimate = to_c(report.estimate);
        if (has_doubled) *has_doubled = report.doubled ? 1 : 0;
        if (doubled && report.doubled) *doubled = to_c(*report.doubled);
    });
}

hrex_status hrex_theta_oracle_single(double delta, double shift, double* out) {
    return guarded([&] {
        need(out, "out");
        *out = hrex::theta_oracle_single(delta, shift);
    });
}

hrex_status hrex_theta_bivariate_closed_form(double lambda, double x1, double x2, double* theta1, double* theta2) {
    return guarded([&] {
        need(theta1, "theta1");
        need(theta2, "theta2");
        const auto [a, b] = hrex::theta_bivariate_closed_form(lambda, x1, x2);
        *theta1 = a;
        *theta2 = b;
    });
}

hrex_status hrex_theta_json(const char* config, unsigned threads, char** result) {
    return guarded([&] {
        need(config, "config");
        need(result, "result");
        const auto j = hrex::json::parse(config);
        hrex::require(j.is_object() && j.contains("delta") && j.contains("i") && j.contains("x"),
                      hrex::ErrorCode::Parse, "theta config needs 'delta', 'i' and 'x'");
        const auto spec = hrex::json::delta_spec_from_json(j["delta"]);
        try {
            const auto i = j["i"].get<std::int64_t>();
            hrex::require(i >= 1 && static_cast<std::size_t>(i) <= spec.dim(), hrex::ErrorCode::Parse,
                          "'i' must be in 1..d");
            const auto x = j["x"].get<std::vector<double>>();
            hrex::MonteCarloOptions mc;
            mc.samples = j.value("samples", mc.samples);
            mc.seed = j.value("seed", std::uint64_t{0});
            mc.domain = hrex::domains::theta;
            mc.threads = threads;
            std::optional<std::uint64_t> lag;
            if (j.contains("K")) lag = j["K"].get<std::uint64_t>();
            const auto report = hrex::theta_for_spec(spec, x, static_cast<std::size_t>(i - 1), lag, mc);
            *result = duplicate(hrex::json::to_json(report).dump(2));
        } catch (const nlohmann::json::exception& e) {
            hrex::fail(hrex::ErrorCode::Parse, e.what());
        }
    });
}

hrex_status hrex_sample(const hrex_model* model, uint64_t n, hrex_sampler_kind kind, uint64_t seed, uint64_t first,
                        uint64_t count, hrex_paths** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const std::uint64_t domain =
            kind == HREX_SAMPLER_CIRCULANT ? hrex::domains::circulant_path : hrex::domains::cholesky_path;
        const auto sampler =
            hrex::make_sampler(model->model, static_cast<std::size_t>(n), sampler_kind(kind), seed, domain);
        auto paths = std::make_unique<hrex_paths>();
        paths->n = sampler->path_length();
        paths->d = sampler->dim();
        paths->paths = sampler->sample(first, count);
        *out = paths.release();
    });
}

void hrex_paths_free(hrex_paths* paths) { delete paths; }
size_t hrex_paths_count(const hrex_paths* paths) { return paths ? paths->paths.size() : 0; }
size_t hrex_paths_length(const hrex_paths* paths) { return paths ? paths->n : 0; }
size_t hrex_paths_dim(const hrex_paths* paths) { return paths ? paths->d : 0; }

const double* hrex_paths_data(const hrex_paths* paths, size_t index) {
    if (!paths || index >= paths->paths.size()) return nullptr;
    return paths->paths[index].values.data();
}

hrex_status hrex_paths_write(const hrex_paths* paths, size_t index, const char* file) {
    return guarded([&] {
        need(paths, "paths");
        need(file, "file");
        hrex::require(index < paths->paths.size(), hrex::ErrorCode::InvalidArgument, "path index out of range");
        hrex::write_path(paths->paths[index], file);
    });
}

hrex_status hrex_converge_json(const char* config, char** csv, char** summary, int* passed) {
    return guarded([&] {
        need(config, "config");
        need(csv, "csv");
        need(summary, "summary");
        const auto cfg = hrex::json::experiment_from_json(hrex::json::parse(config));
        const auto report = hrex::run_convergence(cfg);
        auto j = hrex::json::to_json(report);
        j["model"] = cfg.model.name();
        j["seed"] = cfg.seed;
        j["replicates"] = cfg.replicates;
        j["sampler"] = hrex::json::to_string(cfg.sampler);
        const std::string text = j.dump(2);
        *csv = duplicate(hrex::convergence_csv(report));
        try {
            *summary = duplicate(text);
        } catch (...) {
            std::free(*csv);
            *csv = nullptr;
            throw;
        }
        if (passed) *passed = report.passed ? 1 : 0;
    });
}

hrex_status hrex_lemma1_product(size_t n, size_t d, const size_t* support_sizes, const double* values,
                                const double* probabilities, const double* thresholds, hrex_lemma1_result* out) {
    return guarded([&] {
        need(support_sizes, "support_sizes");
        need(values, "values");
        need(probabilities, "probabilities");
        need(thresholds, "thresholds");
        need(out, "out");
        std::vector<hrex::CellLaw> cells(n * d);
        std::size_t offset = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            cells[c].values.assign(values + offset, values + offset + support_sizes[c]);
            cells[c].probabilities.assign(probabilities + offset, probabilities + offset + support_sizes[c]);
            offset += support_sizes[c];
        }
        const auto r = hrex::lemma1_check(hrex::product_distribution(n, d, cells), {thresholds, d});
        *out = {r.lhs, r.rhs, r.difference, r.atoms, r.mismatched_atoms};
    });
}

hrex_status hrex_lemma1_json(const char* config, char** result, int* passed) {
    return guarded([&] {
        need(config, "config");
        need(result, "result");
        const auto j = hrex::json::parse(config);
        try {
            const auto n = j.at("n").get<std::size_t>();
            const auto d = j.at("d").get<std::size_t>();
            auto law = [](const nlohmann::json& c) {
                return hrex::CellLaw{c.at("values").get<std::vector<double>>(),
                                     c.at("probabilities").get<std::vector<double>>()};
            };
            std::vector<hrex::CellLaw> cells;
            if (j.contains("cells")) {
                for (const auto& c : j["cells"]) cells.push_back(law(c));
            } else {
                cells.assign(n * d, law(j.at("cell")));
            }
            const auto u = j.at("thresholds").get<std::vector<double>>();
            const auto r = hrex::lemma1_check(hrex::product_distribution(n, d, cells), u);
            auto out = hrex::json::to_json(r);
            out["tolerance"] = 1e-12;
            const bool ok = r.difference <= 1e-12 && r.mismatched_atoms == 0;
            out["passed"] = ok;
            if (passed) *passed = ok ? 1 : 0;
            *result = duplicate(out.dump(2));
        } catch (const nlohmann::json::exception& e) {
            hrex::fail(hrex::ErrorCode::Parse, e.what());
        }
    });
}

hrex_status hrex_block_check(const hrex_model* model, uint64_t n, uint64_t r_n, uint64_t replicates,
                             const double* x, hrex_sampler_kind kind, uint64_t seed, unsigned threads,
                             hrex_block_result* out) {
    return guarded([&] {
        need(model, "model");
        need(x, "x");
        need(out, "out");
        const auto r = hrex::block_consistency_check(model->model, n, r_n, replicates, {x, model->model.dim()},
                                                     sampler_kind(kind), seed, threads);
        *out = {r.full_prob, r.block_prob, r.block_prob_power, r.gap, r.std_error, r.q_n};
    });
}

}  // extern "C"
