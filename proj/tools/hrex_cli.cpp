// hrex command-line front end. Talks to the toolkit only through hrex.h.
#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hrex/hrex.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitError = 2;

struct CliError {
    std::string code;
    std::string message;
};

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { hrex_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

void check(hrex_status status) {
    if (status != HREX_OK) throw CliError{hrex_status_name(status), hrex_last_error()};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError{"Io", "cannot read " + path};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw CliError{"Parse", origin + ": " + e.what()};
    }
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw CliError{"Internal", "SHA-256 failed"};
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

double parse_extended(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CliError{"InvalidArgument", "not a number: " + s};
    }
}

std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

// Output files of one run plus the manifest describing them.
class Run {
  public:
    Run(std::string subcommand, std::optional<fs::path> out_dir) : subcommand_(std::move(subcommand)), dir_(std::move(out_dir)) {
        start_ = std::chrono::steady_clock::now();
    }

    void set_config(const std::string& path) { config_ = path; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void add_failure(std::string f) { failures_.push_back(std::move(f)); }
    bool failed() const { return !failures_.empty(); }
    bool has_output_dir() const { return dir_.has_value(); }
    const fs::path& output_dir() const { return *dir_; }

    void add_file(const std::string& name, const std::string& content) {
        if (!dir_) return;
        fs::create_directories(*dir_);
        std::ofstream out(*dir_ / name, std::ios::binary);
        out << content;
        if (!out) throw CliError{"Io", "cannot write " + (*dir_ / name).string()};
        files_.push_back({{"name", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
    }

    void write_manifest(const std::optional<CliError>& error = std::nullopt) {
        if (!dir_) return;
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json m = {{"subcommand", subcommand_},
                  {"config", config_ ? json(*config_) : json(nullptr)},
                  {"seed", seed_ ? json(*seed_) : json(nullptr)},
                  {"version", hrex_version()},
                  {"output_dir", fs::absolute(*dir_).string()},
                  {"duration_seconds", seconds},
                  {"files", files_},
                  {"failures", failures_},
                  {"status", error ? "error" : (failures_.empty() ? "ok" : "failed")}};
        if (error) m["error"] = {{"code", error->code}, {"message", error->message}};
        fs::create_directories(*dir_);
        std::ofstream(*dir_ / "manifest.json") << m.dump(2) << '\n';
    }

    const std::vector<std::string>& failures() const { return failures_; }

  private:
    std::string subcommand_;
    std::optional<fs::path> dir_;
    std::optional<std::string> config_;
    std::optional<std::uint64_t> seed_;
    std::vector<std::string> failures_;
    json files_ = json::array();
    std::chrono::steady_clock::time_point start_;
};

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out;
    std::string sampler;
    std::string format = "json";
};

std::optional<fs::path> resolve_out(const Common& c) {
    if (const char* env = std::getenv("HREX_OUT"); env && *env) return fs::path(env);
    if (!c.out.empty()) return fs::path(c.out);
    return std::nullopt;
}

json load_config(const Common& c, Run& run) {
    if (c.config.empty()) throw CliError{"InvalidArgument", "--config is required"};
    run.set_config(c.config);
    return parse_json(read_file(c.config), c.config);
}

hrex_sampler_kind sampler_kind(const std::string& name) {
    if (name == "cholesky") return HREX_SAMPLER_CHOLESKY;
    if (name == "circulant") return HREX_SAMPLER_CIRCULANT;
    throw CliError{"InvalidArgument", "sampler must be cholesky or circulant"};
}

void cmd_hlambda(const std::string& lambda, double x, double y, Run& run) {
    double p = 0.0;
    check(hrex_hlambda(parse_extended(lambda), x, y, &p));
    std::cout << format_double(p) << '\n';
    run.add_file("hlambda.json", json{{"lambda", lambda}, {"x", x}, {"y", y}, {"probability", p}}.dump(2) + "\n");
}

struct ThetaArgs {
    std::size_t i = 1;
    std::vector<double> x;
    std::optional<std::uint64_t> K;
    std::uint64_t samples = 1'000'000;
};

void cmd_theta(const Common& c, const ThetaArgs& a, Run& run) {
    const json spec = load_config(c, run);
    json cfg = {{"delta", spec.contains("delta") ? spec["delta"] : spec}, {"i", a.i}, {"x", a.x}, {"samples", a.samples}};
    cfg["seed"] = c.seed.value_or(0);
    if (a.K) cfg["K"] = *a.K;
    run.set_seed(cfg["seed"].get<std::uint64_t>());
    OwnedString result;
    check(hrex_theta_json(cfg.dump().c_str(), c.threads, &result.p));
    std::cout << result.str() << '\n';
    run.add_file("theta.json", result.str() + "\n");
}

void cmd_converge(const Common& c, Run& run) {
    json cfg = load_config(c, run);
    if (c.seed) cfg["seed"] = *c.seed;
    if (!c.sampler.empty()) cfg["sampler"] = c.sampler;
    cfg["threads"] = c.threads;
    run.set_seed(cfg.value("seed", std::uint64_t{0}));
    OwnedString csv;
    OwnedString summary;
    int passed = 0;
    check(hrex_converge_json(cfg.dump().c_str(), &csv.p, &summary.p, &passed));
    std::cout << (c.format == "csv" ? csv.str() : summary.str() + "\n");
    run.add_file("convergence.csv", csv.str());
    run.add_file("convergence.json", summary.str() + "\n");
    if (!passed)
        for (const auto& f : json::parse(summary.str())["failures"]) run.add_failure("converge: " + f.get<std::string>());
}

void cmd_check(const Common& c, Run& run) {
    const json cfg = load_config(c, run);
    OwnedString result;
    int passed = 0;
    check(hrex_check_json(cfg.dump().c_str(), &result.p, &passed));
    const json table = json::parse(result.str());
    if (c.format == "csv") {
        std::cout << "n,l_n,r_n,long_range,short_range,simplified\n";
        for (const auto& r : table["rows"])
            std::cout << r["n"] << ',' << r["l_n"] << ',' << r["r_n"] << ',' << format_double(r["long_range"]) << ','
                      << format_double(r["short_range"]) << ',' << format_double(r["simplified"]) << '\n';
    } else {
        std::cout << result.str() << '\n';
    }
    run.add_file("check.json", result.str() + "\n");
    for (const char* name : {"long_range", "short_range", "simplified"})
        if (table[name] != "passes") run.add_failure(std::string("check: ") + name + " fails");
}

void cmd_lemma1(const Common& c, Run& run) {
    const json cfg = load_config(c, run);
    OwnedString result;
    int passed = 0;
    check(hrex_lemma1_json(cfg.dump().c_str(), &result.p, &passed));
    std::cout << result.str() << '\n';
    run.add_file("lemma1.json", result.str() + "\n");
    if (!passed) run.add_failure("lemma1: identity violated beyond 1e-12");
}

struct SampleArgs {
    std::uint64_t n = 0;
    std::uint64_t count = 1;
};

void cmd_sample(const Common& c, const SampleArgs& a, Run& run) {
    const json cfg = load_config(c, run);
    const json model_cfg = cfg.contains("model") ? cfg["model"] : cfg;
    const std::uint64_t n = a.n ? a.n : cfg.value("n", std::uint64_t{0});
    if (n < 2) throw CliError{"InvalidArgument", "path length n must be >= 2 (--n or \"n\" in config)"};
    const std::uint64_t seed = c.seed.value_or(cfg.value("seed", std::uint64_t{0}));
    run.set_seed(seed);
    const auto kind = sampler_kind(c.sampler.empty() ? cfg.value("sampler", std::string("cholesky")) : c.sampler);

    hrex_model* raw_model = nullptr;
    check(hrex_model_from_json(model_cfg.dump().c_str(), &raw_model));
    std::unique_ptr<hrex_model, decltype(&hrex_model_free)> model(raw_model, hrex_model_free);
    hrex_paths* raw_paths = nullptr;
    check(hrex_sample(model.get(), n, kind, seed, 0, a.count, &raw_paths));
    std::unique_ptr<hrex_paths, decltype(&hrex_paths_free)> paths(raw_paths, hrex_paths_free);

    const std::size_t len = hrex_paths_length(paths.get());
    const std::size_t d = hrex_paths_dim(paths.get());
    std::ostringstream csv;
    csv << "replicate,k";
    for (std::size_t i = 1; i <= d; ++i) csv << ",x" << i;
    csv << '\n';
    for (std::size_t r = 0; r < hrex_paths_count(paths.get()); ++r) {
        const double* v = hrex_paths_data(paths.get(), r);
        for (std::size_t k = 0; k < len; ++k) {
            csv << r << ',' << k + 1;
            for (std::size_t i = 0; i < d; ++i) csv << ',' << format_double(v[k * d + i]);
            csv << '\n';
        }
    }
    if (run.has_output_dir()) {
        run.add_file("paths.csv", csv.str());
        for (std::size_t r = 0; r < hrex_paths_count(paths.get()); ++r) {
            std::ostringstream name;
            name << "path_" << std::setw(4) << std::setfill('0') << r << ".bin";
            const fs::path file = run.output_dir() / name.str();
            fs::create_directories(run.output_dir());
            check(hrex_paths_write(paths.get(), r, file.string().c_str()));
            run.add_file(name.str(), read_file(file.string()));
        }
        std::cout << json{{"n", len}, {"d", d}, {"count", a.count}, {"seed", seed}}.dump() << '\n';
    } else {
        std::cout << csv.str();
    }
}

void report_failures(const Run& run) {
    if (!run.failed()) return;
    std::cerr << json{{"failures", run.failures()}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hrex: extreme-value limits of Gaussian triangular arrays"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(hrex_version()));

    Common common;
    auto add_common = [&](CLI::App* sub, bool config, bool seed, bool sampler) {
        if (config) sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
        if (seed) sub->add_option("--seed", common.seed, "Root seed (overrides the config)");
        sub->add_option("--threads", common.threads, "Worker threads (0 = all cores)");
        sub->add_option("--out", common.out, "Output directory (HREX_OUT overrides)");
        if (sampler)
            sub->add_option("--sampler", common.sampler, "Path sampler")
                ->check(CLI::IsMember({"cholesky", "circulant"}));
        sub->add_option("--format", common.format, "Stdout format")->check(CLI::IsMember({"csv", "json"}));
    };

    std::string lambda;
    double hx = 0.0;
    double hy = 0.0;
    auto* hl = app.add_subcommand("hlambda", "Bivariate Huesler-Reiss CDF H_lambda(x, y)");
    hl->add_option("--lambda", lambda, "lambda >= 0 or inf")->required();
    hl->add_option("--x", hx)->required();
    hl->add_option("--y", hy)->required();
    add_common(hl, false, false, false);

    ThetaArgs targs;
    auto* th = app.add_subcommand("theta", "Monte Carlo extremal coefficient theta_i(x)");
    add_common(th, true, true, false);
    th->add_option("--i", targs.i, "Target component (1-based)")->required();
    th->add_option("--x", targs.x, "Gumbel-scale levels x_1 .. x_d")->required();
    th->add_option("--K", targs.K, "Truncation lag");
    th->add_option("--samples,-N", targs.samples, "Monte Carlo draws");

    auto* cv = app.add_subcommand("converge", "Empirical maxima against the limit law across n");
    add_common(cv, true, true, true);

    auto* ck = app.add_subcommand("check", "Condition checkers along an n-sweep");
    add_common(ck, true, false, false);

    auto* lm = app.add_subcommand("lemma1", "Exact check of the exceedance decomposition");
    add_common(lm, true, false, false);

    SampleArgs sargs;
    auto* sp = app.add_subcommand("sample", "Sample array paths");
    add_common(sp, true, true, true);
    sp->add_option("--n", sargs.n, "Path length");
    sp->add_option("--count", sargs.count, "Number of paths");

    CLI11_PARSE(app, argc, argv);

    CLI::App* chosen = app.get_subcommands().front();
    Run run(chosen->get_name(), resolve_out(common));
    try {
        if (chosen == hl) cmd_hlambda(lambda, hx, hy, run);
        else if (chosen == th) cmd_theta(common, targs, run);
        else if (chosen == cv) cmd_converge(common, run);
        else if (chosen == ck) cmd_check(common, run);
        else if (chosen == lm) cmd_lemma1(common, run);
        else if (chosen == sp) cmd_sample(common, sargs, run);
        run.write_manifest();
    } catch (const CliError& e) {
        std::cerr << json{{"error", e.code}, {"message", e.message}}.dump() << '\n';
        try {
            run.write_manifest(e);
        } catch (...) {
        }
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return kExitError;
    }
    report_failures(run);
    return run.failed() ? kExitFailedCheck : 0;
}
