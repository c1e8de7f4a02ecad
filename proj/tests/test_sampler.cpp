#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "hrex/error.hpp"
#include "hrex/experiments.hpp"
#include "hrex/logging.hpp"
#include "hrex/rng.hpp"
#include "hrex/sampler.hpp"

using namespace hrex;

namespace {

// Fraction of covariance entries inside a 3-sigma band around the target.
double covariance_band_fraction(const std::vector<SamplePath>& paths, const BlockCovariance& cov) {
    const std::size_t m = cov.size();
    const double r = static_cast<double>(paths.size());
    std::vector<double> sums(m * m, 0.0);
    for (const auto& p : paths)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b <= a; ++b) sums[a * m + b] += p.values[a] * p.values[b];
    std::size_t inside = 0;
    std::size_t total = 0;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            const double target = cov(a, b);
            const double band = 3.0 * std::sqrt((1.0 + target * target) / r);
            inside += std::abs(sums[a * m + b] / r - target) <= band ? 1 : 0;
            ++total;
        }
    return static_cast<double>(inside) / static_cast<double>(total);
}

double lag_correlation(const std::vector<SamplePath>& paths, std::size_t lag) {
    double s = 0.0;
    double c = 0.0;
    for (const auto& p : paths)
        for (std::size_t k = 0; k + lag < p.n; ++k) {
            s += p.values[k] * p.values[k + lag];
            c += 1.0;
        }
    return s / c;
}

CorrelationModel gaussian_kernel(double length) {
    return CorrelationModel(
        "kernel", 1,
        [length](std::size_t, std::size_t, std::uint64_t k, const SampleSize&) {
            const double t = static_cast<double>(k) / length;
            return std::exp(-t * t);
        },
        std::nullopt);
}

}  // namespace

TEST_CASE("philox streams are deterministic and distinct") {
    Stream a(7, 1, 0);
    Stream b(7, 1, 0);
    Stream c(7, 1, 1);
    Stream e(7, 2, 0);
    Stream f(8, 1, 0);
    bool differs_index = false;
    bool differs_domain = false;
    bool differs_seed = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        differs_index = differs_index || va != c.next_u64();
        differs_domain = differs_domain || va != e.next_u64();
        differs_seed = differs_seed || va != f.next_u64();
    }
    CHECK(differs_index);
    CHECK(differs_domain);
    CHECK(differs_seed);
}

TEST_CASE("uniform, normal and exponential draws") {
    Stream s(3, 4, 5);
    double sum = 0.0;
    double sq = 0.0;
    double ex = 0.0;
    const int count = 200000;
    for (int i = 0; i < count; ++i) {
        const double u = s.uniform();
        CHECK((u > 0.0 && u < 1.0));
        const double z = s.normal();
        sum += z;
        sq += z * z;
        const double a = s.exponential();
        CHECK(a > 0.0);
        ex += a;
    }
    CHECK(std::abs(sum / count) < 4.0 / std::sqrt(count));
    CHECK(std::abs(sq / count - 1.0) < 4.0 * std::sqrt(2.0 / count));
    CHECK(std::abs(ex / count - 1.0) < 4.0 / std::sqrt(count));
}

TEST_CASE("assemble covariance") {
    const auto cov = assemble_covariance(iid_model(2), 3);
    const Eigen::MatrixXd dense = cov.dense();
    CHECK(dense.isApprox(Eigen::MatrixXd::Identity(6, 6)));
    CHECK(cov.bandwidth() == 1);

    const double lambda = 0.8;
    const auto hr = hr_family(DeltaSpec::from_entries(2, {{0, 1, 0, lambda}}));
    const auto single = assemble_covariance(hr, 1, SampleSize::of(100)).dense();
    const double rho = 1.0 - lambda / std::log(100.0);
    CHECK(single(0, 0) == 1.0);
    CHECK(single(0, 1) == doctest::Approx(rho).epsilon(1e-15));
    CHECK(single(1, 0) == single(0, 1));

    const auto geo = assemble_covariance(geometric_model(2, {1.0, 0.3, 0.3, 1.0}, 0.5), 6).dense();
    CHECK(geo == geo.transpose());
    CHECK(geo(0 * 2 + 1, 2 * 2 + 0) == doctest::Approx(0.3 * 0.25));
    CHECK(geo(2 * 2 + 0, 0 * 2 + 1) == geo(0 * 2 + 1, 2 * 2 + 0));
    for (Eigen::Index i = 0; i < geo.rows(); ++i) CHECK(geo(i, i) == 1.0);
}

TEST_CASE("validate_psd") {
    const auto id = validate_psd(assemble_covariance(iid_model(3), 4));
    CHECK_FALSE(id.jittered());

    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 1.5, 1.5, 1.0;
    try {
        validate_psd(BlockCovariance(1, 2, {bad}));
        FAIL("expected NotPositiveSemidefinite");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotPositiveSemidefinite);
    }

    Eigen::MatrixXd singular(2, 2);
    singular << 1.0, 1.0, 1.0, 1.0;
    const auto f = validate_psd(BlockCovariance(1, 2, {singular}));
    CHECK(f.jittered());
    CHECK(f.jitter() == kDefaultJitter);
}

TEST_CASE("cholesky factor reproduces the covariance") {
    const auto cov = assemble_covariance(geometric_model(2, {1.0, -0.4, -0.4, 1.0}, 0.6), 10);
    const auto f = validate_psd(cov);
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(20, 20);
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t c = 0; c <= r; ++c) l(r, c) = f.at(r, c);
    CHECK((l * l.transpose() - cov.dense()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.at(0, 5) == 0.0);
}

TEST_CASE("dense path matches the banded factor") {
    const auto model = geometric_model(1, {1.0}, 0.9);
    const auto cov = assemble_covariance(model, 300);
    CHECK(cov.bandwidth() == 299);
    const auto f = validate_psd(cov);
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(300, 300);
    for (std::size_t r = 0; r < 300; ++r)
        for (std::size_t c = 0; c <= r; ++c) l(r, c) = f.at(r, c);
    CHECK((l * l.transpose() - cov.dense()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cholesky_sample moments and determinism") {
    const auto cov = assemble_covariance(iid_model(2), 3);
    const auto paths = cholesky_sample(cov, 11, 20000);
    REQUIRE(paths.size() == 20000);
    for (std::size_t e = 0; e < 6; ++e) {
        double mean = 0.0;
        for (const auto& p : paths) mean += p.values[e];
        mean /= 20000.0;
        CHECK(std::abs(mean) < 4.0 / std::sqrt(20000.0));
    }
    const auto again = cholesky_sample(cov, 11, 20000);
    for (std::size_t r = 0; r < paths.size(); r += 997) CHECK(paths[r].values == again[r].values);
    const auto other = cholesky_sample(cov, 12, 1);
    CHECK(other[0].values != paths[0].values);
    CHECK(paths[5].provenance.index == 5);
    CHECK(paths[5].provenance.seed == 11);
}

TEST_CASE("cholesky_sample bivariate correlation") {
    const double rho = 1.0 - 1.0 / std::log(1e4);
    const auto hr = hr_family(DeltaSpec::from_entries(2, {{0, 1, 0, 1.0}}));
    const auto paths = cholesky_sample(assemble_covariance(hr, 1, SampleSize::of(10000)), 5, 1000000);
    double xy = 0.0;
    double xx = 0.0;
    double yy = 0.0;
    for (const auto& p : paths) {
        xy += p.values[0] * p.values[1];
        xx += p.values[0] * p.values[0];
        yy += p.values[1] * p.values[1];
    }
    CHECK(std::abs(xy / std::sqrt(xx * yy) - rho) < 0.005);
}

TEST_CASE("cholesky sampler covariance band") {
    const auto model = geometric_model(2, {1.0, 0.5, 0.5, 1.0}, 0.7);
    const auto cov = assemble_covariance(model, 8);
    CHECK(covariance_band_fraction(cholesky_sample(cov, 2, 20000), cov) >= 0.97);
}

TEST_CASE("circulant sampler matches the model covariance") {
    const auto model = geometric_model(2, {1.0, 0.5, 0.5, 1.0}, 0.7);
    const auto cov = assemble_covariance(model, 8);
    const auto paths = circulant_sample(model, 8, 2, 20000);
    CHECK(covariance_band_fraction(paths, cov) >= 0.97);
    CHECK(paths[3].provenance.index == 1);
}

TEST_CASE("circulant sampler, iid model") {
    const auto paths = circulant_sample(iid_model(1), 500, 9, 2000);
    const double count = 2000.0 * 499.0;
    CHECK(std::abs(lag_correlation(paths, 1)) < 4.0 / std::sqrt(count));
}

TEST_CASE("circulant sampler, geometric lag correlations") {
    const auto paths = circulant_sample(geometric_model(1, {1.0}, 0.5), 1024, 4, 1000);
    for (std::size_t k = 1; k <= 5; ++k) CHECK(std::abs(lag_correlation(paths, k) - std::pow(0.5, k)) < 0.01);
}

TEST_CASE("circulant sampler determinism and chunking") {
    const auto model = geometric_model(2, {1.0, 0.2, 0.2, 1.0}, 0.3);
    const auto sampler = make_sampler(model, 40, SamplerKind::Circulant, 21, 3);
    const auto all = sampler->sample(0, 10);
    const auto tail = sampler->sample(3, 5);
    for (std::size_t r = 0; r < 5; ++r) CHECK(tail[r].values == all[r + 3].values);
    const auto again = make_sampler(model, 40, SamplerKind::Circulant, 21, 3)->sample(0, 10);
    for (std::size_t r = 0; r < 10; ++r) CHECK(again[r].values == all[r].values);
}

TEST_CASE("circulant embedding retries and falls back") {
    const auto kernel = gaussian_kernel(20.0);
    CHECK_THROWS_AS(CirculantSampler(kernel, 64, SampleSize::of(64), 1, 1, 0), Error);
    CirculantSampler grown(kernel, 64, SampleSize::of(64), 1, 1, 3);
    CHECK(grown.embedding_size() > 128);

    std::vector<std::string> warnings;
    set_log_sink([&](const std::string& m) { warnings.push_back(m); });
    CirculantOptions strict;
    strict.max_doublings = 0;
    const auto sampler = make_sampler(kernel, 64, SamplerKind::Circulant, 1, 1, strict);
    set_log_sink({});
    CHECK(dynamic_cast<const CholeskySampler*>(sampler.get()) != nullptr);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("EmbeddingNotPSD") != std::string::npos);

    strict.allow_fallback = false;
    try {
        make_sampler(kernel, 64, SamplerKind::Circulant, 1, 1, strict);
        FAIL("expected EmbeddingNotPSD");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmbeddingNotPSD);
    }
}

TEST_CASE("non-PSD model is rejected by both samplers") {
    const auto bad = hr_family(DeltaSpec::from_entries(1, {{0, 0, 1, 1.0}}));
    CHECK_THROWS_AS(make_sampler(bad, 1000, SamplerKind::Cholesky, 1, 1), Error);
    CHECK_THROWS_AS(make_sampler(bad, 1000, SamplerKind::Circulant, 1, 1), Error);
}

TEST_CASE("componentwise maxima") {
    const std::vector<double> single{0.3, -1.0};
    CHECK(componentwise_maxima(single, 2) == single);
    const std::vector<double> constant{2.0, 2.0, 2.0};
    CHECK(componentwise_maxima(constant, 1) == std::vector<double>{2.0});

    const auto paths = circulant_sample(geometric_model(3, {1, 0.1, 0.2, 0.1, 1, 0.3, 0.2, 0.3, 1}, 0.4), 50, 8, 5);
    for (const auto& p : paths) {
        std::vector<double> brute(3, -INFINITY);
        for (std::size_t k = 0; k < p.n; ++k)
            for (std::size_t i = 0; i < 3; ++i) brute[i] = std::max(brute[i], p.at(k, i));
        CHECK(componentwise_maxima(p) == brute);

        std::vector<double> reversed;
        for (std::size_t k = p.n; k-- > 0;)
            for (std::size_t i = 0; i < 3; ++i) reversed.push_back(p.at(k, i));
        CHECK(componentwise_maxima(reversed, 3) == brute);
    }
    CHECK_THROWS_AS(componentwise_maxima(std::vector<double>{1.0, 2.0, 3.0}, 2), Error);
}

TEST_CASE("path dump round trip") {
    const auto paths = circulant_sample(geometric_model(2, {1.0, 0.2, 0.2, 1.0}, 0.3), 17, 3, 1);
    const auto file = std::filesystem::temp_directory_path() / "hrex_path_roundtrip.bin";
    write_path(paths[0], file);
    CHECK(std::filesystem::file_size(file) == 8 + 16 + 17 * 2 * 8);
    const auto back = read_path(file);
    CHECK(back.n == 17);
    CHECK(back.d == 2);
    CHECK(back.values == paths[0].values);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(read_path(file), Error);
}

TEST_CASE("simulated maxima do not depend on the thread count") {
    const auto model = hr_family(DeltaSpec::from_entries(2, {{0, 1, 0, 1.0}}));
    const auto one = simulate_maxima(model, 200, 300, SamplerKind::Cholesky, 4, 1);
    const auto many = simulate_maxima(model, 200, 300, SamplerKind::Cholesky, 4, 4);
    CHECK(one == many);
    const auto circ1 = simulate_maxima(geometric_model(1, {1.0}, 0.5), 100, 131, SamplerKind::Circulant, 4, 1);
    const auto circ3 = simulate_maxima(geometric_model(1, {1.0}, 0.5), 100, 131, SamplerKind::Circulant, 4, 3);
    CHECK(circ1 == circ3);
}
