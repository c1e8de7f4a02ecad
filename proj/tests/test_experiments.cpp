#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hrex/error.hpp"
#include "hrex/experiments.hpp"
#include "hrex/norming.hpp"
#include "oracles/oracle_values.hpp"

using namespace hrex;

namespace {

ExperimentConfig iid_config(std::size_t d) {
    ExperimentConfig cfg;
    cfg.model = iid_model(d);
    cfg.n_list = {1000};
    cfg.replicates = 2000;
    cfg.x_grid = {std::vector<double>(d, 0.0)};
    cfg.seed = 17;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    auto cfg = iid_config(1);
    CHECK_NOTHROW(validate(cfg));
    cfg.n_list = {1000, 1000};
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.n_list = {1000};
    cfg.replicates = 99;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.replicates = 100;
    cfg.x_grid.clear();
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.x_grid = {{0.0, 1.0}};
    CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("iid Gumbel limit at n = 1e4") {
    auto cfg = iid_config(1);
    cfg.n_list = {10000};
    cfg.replicates = 10000;
    const auto emp = run_maxima_experiment(cfg).front();
    const double p = static_cast<double>(emp.counts[0]) / 1e4;
    const double se = std::sqrt(p * (1.0 - p) / 1e4);
    CHECK(std::abs(p - std::exp(-1.0)) <= 4.0 * se + 0.03);
    // exact finite-n law Phi(u_n(0))^n
    CHECK(std::abs(p - oracle::kGumbelFiniteN[4][2]) <= 4.0 * se);
}

TEST_CASE("counts are bounded, monotone, and saturate at the surrogate") {
    auto cfg = iid_config(2);
    cfg.model = hr_family(DeltaSpec::from_entries(2, {{0, 1, 0, 1.0}}));
    cfg.replicates = 3000;
    cfg.x_grid = {{-1.0, -1.0}, {-1.0, 0.0}, {0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}, {kInfinitySurrogate, kInfinitySurrogate}};
    const auto emp = run_maxima_experiment(cfg).front();
    for (auto c : emp.counts) CHECK(c <= cfg.replicates);
    for (std::size_t g = 1; g < emp.counts.size(); ++g) CHECK(emp.counts[g] >= emp.counts[g - 1]);
    CHECK(emp.counts.back() >= cfg.replicates - 1);
}

TEST_CASE("vacuous coordinate reproduces the lower-dimensional counts") {
    const auto model = hr_family(DeltaSpec::from_entries(3, {{0, 1, 0, 0.8}, {1, 2, 0, 1.2}, {0, 2, 0, 2.0}}));
    const auto maxima = simulate_maxima(model, 500, 2000, SamplerKind::Cholesky, 3, 2);
    std::vector<double> first_two;
    for (std::size_t r = 0; r < 2000; ++r) {
        first_two.push_back(maxima[r * 3]);
        first_two.push_back(maxima[r * 3 + 1]);
    }
    const std::vector<std::vector<double>> grid3{{0.0, 0.5, kInfinitySurrogate}, {-0.5, 1.0, kInfinitySurrogate}};
    const std::vector<std::vector<double>> grid2{{0.0, 0.5}, {-0.5, 1.0}};
    const auto full = count_below_thresholds(maxima, 3, 500, grid3);
    const auto reduced = count_below_thresholds(first_two, 2, 500, grid2);
    CHECK(full.counts == reduced.counts);
}

TEST_CASE("compare_to_limit") {
    EmpiricalCdf emp;
    emp.n = 100;
    emp.replicates = 1000;
    emp.x_grid = {{0.0}, {1.0}};
    emp.counts = {368, 692};
    const std::vector<std::vector<double>> th{{1.0}, {1.0}};
    const auto entry = compare_to_limit(emp, th);
    REQUIRE(entry.points.size() == 2);
    CHECK(entry.points[0].deviation == doctest::Approx(std::abs(0.368 - std::exp(-1.0))));
    CHECK(entry.points[0].std_error == doctest::Approx(std::sqrt(0.368 * 0.632 / 1000.0)));
    CHECK(entry.sup_deviation >= entry.points[1].deviation);

    // synthetic perfect agreement
    EmpiricalCdf exact;
    exact.replicates = 1000;
    exact.x_grid = {{0.0, 0.0}};
    exact.counts = {500};
    const double x = -std::log(std::log(2.0) / 2.0);
    exact.x_grid = {{x, x}};
    const auto zero = compare_to_limit(exact, {{1.0, 1.0}});
    CHECK(zero.sup_deviation == doctest::Approx(0.0).epsilon(1e-14));

    CHECK_THROWS_AS(compare_to_limit(emp, {{1.0}}), Error);
}

TEST_CASE("trend rule") {
    auto entry = [](double dev, double se) {
        ConvergenceEntry e;
        e.sup_deviation = dev;
        e.max_std_error = se;
        return e;
    };
    const std::vector<ConvergenceEntry> down{entry(0.05, 0.003), entry(0.04, 0.003), entry(0.03, 0.003)};
    CHECK(trend_decreasing(down));
    const std::vector<ConvergenceEntry> noisy{entry(0.04, 0.003), entry(0.045, 0.003)};
    CHECK(trend_decreasing(noisy));
    const std::vector<ConvergenceEntry> up{entry(0.02, 0.003), entry(0.04, 0.003)};
    CHECK_FALSE(trend_decreasing(up));
}

TEST_CASE("limit routes") {
    const std::vector<std::vector<double>> grid{{0.0, 0.5}, {1.0, -1.0}};
    const auto product = limit_thetas(DeltaSpec::from_entries(2, {}), grid, {}, 1, 1);
    CHECK(product.method == "product_gumbel");
    CHECK(product.theta[0] == std::vector<double>{1.0, 1.0});

    const auto closed = limit_thetas(DeltaSpec::from_entries(2, {{0, 1, 0, 1.0}}), grid, {}, 1, 1);
    CHECK(closed.method == "hr_closed_form");
    for (std::size_t g = 0; g < grid.size(); ++g)
        CHECK(limit_cdf(closed.theta[g], grid[g]) ==
              doctest::Approx(hr_bivariate_cdf(1.0, grid[g][0], grid[g][1])).epsilon(1e-13));

    const auto comonotone = limit_thetas(DeltaSpec::from_entries(2, {{0, 1, 0, 0.0}}), grid, {}, 1, 1);
    for (std::size_t g = 0; g < grid.size(); ++g)
        CHECK(limit_cdf(comonotone.theta[g], grid[g]) ==
              doctest::Approx(hr_bivariate_cdf(0.0, grid[g][0], grid[g][1])).epsilon(1e-13));

    ThetaSettings settings;
    settings.samples = 20000;
    const auto mc = limit_thetas(DeltaSpec::from_entries(1, {{0, 0, 1, 1.0}}), {{0.0}}, settings, 1, 1);
    CHECK(mc.method == "theta_monte_carlo");
    CHECK(mc.theta[0][0] == doctest::Approx(theta_oracle_single(1.0, 0.0)).epsilon(0.02));
}

TEST_CASE("convergence report is reproducible and well formed") {
    ExperimentConfig cfg;
    cfg.model = hr_family(DeltaSpec::from_entries(2, {{0, 1, 0, 1.0}}));
    cfg.n_list = {100, 1000};
    cfg.replicates = 500;
    cfg.x_grid = {{0.0, 0.0}, {1.0, -1.0}};
    cfg.seed = 99;
    cfg.threads = 1;
    const auto a = run_convergence(cfg);
    cfg.threads = 3;
    const auto b = run_convergence(cfg);
    CHECK(convergence_csv(a) == convergence_csv(b));
    CHECK(a.limit_method == "hr_closed_form");
    const auto csv = convergence_csv(a);
    CHECK(csv.rfind("n,x1,x2,empirical,limit,deviation,std_error\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    for (const auto& e : a.entries)
        for (const auto& p : e.points) {
            CHECK(p.deviation >= 0.0);
            CHECK(p.std_error == doctest::Approx(std::sqrt(p.empirical * (1 - p.empirical) / 500.0)));
        }

    cfg.seed = 100;
    CHECK(convergence_csv(run_convergence(cfg)) != convergence_csv(a));

    cfg.max_final_deviation = 0.0;
    const auto strict = run_convergence(cfg);
    CHECK_FALSE(strict.passed);
    CHECK_FALSE(strict.failures.empty());
}

TEST_CASE("exceedance identity on the uniform three-point example") {
    CellLaw law{{-1.0, 0.0, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    const auto dist = product_distribution(3, 2, std::vector<CellLaw>(6, law));
    CHECK(dist.atoms.size() == 729);
    const std::vector<double> u{0.0, 0.0};
    const auto r = lemma1_check(dist, u);
    CHECK(r.difference <= 1e-12);
    CHECK(r.mismatched_atoms == 0);
    CHECK(r.lhs == doctest::Approx(1.0 - std::pow(2.0 / 3.0, 6)).epsilon(1e-14));
}

TEST_CASE("exceedance identity reduces to the one-dimensional decomposition") {
    CellLaw a{{0.0, 2.0, 5.0}, {0.5, 0.25, 0.25}};
    CellLaw b{{1.0, 3.0}, {0.6, 0.4}};
    const auto dist = product_distribution(2, 1, {a, b});
    const std::vector<double> u{2.5};
    const auto r = lemma1_check(dist, u);
    const double p1 = 0.25;  // X_1 > u
    const double p2 = 0.4;   // X_2 > u
    CHECK(r.lhs == doctest::Approx(1.0 - (1 - p1) * (1 - p2)).epsilon(1e-15));
    CHECK(r.rhs == doctest::Approx(p1 * (1 - p2) + p2).epsilon(1e-15));
    CHECK(r.difference <= 1e-15);
    CHECK(r.mismatched_atoms == 0);
}

TEST_CASE("exceedance identity with thresholds above the support") {
    CellLaw law{{-1.0, 0.0, 1.0}, {0.2, 0.3, 0.5}};
    const auto dist = product_distribution(2, 2, std::vector<CellLaw>(4, law));
    const std::vector<double> u{kInfinitySurrogate, kInfinitySurrogate};
    const auto r = lemma1_check(dist, u);
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs == 0.0);
}

TEST_CASE("exceedance identity on random instances") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> dim(1, 3);
    std::uniform_int_distribution<int> len(1, 4);
    std::uniform_int_distribution<int> support(1, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> value(-2, 2);
    for (int instance = 0; instance < 40; ++instance) {
        const std::size_t d = static_cast<std::size_t>(dim(gen));
        const std::size_t n = static_cast<std::size_t>(len(gen));
        std::vector<CellLaw> cells(n * d);
        for (auto& c : cells) {
            const int s = support(gen);
            double total = 0.0;
            for (int a = 0; a < s; ++a) {
                c.values.push_back(value(gen));
                c.probabilities.push_back(unit(gen) + 0.05);
                total += c.probabilities.back();
            }
            for (auto& p : c.probabilities) p /= total;
        }
        std::vector<double> u(d);
        for (auto& v : u) v = value(gen) + 0.5 * (unit(gen) < 0.5 ? 0.0 : 1.0);
        const auto r = lemma1_check(product_distribution(n, d, cells), u);
        CHECK(r.difference <= 1e-12);
        CHECK(r.mismatched_atoms == 0);
    }
}

TEST_CASE("exceedance identity input checks") {
    CellLaw law{{0.0, 1.0, 2.0, 3.0}, {0.25, 0.25, 0.25, 0.25}};
    try {
        product_distribution(4, 3, std::vector<CellLaw>(12, law));
        FAIL("expected SupportTooLarge");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SupportTooLarge);
    }
    const auto dist = product_distribution(1, 2, std::vector<CellLaw>(2, law));
    CHECK_THROWS_AS(lemma1_check(dist, std::vector<double>{0.0}), Error);
    CHECK_THROWS_AS(lemma1_check(dist, std::vector<double>{0.0, INFINITY}), Error);
    CHECK_THROWS_AS(product_distribution(1, 2, std::vector<CellLaw>(1, law)), Error);
}

TEST_CASE("block consistency") {
    const std::vector<double> x{0.0};
    const auto iid = block_consistency_check(iid_model(1), 1000, 100, 20000, x, SamplerKind::Cholesky, 5, 2);
    CHECK(iid.q_n == 10);
    CHECK(iid.gap <= 4.0 * iid.std_error);
    CHECK(iid.block_prob >= iid.full_prob);

    const auto whole = block_consistency_check(iid_model(1), 1000, 1000, 500, x, SamplerKind::Cholesky, 5, 2);
    CHECK(whole.q_n == 1);
    CHECK(whole.gap == 0.0);
    CHECK_THROWS_AS(block_consistency_check(iid_model(1), 100, 0, 10, x, SamplerKind::Cholesky, 5, 1), Error);
}
