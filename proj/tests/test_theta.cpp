#include <doctest.h>

#include <cmath>
#include <vector>

#include "hrex/error.hpp"
#include "hrex/norming.hpp"
#include "hrex/theta.hpp"
#include "oracles/oracle_values.hpp"

using namespace hrex;

namespace {

MonteCarloOptions mc(std::uint64_t samples, std::uint64_t seed = 1) {
    MonteCarloOptions o;
    o.samples = samples;
    o.seed = seed;
    return o;
}

DeltaSpec bivariate(double lambda) { return DeltaSpec::from_entries(2, {{0, 1, 0, lambda}}); }

// delta_jt(k) = k^alpha plus a nugget 0.5 between distinct components.
DeltaSpec variogram_spec(std::size_t d, double alpha, std::uint64_t horizon) {
    std::vector<DeltaEntry> entries;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j)
            for (std::uint64_t k = 0; k <= horizon; ++k) {
                if (i == j && k == 0) continue;
                entries.push_back({i, j, k, std::pow(static_cast<double>(k), alpha) + (i == j ? 0.0 : 0.5)});
            }
    return DeltaSpec::from_entries(d, entries);
}

}  // namespace

TEST_CASE("W covariance entries") {
    const auto single = build_w_covariance(DeltaSpec::from_entries(1, {{0, 0, 1, 0.7}}), 0, 1);
    REQUIRE(single.indices.size() == 1);
    CHECK(single.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    const auto pair = build_w_covariance(DeltaSpec::from_entries(1, {{0, 0, 1, 1.0}, {0, 0, 2, 2.0}}), 0, 2);
    REQUIRE(pair.indices.size() == 2);
    CHECK(pair.indices[0] == WIndex{2, 0});
    CHECK(pair.indices[1] == WIndex{3, 0});
    CHECK(pair.matrix(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK((pair.factor * pair.factor.transpose() - pair.matrix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("W covariance is symmetric with unit diagonal and PSD for variograms") {
    for (double alpha : {0.5, 1.0, 1.5, 2.0})
        for (std::size_t d : {1u, 2u}) {
            const auto spec = variogram_spec(d, alpha, 4);
            for (std::size_t target = 0; target < d; ++target) {
                WCovariance w;
                CHECK_NOTHROW(w = build_w_covariance(spec, target, 4));
                CHECK(w.matrix.isApprox(w.matrix.transpose()));
                for (Eigen::Index i = 0; i < w.matrix.rows(); ++i)
                    CHECK(w.matrix(i, i) == doctest::Approx(1.0).epsilon(1e-14));
            }
        }
}

TEST_CASE("invalid delta specs are rejected") {
    try {
        build_w_covariance(DeltaSpec::from_entries(1, {{0, 0, 1, 1.0}, {0, 0, 2, 5.0}}), 0, 2);
        FAIL("expected InvalidDeltaSpec");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidDeltaSpec);
    }
    // finite endpoints joined by an infinite delta
    CHECK_THROWS_AS(build_w_covariance(DeltaSpec::from_entries(1, {{0, 0, 1, 1.0}, {0, 0, 3, 1.0}}), 0, 3), Error);
}

TEST_CASE("constraint sets") {
    const std::vector<double> x2{0.4, -0.3};
    CHECK(build_constraints(DeltaSpec::from_entries(2, {}), x2, 0, 0).rows.empty());
    CHECK(build_constraints(DeltaSpec::from_entries(2, {}), x2, 1, 0).rows.empty());

    const double lambda = 1.7;
    const auto spec = bivariate(lambda);
    const auto second = build_constraints(spec, x2, 1, 0);
    REQUIRE(second.rows.size() == 1);
    CHECK(second.includes_lag0_cross);
    CHECK(second.rows[0].w == WIndex{1, 0});
    CHECK(second.rows[0].scale == doctest::Approx(std::sqrt(lambda)));
    CHECK(second.rows[0].bound == doctest::Approx(lambda + (x2[0] - x2[1]) / 2.0));
    const auto first = build_constraints(spec, x2, 0, 0);
    CHECK(first.rows.empty());
    CHECK_FALSE(first.includes_lag0_cross);

    const auto serial = DeltaSpec::from_entries(2, {{0, 1, 0, 1.0}, {0, 0, 1, 2.0}, {0, 1, 1, 3.0}});
    for (const auto& row : build_constraints(serial, x2, 0, 1).rows) {
        CHECK(row.w.k == 2);
        CHECK(row.scale * row.scale == doctest::Approx(serial(row.w.t, 0, 1).value()));
    }
    const auto second_serial = build_constraints(serial, x2, 1, 1);
    REQUIRE(second_serial.rows.size() == 2);
    CHECK(second_serial.rows[0].w == WIndex{1, 0});
    CHECK(second_serial.rows[1].w == WIndex{2, 0});
    CHECK(second_serial.rows[1].bound == doctest::Approx(3.0 + (x2[0] - x2[1]) / 2.0));

    const auto zero = build_constraints(bivariate(0.0), x2, 1, 0);
    REQUIRE(zero.rows.size() == 1);
    CHECK(zero.rows[0].scale == 0.0);
    CHECK(zero.rows[0].bound == doctest::Approx((x2[0] - x2[1]) / 2.0));
    CHECK_THROWS_AS(build_constraints(spec, std::vector<double>{0.0}, 0, 0), Error);
}

TEST_CASE("empty constraint set gives exactly one") {
    const auto spec = DeltaSpec::from_entries(3, {});
    const std::vector<double> x{0.0, 1.0, -1.0};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto r = theta_for_spec(spec, x, i, std::nullopt, mc(1000));
        CHECK(r.estimate.value == 1.0);
        CHECK(r.estimate.std_error == 0.0);
        CHECK_FALSE(r.doubled.has_value());
    }
}

TEST_CASE("pure exponential constraint") {
    ConstraintSet cs;
    cs.rows.push_back({{1, 0}, 0.0, 0.0});
    WCovariance empty;
    CHECK(estimate_theta(cs, empty, mc(10000)).value == 0.0);

    cs.rows[0].bound = 0.5;
    const auto est = estimate_theta(cs, empty, mc(200000));
    CHECK(std::abs(est.value - (1.0 - std::exp(-1.0))) <= 4.0 * est.std_error);
}

TEST_CASE("single constraint agrees with the quadrature oracle") {
    for (const auto& row : oracle::kThetaSingle) {
        const double delta = row[0];
        const double shift = row[1];
        const std::vector<double> x{2.0 * shift, 0.0};
        const auto r = theta_for_spec(bivariate(delta), x, 1, std::nullopt, mc(100000, 7));
        CHECK(std::abs(r.estimate.value - row[2]) <= 3.0 * r.estimate.std_error);
        CHECK(r.estimate.std_error <= 0.5 / std::sqrt(100000.0));
    }
}

TEST_CASE("quadrature oracle") {
    for (const auto& row : oracle::kThetaSingle) {
        CHECK(std::abs(theta_oracle_single(row[0], row[1]) - row[2]) <= 1e-9);
        CHECK(std::abs(theta_oracle_single_trapezoid(row[0], row[1]) - row[2]) <= 1e-7);
    }
    CHECK(std::abs(theta_oracle_single(1.0, 0.0) - theta_oracle_single_trapezoid(1.0, 0.0)) <= 1e-7);
    CHECK(theta_oracle_single(1e6, 0.0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(theta_oracle_single(1.0, -1e6) < 1e-12);
    CHECK_THROWS_AS(theta_oracle_single(0.0, 0.0), Error);
    CHECK_THROWS_AS(theta_oracle_single(-1.0, 0.0), Error);
}

TEST_CASE("bivariate closed form") {
    for (double lambda : {0.3, 1.0, 2.5}) {
        const auto [t1, t2] = theta_bivariate_closed_form(lambda, 0.7, 0.7);
        CHECK(t1 == doctest::Approx(std_normal_cdf(std::sqrt(lambda))));
        CHECK(t2 == t1);
    }
    const auto [a, b] = theta_bivariate_closed_form(1e8, 0.3, -0.4);
    CHECK(a == doctest::Approx(1.0));
    CHECK(b == doctest::Approx(1.0));
    const auto [c1, c2] = theta_bivariate_closed_form(1.0, 0.0, 0.0);
    const std::vector<double> th{c1, c2};
    const std::vector<double> x{0.0, 0.0};
    CHECK(std::abs(limit_cdf(th, x) - hr_bivariate_cdf(1.0, 0.0, 0.0)) <= 1e-12);
    CHECK_THROWS_AS(theta_bivariate_closed_form(0.0, 0.0, 0.0), Error);
    CHECK_THROWS_AS(theta_bivariate_closed_form(INFINITY, 0.0, 0.0), Error);
}

TEST_CASE("bivariate Monte Carlo split and exponent") {
    for (const auto& row : oracle::kThetaBivariateTarget2) {
        const double lambda = row[0];
        const std::vector<double> x{row[1], row[2]};
        const auto spec = bivariate(lambda);
        const auto t1 = theta_for_spec(spec, x, 0, std::nullopt, mc(50000, 3)).estimate;
        const auto t2 = theta_for_spec(spec, x, 1, std::nullopt, mc(50000, 3)).estimate;
        CHECK(t1.value == 1.0);
        CHECK(std::abs(t2.value - row[3]) <= 3.0 * t2.std_error);

        const auto [c1, c2] = theta_bivariate_closed_form(lambda, x[0], x[1]);
        const double exact = c1 * std::exp(-x[0]) + c2 * std::exp(-x[1]);
        CHECK(std::abs(row[3] * std::exp(-x[1]) + std::exp(-x[0]) - exact) <= 1e-12);

        const std::vector<double> th{t1.value, t2.value};
        const double se = t2.std_error * std::exp(-x[1]) * limit_cdf(th, x);
        CHECK(std::abs(limit_cdf(th, x) - hr_bivariate_cdf(lambda, x[0], x[1])) <= 4.0 * se);
    }
}

TEST_CASE("lambda zero reduction") {
    for (double x1 : {-1.0, 0.0, 0.5, 2.0})
        for (double x2 : {-1.0, 0.0, 0.5, 2.0}) {
            const std::vector<double> x{x1, x2};
            const double analytic = std::max(0.0, 1.0 - std::exp(-(x1 - x2)));
            const auto est = theta_for_spec(bivariate(0.0), x, 1, std::nullopt, mc(100000, 9)).estimate;
            CHECK(std::abs(est.value - analytic) <= 4.0 * est.std_error + 1e-12);
            const std::vector<double> th{1.0, analytic};
            CHECK(std::abs(limit_cdf(th, x) - std::exp(-std::exp(-std::min(x1, x2)))) <= 1e-12);
            CHECK(std::abs(limit_cdf(th, x) - hr_bivariate_cdf(0.0, x1, x2)) <= 1e-12);
        }
}

TEST_CASE("adding constraints is pathwise monotone under common random numbers") {
    const auto spec = variogram_spec(2, 1.0, 3);
    const std::vector<double> x{0.2, -0.4};
    const auto wcov = build_w_covariance(spec, 1, 3);
    const auto full = build_constraints(spec, x, 1, 3);
    std::vector<ConstraintSet> nested;
    for (std::size_t r = 0; r <= full.rows.size(); ++r) {
        ConstraintSet cs = full;
        cs.rows.resize(r);
        nested.push_back(cs);
    }
    const auto est = estimate_theta(nested, wcov, mc(100000, 5));
    CHECK(est.front().value == 1.0);
    for (std::size_t r = 1; r < est.size(); ++r) CHECK(est[r].value <= est[r - 1].value);
}

TEST_CASE("estimates do not depend on the thread count") {
    const auto spec = variogram_spec(2, 1.5, 2);
    const std::vector<double> x{0.0, 0.5};
    MonteCarloOptions one = mc(300000, 4);
    one.threads = 1;
    MonteCarloOptions four = one;
    four.threads = 4;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto a = theta_for_spec(spec, x, i, std::nullopt, one).estimate;
        const auto b = theta_for_spec(spec, x, i, std::nullopt, four).estimate;
        CHECK(a.value == b.value);
    }
}

TEST_CASE("truncation for unbounded horizons") {
    const auto linear = DeltaSpec::from_function(
        1, [](std::size_t, std::size_t, std::uint64_t k) { return ExtendedReal(static_cast<double>(k)); },
        std::nullopt);
    const std::vector<double> x{0.0};
    CHECK_THROWS_AS(theta_for_spec(linear, x, 0, std::nullopt, mc(1000)), Error);
    const auto r = theta_for_spec(linear, x, 0, 4, mc(100000, 2));
    REQUIRE(r.doubled.has_value());
    CHECK(r.estimate.truncation_K == 4);
    CHECK(r.doubled->truncation_K == 8);
    CHECK(*r.truncation_gap >= 0.0);
    CHECK(r.doubled->value <= r.estimate.value);
    CHECK(r.estimate.value > 0.0);
}

TEST_CASE("missing W index is a dimension mismatch") {
    ConstraintSet cs;
    cs.rows.push_back({{2, 0}, 1.0, 1.0});
    WCovariance empty;
    CHECK_THROWS_AS(estimate_theta(cs, empty, mc(10)), Error);
    CHECK_THROWS_AS(estimate_theta(cs, empty, mc(0)), Error);
}
