#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mtbounds/measure.hpp"
#include "mtbounds/pair.hpp"
#include "mtbounds/quadrature.hpp"

using namespace mtbounds;

TEST_CASE("cdf basics") {
    CHECK(Measure::uniform(-2, 2).cdf(0.0) == Catch::Approx(0.5));
    Measure mix({{-0.5, 0.5}}, {{0, 1, 0.5}});
    CHECK(mix.cdf(-0.5) == Catch::Approx(0.5));  // atom included (right cont.)
    CHECK(mix.cdf_left(-0.5) == Catch::Approx(0.0));
    CHECK(Measure::uniform(-1, 1).cdf(0.5) == Catch::Approx(0.75));
}

TEST_CASE("quantile_left basics and errors") {
    CHECK(Measure::uniform(-1, 1).quantile_left(0.5) == Catch::Approx(0.0).margin(1e-14));
    Measure mix({{-0.5, 0.5}}, {{0, 1, 0.5}});
    CHECK(mix.quantile_left(0.25) == Catch::Approx(-0.5));  // atom plateau
    CHECK(Measure::uniform(-1, 1).quantile_left(0.75) == Catch::Approx(0.5));
    CHECK_THROWS_AS(mix.quantile_left(0.0), std::domain_error);
    CHECK_THROWS_AS(mix.quantile_left(1.0), std::domain_error);
    CHECK_THROWS_AS(mix.quantile_left(-0.2), std::domain_error);
}

TEST_CASE("moments") {
    CHECK(Measure::uniform(-2, 2).mean() == Catch::Approx(0.0).margin(1e-15));
    CHECK(Measure::uniform(-1, 1).second_moment() == Catch::Approx(1.0 / 3));
    // direct integral: int x^2 /4 over [-3,-1] u [1,3] halves = 13/3
    Measure two({}, {{-3, -1, 0.5}, {1, 3, 0.5}});
    const double oracle =
        adaptive_simpson([](double x) { return x * x * 0.25; }, -3, -1, 1e-12) +
        adaptive_simpson([](double x) { return x * x * 0.25; }, 1, 3, 1e-12);
    CHECK(two.second_moment() == Catch::Approx(oracle).epsilon(1e-12));
    CHECK(two.second_moment() == Catch::Approx(13.0 / 3));
}

TEST_CASE("call values") {
    // quadrature oracle for U[-2,2] at 0: int_0^2 y/4 dy
    const double oracle =
        adaptive_simpson([](double y) { return y * 0.25; }, 0, 2, 1e-12);
    CHECK(Measure::uniform(-2, 2).call_value(0.0) == Catch::Approx(oracle));
    CHECK(Measure::uniform(-1, 1).call_value(1.0) == 0.0);
    // paper value C_nu(1) = (3-1)^2/8 for the two-piece upper marginal
    CHECK(fixtures::upper_nu().call_value(1.0) == Catch::Approx(0.5));
}

TEST_CASE("call function is convex and 1-Lipschitz decreasing") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    for (int rep = 0; rep < 25; ++rep) {
        auto [mu, nu] = fixtures::random_dispersed_pair(rng);
        for (const Measure& m : {mu, nu}) {
            for (int k = 0; k < 40; ++k) {
                double x = unif(rng), y = unif(rng);
                if (x > y) std::swap(x, y);
                const double cx = m.call_value(x), cy = m.call_value(y);
                CHECK(cx - cy >= -1e-12);
                CHECK(cx - cy <= (y - x) * m.mass() + 1e-12);
                const double mid = 0.5 * (x + y);
                CHECK(m.call_value(mid) <= 0.5 * (cx + cy) + 1e-12);
            }
        }
    }
}

TEST_CASE("quantile/cdf roundtrip") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto [mu, nu] = fixtures::random_dispersed_pair(rng);
    for (const Measure& m : {mu, nu, fixtures::atoms_nu(), fixtures::atoms_mu()}) {
        for (int k = 0; k < 60; ++k) {
            const double u = std::clamp(unif(rng), 1e-6, 1.0 - 1e-6);
            const double x = m.quantile_left(u);
            CHECK(m.cdf(x) >= u - 1e-11);
            const double xs = -3.0 + 6.0 * unif(rng);
            const double fx = m.cdf(xs);
            if (fx > 0.0 && fx < 1.0) {
                CHECK(m.quantile_left(std::clamp(fx, 1e-12, 1 - 1e-12)) <=
                      xs + 1e-9);
            }
        }
    }
}

TEST_CASE("convex order verdicts") {
    CHECK(convex_order_leq(fixtures::uniform_mu(), fixtures::uniform_nu()).holds);
    auto rev = convex_order_leq(fixtures::uniform_nu(), fixtures::uniform_mu());
    CHECK_FALSE(rev.holds);
    CHECK(rev.witness == Catch::Approx(0.0).margin(1e-9));
    CHECK(convex_order_leq(fixtures::uniform_mu(), fixtures::uniform_mu()).holds);
    // unequal means: witness at +-infinity
    auto shifted = convex_order_leq(Measure::uniform(-1, 1),
                                    Measure::uniform(-1.5, 2.5));
    CHECK_FALSE(shifted.holds);
    CHECK(std::isinf(shifted.witness));
}

TEST_CASE("decompose on the paper pairs") {
    SECTION("uniform") {
        auto pair = decompose(fixtures::uniform_mu(), fixtures::uniform_nu());
        CHECK(pair.kappa == Catch::Approx(0.5).margin(1e-14));
        CHECK(pair.a == Catch::Approx(-1.0));
        CHECK(pair.b == Catch::Approx(1.0));
        CHECK(pair.gamma_a == Catch::Approx(0.5).margin(1e-14));
        // oracle: min density on [-1,1] is 1/4
        CHECK(pair.common.density(0.0) == Catch::Approx(0.25));
    }
    SECTION("identical") {
        auto pair = decompose(fixtures::uniform_mu(), fixtures::uniform_mu());
        CHECK(pair.identical);
        CHECK(pair.kappa == 1.0);
    }
    SECTION("moduniform: disjoint supports") {
        auto pair = decompose(fixtures::moduniform_mu(), fixtures::moduniform_nu());
        CHECK(pair.kappa == Catch::Approx(0.0).margin(1e-14));
        CHECK(pair.a == Catch::Approx(-1.0));
        CHECK(pair.b == Catch::Approx(1.0));
        CHECK(pair.gamma_a == Catch::Approx(0.625));
    }
    SECTION("dispersion violation carries the offending subinterval") {
        // nu has mass strictly inside the eta support hull
        Measure mu({}, {{-1, -0.6, 0.5}, {0.6, 1, 0.5}});
        Measure nu({}, {{-2, -1.4, 0.25}, {-0.2, 0.2, 0.5}, {1.4, 2, 0.25}});
        REQUIRE(convex_order_leq(mu, nu).holds);
        CHECK_THROWS_AS(decompose(mu, nu), DispersionError);
    }
}

TEST_CASE("decompose conservation and matched residual means") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 20; ++rep) {
        auto [mu, nu] = fixtures::random_dispersed_pair(rng);
        auto pair = decompose(mu, nu);
        REQUIRE_FALSE(pair.identical);
        const double k = pair.kappa;
        // mu = common + (1-kappa) eta_bar, nu = common + (1-kappa) gamma_bar
        std::vector<double> probes = mu.breakpoints();
        for (double x : nu.breakpoints()) probes.push_back(x);
        for (double x : probes) {
            CHECK(pair.common.cdf(x) + (1 - k) * pair.eta_bar.cdf(x) ==
                  Catch::Approx(mu.cdf(x)).margin(1e-12));
            CHECK(pair.common.cdf(x) + (1 - k) * pair.gamma_bar.cdf(x) ==
                  Catch::Approx(nu.cdf(x)).margin(1e-12));
        }
        CHECK(pair.eta_bar.mean() ==
              Catch::Approx(pair.gamma_bar.mean()).margin(1e-12));
        CHECK(pair.eta_bar.mass() == Catch::Approx(1.0).margin(1e-12));
        CHECK(pair.gamma_bar.mass() == Catch::Approx(1.0).margin(1e-12));
        CHECK(pair.gamma_a > 0.0);
        CHECK(pair.gamma_a < 1.0);
    }
}

TEST_CASE("discretize_to_pieces approximates a density") {
    auto m = discretize_to_pieces(
        [](double x) { return 0.75 * (1.0 - x * x); }, -1.0, 1.0, 1e-7);
    CHECK(m.mass() == Catch::Approx(1.0).margin(1e-5));
    CHECK(m.mean() == Catch::Approx(0.0).margin(1e-6));
    CHECK(m.cdf(0.0) == Catch::Approx(0.5).margin(1e-5));
}
