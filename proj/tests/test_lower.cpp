#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mtbounds/lower_coupling.hpp"
#include "mtbounds/quadrature.hpp"

using namespace mtbounds;
using namespace fixtures;

namespace {

MarginalPair unif_pair() { return decompose(uniform_mu(), uniform_nu()); }

}  // namespace

TEST_CASE("E_u evaluation") {
    auto pair = unif_pair();
    const Potential pot = Potential::normalized(pair);
    // independent symbolic evaluation of the display at u = 1/2
    const double u = 0.5;
    const double xu = pair.eta_bar.quantile_left(u);
    CHECK(xu == Catch::Approx(0.0).margin(1e-12));
    for (double y : {1.5, 2.0, -2.0, 0.3}) {
        const double expect =
            pot.value(xu) + (y - xu) * (pair.gamma_a - u) - pot.value(y);
        CHECK(E_u(pair, u, y) == Catch::Approx(expect).margin(1e-14));
    }
    // E_u(x_u) = 0 whenever D is continuous at x_u
    CHECK(E_u(pair, 0.25, pair.eta_bar.quantile_left(0.25)) ==
          Catch::Approx(0.0).margin(1e-14));
    CHECK_THROWS_AS(E_u(pair, 0.0, 1.0), std::domain_error);
}

TEST_CASE("phi and tangency points on the uniform fixture") {
    auto pair = unif_pair();
    CouplingMap map(pair);
    auto r = map.at(0.5);
    CHECK(r.P == Catch::Approx(-std::sqrt(3.0)).margin(1e-12));
    CHECK(r.Q == Catch::Approx(std::sqrt(3.0)).margin(1e-12));
    // tangent slope on the normalized potential
    CHECK(r.phi == Catch::Approx((2.0 - std::sqrt(3.0)) / 2.0).margin(1e-12));
    // u -> 0+: Q -> 2 (the paper boundary condition)
    CHECK(map.at(1e-10).Q == Catch::Approx(2.0).margin(1e-7));
    CHECK_THROWS_AS(map.at(0.0), std::domain_error);
    CHECK_THROWS_AS(map.at(1.0), std::domain_error);
}

TEST_CASE("phi and zeta on the atoms fixture branches") {
    auto pair = decompose(atoms_mu(), atoms_nu());
    CouplingMap map(pair, TieBreak::inner, 64);
    const double u = 0.25;
    auto r = map.at(u);
    CHECK(r.P == Catch::Approx(-1.75 / 1.265625).margin(1e-12));
    CHECK(r.Q == Catch::Approx(1.75 / 0.265625).margin(1e-10));
    // zeta(u) = D'(Q(u)) = -1/(2 Q^2)
    CHECK(r.zeta == Catch::Approx(-1.0 / (2.0 * r.Q * r.Q)).margin(1e-12));
    // defining identity phi + zeta + u = gamma_a
    for (double uu : {0.1, 0.37, 0.62, 0.9}) {
        auto s = map.at(uu);
        CHECK(s.phi + s.zeta + uu == Catch::Approx(pair.gamma_a).margin(1e-14));
    }
}

TEST_CASE("zeta is -phi at the symmetric midpoint") {
    auto pair = unif_pair();
    auto r = phi(pair, 0.5);
    CHECK(zeta(pair, 0.5) == Catch::Approx(-r.phi).margin(1e-12));
}

TEST_CASE("build_coupling matches the closed-form maps") {
    SECTION("uniform") {
        CouplingMap map(unif_pair());
        for (int i = 1; i < 100; ++i) {
            const double x = -1.0 + 2.0 * i / 100.0;
            auto r = map.at_x(x);
            CHECK(r.P == Catch::Approx(uniform_p(x)).margin(1e-10));
            CHECK(r.Q == Catch::Approx(uniform_q(x)).margin(1e-10));
        }
    }
    SECTION("moduniform, including the boundary conditions") {
        CouplingMap map(decompose(moduniform_mu(), moduniform_nu()));
        for (int i = 1; i < 100; ++i) {
            const double x = -1.0 + 2.0 * i / 100.0;
            auto r = map.at_x(x);
            CHECK(r.P == Catch::Approx(moduniform_p(x)).margin(1e-10));
            CHECK(r.Q == Catch::Approx(moduniform_q(x)).margin(1e-10));
        }
        CHECK(map.at(1e-10).Q == Catch::Approx(4.0).margin(1e-7));
        CHECK(map.at(1e-10).P == Catch::Approx(-1.0).margin(1e-7));
    }
    SECTION("identical marginals") {
        CouplingMap map(decompose(uniform_mu(), uniform_mu()));
        CHECK(map.identical());
        CHECK(map.primal_price() == 0.0);
    }
}

TEST_CASE("down probability") {
    CouplingMap map(unif_pair());
    CHECK(map.at(0.5).w == Catch::Approx(0.5).margin(1e-12));
    // limit of closed forms at the left edge: p(-1) = -1 = x, so the whole
    // conditional mass rides the vanishing down-branch
    CHECK(map.at(1e-9).w == Catch::Approx(1.0).margin(1e-4));
    // w = -phi'(u) a.e.: central difference check
    for (double u : {0.2, 0.35, 0.6, 0.8}) {
        const double h = 1e-7;
        const double dphi = (map.at(u + h).phi - map.at(u - h).phi) / (2 * h);
        CHECK(map.at(u).w == Catch::Approx(-dphi).margin(1e-5));
    }
}

TEST_CASE("martingale identity and monotonicity on the grid") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 6; ++rep) {
        auto [mu, nu] = fixtures::random_dispersed_pair(rng);
        CouplingMap map(decompose(mu, nu));
        const auto& g = map.grid();
        REQUIRE(g.size() > 10);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto& r = g[i];
            if (std::isfinite(r.P) && std::isfinite(r.Q)) {
                CHECK(r.w * r.P + (1.0 - r.w) * r.Q ==
                      Catch::Approx(r.x).margin(1e-10));
            }
            CHECK(r.P <= map.pair().a + 1e-12);
            CHECK(r.Q >= map.pair().b - 1e-12);
            if (i > 0) {
                CHECK(r.P <= g[i - 1].P + 1e-9);
                CHECK(r.Q <= g[i - 1].Q + 1e-9);
                CHECK(r.phi <= g[i - 1].phi + 1e-12);
                CHECK(r.zeta <= g[i - 1].zeta + 1e-12);
            }
        }
    }
}

TEST_CASE("Lipschitz sandwich for phi") {
    CouplingMap map(decompose(moduniform_mu(), moduniform_nu()));
    const auto& g = map.grid();
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        for (std::size_t j = i + 1; j < g.size(); j += 7) {
            const double u = g[i].u, uh = g[j].u;
            CHECK(g[i].phi >= g[j].phi - 1e-12);
            CHECK(g[j].phi >= g[i].phi + (u - uh) - 1e-10);
        }
    }
}

TEST_CASE("characterisation identity on the grid") {
    auto pair = decompose(moduniform_mu(), moduniform_nu());
    CouplingMap map(pair);
    const Potential pot = Potential::normalized(pair);
    for (const auto& r : map.grid()) {
        if (!std::isfinite(r.P) || !std::isfinite(r.Q)) continue;
        const double lhs = pot.value(r.P) - r.P * r.phi + pot.value(r.Q) -
                           r.Q * r.zeta;
        const double rhs = pot.value(r.x) - r.x * (pair.gamma_a - r.u);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
    }
}

TEST_CASE("pushforward recovers nu") {
    SECTION("uniform -> U[-2,2]") {
        CouplingMap map(unif_pair());
        const Measure nu = uniform_nu();
        for (int i = 1; i <= 200; ++i) {
            const double y = nu.quantile_left(i / 201.0);
            CHECK(map.pushforward_cdf(y) ==
                  Catch::Approx(nu.cdf(y)).margin(1e-8));
        }
    }
    SECTION("moduniform") {
        CouplingMap map(decompose(moduniform_mu(), moduniform_nu()));
        const Measure nu = moduniform_nu();
        for (int i = 1; i <= 200; ++i) {
            const double y = nu.quantile_left(i / 201.0);
            CHECK(map.pushforward_cdf(y) ==
                  Catch::Approx(nu.cdf(y)).margin(1e-8));
        }
    }
    SECTION("discrete atoms") {
        CouplingMap map(decompose(discrete_mu(), discrete_nu()));
        CHECK(map.pushforward_cdf(-2.0) == Catch::Approx(1.0 / 3).margin(1e-8));
        CHECK(map.pushforward_cdf(-1.0) == Catch::Approx(2.0 / 3).margin(1e-8));
        CHECK(map.pushforward_cdf(0.0) == Catch::Approx(2.0 / 3).margin(1e-8));
        CHECK(map.pushforward_cdf(3.0) == Catch::Approx(1.0).margin(1e-8));
        CHECK(map.pushforward_cdf(2.999) == Catch::Approx(2.0 / 3).margin(1e-8));
    }
}

TEST_CASE("law is invariant under the opposite tie-break") {
    for (auto make : {+[]() { return decompose(discrete_mu(), discrete_nu()); },
                      +[]() { return decompose(moduniform_mu(), moduniform_nu()); }}) {
        CouplingMap inner(make(), TieBreak::inner, 128);
        CouplingMap outer(make(), TieBreak::outer, 128);
        const Measure& nu = inner.pair().nu;
        for (int i = 1; i <= 64; ++i) {
            const double y = nu.quantile_left(i / 65.0);
            CHECK(inner.pushforward_cdf(y) ==
                  Catch::Approx(outer.pushforward_cdf(y)).margin(1e-8));
        }
    }
}

TEST_CASE("primal price matches the frozen quadrature oracles") {
    CHECK(CouplingMap(unif_pair()).primal_price() ==
          Catch::Approx(kUniformPrice).margin(1e-8));
    CHECK(CouplingMap(decompose(moduniform_mu(), moduniform_nu())).primal_price() ==
          Catch::Approx(kModuniformPrice).margin(1e-8));
    CHECK(CouplingMap(decompose(atoms_mu(), atoms_nu())).primal_price() ==
          Catch::Approx(kAtomsPrice).margin(1e-7));
}

TEST_CASE("discrete fixture price agrees between u-integral and atom sums") {
    CouplingMap map(decompose(discrete_mu(), discrete_nu()));
    const double via_integral = map.primal_price();
    // direct sum over the three target atoms using the closed-form map
    const double xs = discrete_xstar();
    auto seg = [&](double lo, double hi, double p) {
        return adaptive_simpson(
            [&](double x) {
                return 2.0 * (x - p) * (3.0 - x) / (3.0 - p) * 0.5;
            },
            lo, hi, 1e-12);
    };
    const double direct = seg(-1.0, xs, -1.0) + seg(xs, 1.0, -2.0);
    CHECK(via_integral == Catch::Approx(direct).margin(1e-8));
    CHECK(via_integral == Catch::Approx(kDiscretePrice).margin(1e-8));
}

TEST_CASE("price dominates twice the potential peak") {
    std::mt19937_64 rng(29);
    for (int rep = 0; rep < 6; ++rep) {
        auto [mu, nu] = fixtures::random_dispersed_pair(rng);
        auto pair = decompose(mu, nu);
        CouplingMap map(pair);
        auto pot = Potential::from_pair(pair);
        double sup = 0.0;
        const auto& ks = pot.curve().knots();
        for (int i = 0; i <= 2000; ++i) {
            const double x =
                ks.front() + (ks.back() - ks.front()) * i / 2000.0;
            sup = std::max(sup, pot.value(x));
        }
        CHECK(map.primal_price() >= 2.0 * sup - 1e-9);
    }
}

TEST_CASE("sampler hits the target law (KS)") {
    CouplingMap map(unif_pair());
    auto sample = map.sample(424243, 200000);
    std::vector<double> ys;
    ys.reserve(sample.size());
    for (auto [x, y] : sample) ys.push_back(y);
    std::sort(ys.begin(), ys.end());
    const Measure nu = uniform_nu();
    double ks = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double F = nu.cdf(ys[i]);
        const double lo = static_cast<double>(i) / ys.size();
        const double hi = static_cast<double>(i + 1) / ys.size();
        ks = std::max({ks, std::abs(F - lo), std::abs(F - hi)});
    }
    CHECK(ks < 0.004);  // ~1.36/sqrt(n) at the 5% level
    // support structure: y in {x} u (-inf, a] u [b, inf)
    const double a = map.pair().a, b = map.pair().b;
    for (auto [x, y] : sample) {
        CHECK((y == x || y <= a + 1e-12 || y >= b - 1e-12));
    }
}

TEST_CASE("identical-pairs sampler returns the diagonal") {
    CouplingMap map(decompose(uniform_mu(), uniform_mu()));
    for (auto [x, y] : map.sample(7, 1000)) CHECK(x == y);
}

TEST_CASE("ODE residuals on the density fixtures") {
    SECTION("uniform") {
        auto pair = unif_pair();
        CouplingMap map(pair);
        auto res = ode_residual(pair, map, 200, 1e-5);
        REQUIRE(res.applicable);
        CHECK(res.max_residual < 1e-6);
    }
    SECTION("moduniform") {
        auto pair = decompose(moduniform_mu(), moduniform_nu());
        CouplingMap map(pair);
        auto res = ode_residual(pair, map, 200, 1e-5);
        REQUIRE(res.applicable);
        CHECK(res.max_residual < 1e-6);
    }
    SECTION("atoms present: not applicable") {
        auto pair = decompose(atoms_mu(), atoms_nu());
        CouplingMap map(pair);
        CHECK_FALSE(ode_residual(pair, map).applicable);
    }
}

TEST_CASE("degenerate single-point E") {
    Measure nu({{-1, 0.25}, {1, 0.25}}, {{-2, -1, 0.25}, {1, 2, 0.25}});
    auto pair = decompose(Measure::dirac(0.0), nu);
    CHECK(pair.a == pair.b);
    CouplingMap map(pair);
    // only one coupling exists; its cost is E|Y|
    double expect = 0.0;
    expect += 0.25 * 1 + 0.25 * 1;              // atoms at +-1
    expect += 2.0 * 0.25 * 1.5;                 // uniform lobes, mean |y| = 1.5
    CHECK(map.primal_price() == Catch::Approx(expect).margin(1e-9));
    for (int i = 1; i <= 50; ++i) {
        const double y = nu.quantile_left(i / 51.0);
        CHECK(map.pushforward_cdf(y) == Catch::Approx(nu.cdf(y)).margin(1e-8));
    }
}
