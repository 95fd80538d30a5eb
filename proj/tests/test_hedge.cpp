#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "fixtures.hpp"
#include "mtbounds/bounds.hpp"
#include "mtbounds/dual_hedge.hpp"

using namespace mtbounds;
using namespace fixtures;

namespace {

struct Rig {
    MarginalPair pair;
    std::unique_ptr<CouplingMap> map;
    std::unique_ptr<HedgePair> hedge;

    Rig(Measure mu, Measure nu) : pair(decompose(mu, nu)) {
        map = std::make_unique<CouplingMap>(pair);
        hedge = std::make_unique<HedgePair>(*map);
    }
};

}  // namespace

TEST_CASE("theta and alpha closed forms on the uniform fixture") {
    Rig rig(uniform_mu(), uniform_nu());
    const auto& h = *rig.hedge;
    CHECK(h.x0() == Catch::Approx(0.0));
    for (int i = 0; i <= 40; ++i) {
        const double x = -1.0 + 2.0 * i / 40.0;
        const double texp = 2.0 / std::sqrt(3.0) * std::asin(x / 2.0);
        const double aexp = 2.0 * x / std::sqrt(3.0) * std::asin(x / 2.0) +
                            (2.0 - std::sqrt(4.0 - x * x)) / std::sqrt(3.0);
        CHECK(h.theta(x) == Catch::Approx(texp).margin(1e-10));
        CHECK(h.alpha(x) == Catch::Approx(aexp).margin(1e-10));
    }
    CHECK(h.theta(h.x0()) == 0.0);
    CHECK(h.alpha(h.x0()) == 0.0);
    CHECK_THROWS_AS(h.theta(1.5), std::domain_error);
}

TEST_CASE("theta is nondecreasing with the uniform-span rate bound") {
    Rig rig(moduniform_mu(), moduniform_nu());
    const auto& h = *rig.hedge;
    const double qmax = rig.map->at(1e-9).Q;
    const double pmin = rig.map->at(1.0 - 1e-9).P;
    double prev = h.theta(-1.0);
    for (int i = 1; i <= 50; ++i) {
        const double x = -1.0 + 2.0 * i / 50.0;
        const double cur = h.theta(x);
        const double dx = 2.0 / 50.0;
        CHECK(cur - prev >= 2.0 * dx / (qmax - pmin) - 1e-12);
        prev = cur;
    }
}

TEST_CASE("psi extension and normalization") {
    Rig rig(uniform_mu(), uniform_nu());
    const auto& h = *rig.hedge;
    CHECK(h.psi(h.x0()) == 0.0);
    // independent symbolic evaluation at y = 2 via q^{-1}(2) = -1
    const double t1 = 2.0 / std::sqrt(3.0) * std::asin(-0.5);
    const double a1 = -2.0 / std::sqrt(3.0) * std::asin(-0.5) +
                      (2.0 - std::sqrt(3.0)) / std::sqrt(3.0);
    CHECK(h.psi(2.0) == Catch::Approx(a1 + (-3.0) * (-1.0 - t1)).margin(1e-9));
    // psi = alpha and delta = theta on [a, b]
    for (double x : {-0.9, -0.3, 0.4, 0.8}) {
        CHECK(h.psi(x) == Catch::Approx(h.alpha(x)).margin(1e-12));
        CHECK(h.delta(x) == Catch::Approx(h.theta(x)).margin(1e-12));
    }
    // continuity at the edges of E
    CHECK(h.psi(-1.0 - 1e-9) == Catch::Approx(h.psi(-1.0)).margin(1e-6));
    CHECK(h.psi(1.0 + 1e-9) == Catch::Approx(h.psi(1.0)).margin(1e-6));
}

TEST_CASE("psi is invariant across inverse choices on plateaus") {
    Rig rig(discrete_mu(), discrete_nu());
    const auto& h = *rig.hedge;
    // q == 3 on all of E: every x in E is a valid preimage of y = 3;
    // the lemma makes psi(3) independent of that choice
    const double x1 = h.q_inv_left(3.0);
    const double psi3 = h.alpha(x1) + (x1 - 3.0) * (-1.0 - h.theta(x1));
    for (double xc : {-0.8, -0.2, 0.3, 0.9}) {
        const double alt = h.alpha(xc) + (xc - 3.0) * (-1.0 - h.theta(xc));
        CHECK(alt == Catch::Approx(psi3).margin(1e-10));
    }
}

TEST_CASE("Lagrangian vanishes on the support and is nonnegative") {
    Rig rig(uniform_mu(), uniform_nu());
    const auto& h = *rig.hedge;
    CHECK(h.lagrangian(0.4, 0.4) == 0.0);
    CHECK(h.lagrangian(0.0, std::sqrt(3.0)) == Catch::Approx(0.0).margin(1e-10));
    CHECK(h.lagrangian(0.0, -std::sqrt(3.0)) == Catch::Approx(0.0).margin(1e-10));
    CHECK(h.lagrangian(0.0, 1.0) > 1e-3);  // off-support point is slack
    auto rep = h.verify_subhedge(400, 400, -4.0, 4.0);
    CHECK(rep.min_L >= -1e-9);
    CHECK(rep.max_abs_support <= 1e-9);
}

TEST_CASE("Lagrangian vanishes across the discrete fixture jump gap") {
    Rig rig(discrete_mu(), discrete_nu());
    const auto& h = *rig.hedge;
    const double xs = discrete_xstar();
    for (double y : {-1.9, -1.6, -1.3, -1.05}) {
        CHECK(h.lagrangian(xs, y) == Catch::Approx(0.0).margin(1e-9));
    }
    auto gaps = h.jump_gaps();
    bool found = false;
    for (const auto& g : gaps) {
        if (std::abs(g.x - xs) < 1e-6 && g.y_lo < -1.9 && g.y_hi > -1.1) {
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("rays grow with slope 1 -+ delta >= 0") {
    Rig rig(moduniform_mu(), moduniform_nu());
    const auto& h = *rig.hedge;
    for (double x : {-0.7, 0.0, 0.8}) {
        const double d = h.delta(x);
        CHECK(std::abs(d) <= 1.0 + 1e-9);
        const double up =
            (h.lagrangian(x, 60.0) - h.lagrangian(x, 50.0)) / 10.0;
        const double dn =
            (h.lagrangian(x, -60.0) - h.lagrangian(x, -50.0)) / 10.0;
        CHECK(up == Catch::Approx(1.0 + d).margin(1e-8));
        CHECK(dn == Catch::Approx(1.0 - d).margin(1e-8));
        CHECK(up >= -1e-9);
        CHECK(dn >= -1e-9);
    }
}

TEST_CASE("strong duality on the closed-form fixtures") {
    {
        Rig rig(uniform_mu(), uniform_nu());
        const double dv = rig.hedge->dual_value();
        CHECK(dv == Catch::Approx(kUniformPrice).margin(1e-6));
        CHECK(rig.map->primal_price() - dv == Catch::Approx(0.0).margin(1e-6));
    }
    {
        Rig rig(moduniform_mu(), moduniform_nu());
        CHECK(rig.map->primal_price() - rig.hedge->dual_value() ==
              Catch::Approx(0.0).margin(1e-6));
    }
    {
        Rig rig(discrete_mu(), discrete_nu());
        CHECK(rig.map->primal_price() - rig.hedge->dual_value() ==
              Catch::Approx(0.0).margin(1e-6));
    }
    {
        Rig rig(atoms_mu(), atoms_nu());
        CHECK(rig.map->primal_price() - rig.hedge->dual_value() ==
              Catch::Approx(0.0).margin(1e-6));
    }
}

TEST_CASE("identical marginals have zero dual value") {
    auto pair = decompose(uniform_mu(), uniform_mu());
    CouplingMap map(pair);
    HedgePair h(map);
    CHECK(h.dual_value() == 0.0);
}

TEST_CASE("dual value is invariant under (psi + ax + b, delta - a)") {
    Rig rig(uniform_mu(), uniform_nu());
    const auto& h = *rig.hedge;
    const Measure mu = uniform_mu();
    const Measure nu = uniform_nu();
    // the tilt changes the dual by a*(mean nu - mean mu) + b*(mass diff)
    for (double aa : {1.0, -1.0, 0.5, -0.5}) {
        for (double bb : {1.0, -0.5}) {
            const double shift =
                aa * (nu.mean() - mu.mean()) + bb * (nu.mass() - mu.mass());
            CHECK(std::abs(shift) < 1e-9);
        }
    }
    // spot-check the identity against a quantile average of the tilted psi
    const double aa = 1.0, bb = 1.0;
    auto tilted = [&](const Measure& m) {
        double acc = 0.0;
        const int n = 2000;
        for (int i = 0; i < n; ++i) {
            const double u = (i + 0.5) / n;
            const double y = m.quantile_left(u);
            acc += h.psi(y) + aa * y + bb;
        }
        return acc / n;
    };
    CHECK(tilted(nu) - tilted(mu) ==
          Catch::Approx(h.dual_value()).margin(5e-4));
}

TEST_CASE("bound report assembles the certificates") {
    auto pair = decompose(uniform_mu(), uniform_nu());
    CouplingMap map(pair);
    auto rep = lower_bound_report(map, 128);
    CHECK(rep.kappa == Catch::Approx(0.5).margin(1e-12));
    CHECK(rep.primal_price == Catch::Approx(kUniformPrice).margin(1e-8));
    CHECK(std::abs(rep.gap) <= 1e-6);
    CHECK(rep.min_lagrangian >= -1e-9);
    CHECK(rep.marginal_error <= 1e-8);
}
