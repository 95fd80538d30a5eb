#pragma once

// Shared test fixtures: the four closed-form lower-bound pairs, the upper
// pair, and a randomized generator of pairs satisfying the dispersion
// assumption.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mtbounds/measure.hpp"
#include "mtbounds/pair.hpp"

namespace fixtures {

using mtbounds::Atom;
using mtbounds::InvCubePiece;
using mtbounds::Measure;
using mtbounds::UniformPiece;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// mu = U[-1,1], nu = U[-2,2]; kappa = 1/2
inline Measure uniform_mu() { return Measure::uniform(-1, 1); }
inline Measure uniform_nu() { return Measure::uniform(-2, 2); }
inline double uniform_p(double x) { return (-x - std::sqrt(12 - 3 * x * x)) / 2; }
inline double uniform_q(double x) { return (-x + std::sqrt(12 - 3 * x * x)) / 2; }
// (1/2) int_{-1}^{1} sqrt(3)(1-x^2)/sqrt(4-x^2) dx, frozen from a
// high-precision quadrature of the closed-form conditional cost
inline constexpr double kUniformPrice = 0.59310031788289107;

// mu = U[-1,1], nu = 5/8 U[-2,-1] + 3/8 U[1,4]; kappa = 0
inline Measure moduniform_mu() { return Measure::uniform(-1, 1); }
inline Measure moduniform_nu() {
    return Measure({}, {{-2, -1, 0.625}, {1, 4, 0.375}});
}
inline double moduniform_p(double x) {
    return -(5 + 4 * x + std::sqrt(25 - 8 * x - 8 * x * x)) / 6;
}
inline double moduniform_q(double x) {
    return -(5 + 4 * x - 5 * std::sqrt(25 - 8 * x - 8 * x * x)) / 6;
}
inline constexpr double kModuniformPrice = 1.5884722246400111;

// mu = 1/2 delta_{-1/2} + 1/2 U[0,1], nu(dx) = |x|^{-3} dx on |x| > 1
inline Measure atoms_mu() { return Measure({{-0.5, 0.5}}, {{0, 1, 0.5}}); }
inline Measure atoms_nu() {
    return Measure({}, {}, {{1.0, kInf, 0.5}, {-kInf, -1.0, 0.5}});
}
inline double atoms_P(double u) {
    if (u <= 0.5) return -(2 - u) / (2 - 3 * u + u * u / 4);
    // denominator factored as (1-u)^2 (u^2+2) to stay accurate near u = 1
    return -2 * (1 - u + u * u) / ((1 - u) * (1 - u) * (u * u + 2));
}
inline double atoms_Q(double u) {
    if (u <= 0.5) return (2 - u) / (u + u * u / 4);
    return 2 * (1 - u + u * u) / (u * u * (u * u - 2 * u + 3));
}
inline constexpr double kAtomsPrice = 1.5999122880780726;

// mu = U(-1,1), nu uniform on {-2, -1, 3}
inline Measure discrete_mu() { return Measure::uniform(-1, 1); }
inline Measure discrete_nu() {
    return Measure({{-2, 1.0 / 3}, {-1, 1.0 / 3}, {3, 1.0 / 3}}, {});
}
inline double discrete_xstar() { return 3.0 - 4.0 * std::sqrt(2.0 / 3.0); }
inline constexpr double kDiscretePrice = 1.7806197908819385;

// upper fixture: mu = U[-1,1], nu = 1/2 U[-3,-1] + 1/2 U[1,3]
inline Measure upper_mu() { return Measure::uniform(-1, 1); }
inline Measure upper_nu() { return Measure({}, {{-3, -1, 0.5}, {1, 3, 0.5}}); }

/// Random atoms+pieces pair (mu, nu) built to satisfy equal means, convex
/// order and the dispersion assumption by construction: eta_bar inside
/// [a, b], gamma_bar outside with its mean matched, optional common part.
struct RandomPair {
    Measure mu;
    Measure nu;
};

inline Measure normalized(std::vector<Atom> atoms,
                          std::vector<UniformPiece> pieces) {
    Measure raw(std::move(atoms), std::move(pieces));
    return raw.scaled(1.0 / raw.mass());
}

inline RandomPair random_dispersed_pair(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double a = -2.5 + 2.0 * unif(rng);
    const double b = a + 0.6 + 2.0 * unif(rng);

    // eta_bar: pieces spanning [a, b] so the support hull is exactly E
    std::vector<Atom> ea;
    std::vector<UniformPiece> ep;
    const int n_pieces = 1 + static_cast<int>(unif(rng) * 2.0);
    ep.push_back({a, a + 0.25 * (b - a), 0.4 + unif(rng)});
    ep.push_back({b - 0.25 * (b - a), b, 0.4 + unif(rng)});
    for (int k = 2; k < n_pieces; ++k) {
        const double l = a + (b - a) * 0.3 * unif(rng);
        const double h = l + (b - l) * 0.5 * unif(rng);
        ep.push_back({l, h, 0.3 + unif(rng)});
    }
    if (unif(rng) < 0.5) {
        ea.push_back({a + (b - a) * unif(rng), 0.2 + 0.5 * unif(rng)});
    }
    Measure eta = normalized(ea, ep);
    const double mean_eta = eta.mean();

    // gamma_bar: one lump on each side of E, weights solving the mean match
    const double left_w = 0.5 + 1.5 * unif(rng);
    const double right_w = 0.5 + 1.5 * unif(rng);
    Measure left = unif(rng) < 0.3
                       ? Measure::dirac(a - 0.2 - left_w, 1.0)
                       : Measure::uniform(a - 0.4 - left_w, a, 1.0);
    Measure right = unif(rng) < 0.3
                        ? Measure::dirac(b + 0.2 + right_w, 1.0)
                        : Measure::uniform(b, b + 0.4 + right_w, 1.0);
    const double ml = left.mean();
    const double mr = right.mean();
    const double wl = (mr - mean_eta) / (mr - ml);  // in (0,1) by ml<a<=mean<=b<mr
    std::vector<Atom> ga;
    std::vector<UniformPiece> gp;
    for (const auto& at : left.atoms()) ga.push_back({at.x, at.w * wl});
    for (const auto& p : left.uniform_pieces()) gp.push_back({p.lo, p.hi, p.w * wl});
    for (const auto& at : right.atoms()) ga.push_back({at.x, at.w * (1 - wl)});
    for (const auto& p : right.uniform_pieces()) {
        gp.push_back({p.lo, p.hi, p.w * (1 - wl)});
    }
    Measure gamma(std::move(ga), std::move(gp));

    // optional common part anywhere
    double kappa = unif(rng) < 0.5 ? 0.2 + 0.5 * unif(rng) : 0.0;
    if (kappa == 0.0) {
        return {eta, gamma};
    }
    Measure common =
        Measure::uniform(a - 1.0, b + 1.0, 1.0).scaled(kappa);
    auto mix = [&](const Measure& part) {
        std::vector<Atom> as = common.atoms();
        std::vector<UniformPiece> ps = common.uniform_pieces();
        for (const auto& at : part.atoms()) as.push_back({at.x, at.w * (1 - kappa)});
        for (const auto& p : part.uniform_pieces()) {
            ps.push_back({p.lo, p.hi, p.w * (1 - kappa)});
        }
        return Measure(std::move(as), std::move(ps));
    };
    return {mix(eta), mix(gamma)};
}

}  // namespace fixtures
