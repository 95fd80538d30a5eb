#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtbounds/measure.hpp"
#include "mtbounds/piecewise.hpp"

namespace mtbounds {

inline constexpr double kConvexTol = 1e-12;

/// Dispersion (Assumption 1) failure: mass of (nu-mu)^+ strictly inside E.
struct DispersionError : std::runtime_error {
    DispersionError(double lo_, double hi_)
        : std::runtime_error("dispersion assumption violated on [" +
                             std::to_string(lo_) + ", " + std::to_string(hi_) +
                             "]"),
          lo(lo_),
          hi(hi_) {}
    double lo;
    double hi;
};

struct ConvexOrderResult {
    bool holds = false;
    double witness = 0.0;  // +-inf encodes a mean/mass mismatch

    explicit operator bool() const { return holds; }
};

/// Exact convex-order test: equal masses and means, and
/// min over x of C_nu(x) - C_mu(x) >= -tol (per-piece enumeration).
inline ConvexOrderResult convex_order_leq(const Measure& mu,
                                          const Measure& nu,
                                          double mean_tol = kMeanTol,
                                          double convex_tol = kConvexTol) {
    const double inf = std::numeric_limits<double>::infinity();
    if (std::abs(mu.mass() - nu.mass()) > kMassTol) {
        return {false, mu.mass() > nu.mass() ? -inf : inf};
    }
    const double dmean = nu.mean() - mu.mean();
    if (std::abs(dmean) > mean_tol) {
        // D(x) -> dmean as x -> -inf; negative there iff nu has smaller mean
        return {false, dmean < 0.0 ? -inf : inf};
    }
    PiecewiseCurve d = call_curve(nu).axpy(-1.0, call_curve(mu));
    if (d.knots().empty()) return {true, 0.0};
    auto mn = d.min_on(d.knots().front(), d.knots().back());
    if (mn.value < -convex_tol) return {false, mn.x};
    return {true, 0.0};
}

/// Validated pair (mu, nu) with the common-mass decomposition:
///   kappa = (mu ^ nu)(R), eta = (mu - nu)^+, gamma = (nu - mu)^+,
///   eta_bar = eta/(1-kappa), gamma_bar = gamma/(1-kappa),
///   E = [a, b] the support hull of eta.
struct MarginalPair {
    Measure mu;
    Measure nu;
    Measure common;     // mu ^ nu (unnormalized, mass kappa)
    Measure eta_bar;    // probability measure on [a, b] (kappa < 1)
    Measure gamma_bar;  // probability measure on R \ (a, b)
    double kappa = 0.0;
    double a = 0.0;  // E_lo
    double b = 0.0;  // E_hi
    double gamma_a = 0.0;  // gamma_bar((-inf, a])
    bool identical = false;

    bool degenerate_point() const { return !identical && a == b; }
};

namespace detail {

struct MeasureBuilder {
    std::vector<Atom> atoms;
    std::vector<UniformPiece> uniforms;
    std::vector<InvCubePiece> invcubes;

    void add_atom(double x, double w) {
        if (w > 0.0) atoms.push_back({x, w});
    }
    // density rho + cc*|y|^-3 on [lo, hi]
    void add_segment(double lo, double hi, double rho, double cc) {
        if (rho < 0.0 || cc < 0.0) {
            throw std::runtime_error(
                "decompose: mixed-sign density difference on a segment is not "
                "representable in the atoms+uniform+invcube class");
        }
        if (rho > 0.0 && hi > lo && std::isfinite(lo) && std::isfinite(hi)) {
            uniforms.push_back({lo, hi, rho * (hi - lo)});
        }
        if (cc > 0.0 && hi > lo) {
            InvCubePiece p{lo, hi, 0.0};
            p.w = cc * p.raw_mass();
            invcubes.push_back(p);
        }
    }
    Measure build() const { return Measure(atoms, uniforms, invcubes); }
};

// uniform-density and invcube-coefficient of a measure on a point/segment
inline void local_density(const Measure& m, double lo, double hi, double& rho,
                          double& cc) {
    rho = 0.0;
    cc = 0.0;
    for (const auto& p : m.uniform_pieces()) {
        if (p.lo <= lo && p.hi >= hi) rho += p.density();
    }
    for (const auto& p : m.invcube_pieces()) {
        if (p.lo <= lo && p.hi >= hi) cc += p.coeff();
    }
}

}  // namespace detail

/// Common-mass decomposition of a convex-ordered pair. Throws
/// DispersionError when Assumption 1 fails; std::invalid_argument when the
/// pair is not in convex order.
inline MarginalPair decompose(const Measure& mu, const Measure& nu) {
    if (!mu.is_probability() || !nu.is_probability()) {
        throw std::invalid_argument("decompose: inputs must be probability measures");
    }
    if (auto co = convex_order_leq(mu, nu); !co.holds) {
        throw std::invalid_argument("decompose: convex order violated at x = " +
                                    std::to_string(co.witness));
    }

    const double inf = std::numeric_limits<double>::infinity();
    // refined partition: all finite breakpoints of both measures, plus
    // density-crossing points inside each refined segment
    std::vector<double> bp;
    for (double x : mu.breakpoints()) bp.push_back(x);
    for (double x : nu.breakpoints()) bp.push_back(x);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

    detail::MeasureBuilder eta, gamma, common;

    // atoms: pointwise min / positive parts
    {
        std::map<double, double> wmu, wnu;
        for (const auto& a : mu.atoms()) wmu[a.x] += a.w;
        for (const auto& a : nu.atoms()) wnu[a.x] += a.w;
        for (const auto& [x, w] : wmu) {
            const double v = wnu.count(x) ? wnu.at(x) : 0.0;
            common.add_atom(x, std::min(w, v));
            eta.add_atom(x, std::max(w - v, 0.0));
        }
        for (const auto& [x, w] : wnu) {
            const double v = wmu.count(x) ? wmu.at(x) : 0.0;
            gamma.add_atom(x, std::max(w - v, 0.0));
        }
    }

    // absolutely continuous parts segment by segment
    auto handle_segment = [&](double lo, double hi) {
        double rmu, cmu, rnu, cnu;
        detail::local_density(mu, lo, hi, rmu, cmu);
        detail::local_density(nu, lo, hi, rnu, cnu);
        const double dr = rmu - rnu;
        const double dc = cmu - cnu;
        // split where dr + dc*|y|^-3 changes sign inside the segment
        std::vector<double> cuts{lo, hi};
        if (dr != 0.0 && dc != 0.0) {
            const double y3 = -dc / dr;
            if (y3 > 0.0) {
                const double y = std::cbrt(y3);
                for (double cand : {y, -y}) {
                    if (cand > lo && cand < hi) cuts.push_back(cand);
                }
            }
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double l = cuts[k], h = cuts[k + 1];
            if (!(l < h)) continue;
            const double mid = std::isinf(l)   ? h - 1.0
                               : std::isinf(h) ? l + 1.0
                                               : 0.5 * (l + h);
            const double icub = (mid != 0.0) ? 1.0 / std::abs(mid * mid * mid) : 0.0;
            const double diff = dr + dc * icub;  // sign constant on (l, h)
            if (diff > 0.0) {
                eta.add_segment(l, h, dr > 0.0 ? dr : 0.0, dc > 0.0 ? dc : 0.0);
                if (dr < 0.0 || dc < 0.0) {
                    // net positive but mixed component signs: unsupported
                    throw std::runtime_error(
                        "decompose: mixed uniform/invcube density difference");
                }
                common.add_segment(l, h, rnu, cnu);
            } else if (diff < 0.0) {
                gamma.add_segment(l, h, -dr > 0.0 ? -dr : 0.0,
                                  -dc > 0.0 ? -dc : 0.0);
                if (-dr < 0.0 || -dc < 0.0) {
                    throw std::runtime_error(
                        "decompose: mixed uniform/invcube density difference");
                }
                common.add_segment(l, h, rmu, cmu);
            } else {
                common.add_segment(l, h, rmu, cmu);
            }
        }
    };

    if (!bp.empty()) {
        if (std::isinf(mu.support_lo()) || std::isinf(nu.support_lo())) {
            handle_segment(-inf, bp.front());
        }
        for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
            handle_segment(bp[i], bp[i + 1]);
        }
        if (std::isinf(mu.support_hi()) || std::isinf(nu.support_hi())) {
            handle_segment(bp.back(), inf);
        }
    }

    MarginalPair out;
    out.mu = mu;
    out.nu = nu;
    out.common = common.build();
    out.kappa = out.common.mass();

    if (out.kappa >= 1.0 - kMassTol) {
        out.identical = true;
        out.kappa = 1.0;
        out.eta_bar = Measure();
        out.gamma_bar = Measure();
        out.a = out.b = 0.0;
        out.gamma_a = 0.0;
        return out;
    }

    const double scale = 1.0 / (1.0 - out.kappa);
    out.eta_bar = eta.build().scaled(scale);
    out.gamma_bar = gamma.build().scaled(scale);

    // E = support hull of eta; must be bounded
    out.a = out.eta_bar.support_lo();
    out.b = out.eta_bar.support_hi();
    if (std::isinf(out.a) || std::isinf(out.b)) {
        throw DispersionError(out.a, out.b);
    }

    // gamma must put no mass strictly inside (a, b)
    for (const auto& at : out.gamma_bar.atoms()) {
        if (at.x > out.a && at.x < out.b) throw DispersionError(at.x, at.x);
    }
    auto check_piece = [&](double lo, double hi) {
        const double l = std::max(lo, out.a);
        const double h = std::min(hi, out.b);
        if (l < h) throw DispersionError(l, h);
    };
    for (const auto& p : out.gamma_bar.uniform_pieces()) check_piece(p.lo, p.hi);
    for (const auto& p : out.gamma_bar.invcube_pieces()) check_piece(p.lo, p.hi);

    out.gamma_a = out.gamma_bar.cdf(out.a);
    return out;
}

}  // namespace mtbounds
