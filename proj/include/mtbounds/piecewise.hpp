#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mtbounds/measure.hpp"
#include "mtbounds/quadrature.hpp"

namespace mtbounds {

/// One analytic piece f(x) = a x^2 + b x + c + d / x.
/// Pieces with d != 0 never contain zero in their interior.
struct CurvePiece {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    double eval(double x) const {
        double v = (a * x + b) * x + c;
        if (d != 0.0) v += d / x;
        return v;
    }
    double deriv(double x) const {
        double v = 2.0 * a * x + b;
        if (d != 0.0) v -= d / (x * x);
        return v;
    }
    double second_deriv(double x) const {
        double v = 2.0 * a;
        if (d != 0.0) v += 2.0 * d / (x * x * x);
        return v;
    }
    bool is_zero() const { return a == 0.0 && b == 0.0 && c == 0.0 && d == 0.0; }
};

/// Piecewise-analytic curve on all of R. With n finite knots there are n+1
/// pieces; piece 0 lives on (-inf, knot 0] and piece n on [knot n-1, +inf).
/// Continuity across knots is the builder's responsibility (holds for call
/// curves and their differences).
class PiecewiseCurve {
  public:
    PiecewiseCurve() : knots_(), pieces_(1) {}
    PiecewiseCurve(std::vector<double> knots, std::vector<CurvePiece> pieces)
        : knots_(std::move(knots)), pieces_(std::move(pieces)) {
        if (pieces_.size() != knots_.size() + 1) {
            throw std::invalid_argument("PiecewiseCurve: size mismatch");
        }
        if (!std::is_sorted(knots_.begin(), knots_.end())) {
            throw std::invalid_argument("PiecewiseCurve: knots not sorted");
        }
    }

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<CurvePiece>& pieces() const { return pieces_; }

    /// Index of the piece whose closed interval contains x; points exactly at
    /// a knot resolve to the piece on the right (irrelevant for values since
    /// the curve is continuous).
    std::size_t piece_index(double x) const {
        return static_cast<std::size_t>(
            std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin());
    }
    std::size_t piece_index_left(double x) const {
        return static_cast<std::size_t>(
            std::lower_bound(knots_.begin(), knots_.end(), x) - knots_.begin());
    }

    double piece_lo(std::size_t i) const {
        return i == 0 ? -std::numeric_limits<double>::infinity() : knots_[i - 1];
    }
    double piece_hi(std::size_t i) const {
        return i == knots_.size() ? std::numeric_limits<double>::infinity()
                                  : knots_[i];
    }

    double eval(double x) const { return pieces_[piece_index(x)].eval(x); }
    double deriv_right(double x) const { return pieces_[piece_index(x)].deriv(x); }
    double deriv_left(double x) const {
        return pieces_[piece_index_left(x)].deriv(x);
    }

    /// Sum with another curve scaled: this + s * other (exact; knots merged).
    PiecewiseCurve axpy(double s, const PiecewiseCurve& other) const {
        std::vector<double> ks;
        ks.reserve(knots_.size() + other.knots_.size());
        std::merge(knots_.begin(), knots_.end(), other.knots_.begin(),
                   other.knots_.end(), std::back_inserter(ks));
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        std::vector<CurvePiece> ps(ks.size() + 1);
        for (std::size_t i = 0; i <= ks.size(); ++i) {
            // probe a point inside piece i
            double probe;
            if (ks.empty()) {
                probe = 0.0;
            } else if (i == 0) {
                probe = ks.front() - 1.0;
            } else if (i == ks.size()) {
                probe = ks.back() + 1.0;
            } else {
                probe = 0.5 * (ks[i - 1] + ks[i]);
            }
            const CurvePiece& l = pieces_[piece_index(probe)];
            const CurvePiece& r = other.pieces_[other.piece_index(probe)];
            ps[i] = CurvePiece{l.a + s * r.a, l.b + s * r.b, l.c + s * r.c,
                               l.d + s * r.d};
        }
        return PiecewiseCurve(std::move(ks), std::move(ps));
    }

    PiecewiseCurve scaled(double s) const {
        std::vector<CurvePiece> ps = pieces_;
        for (auto& p : ps) {
            p.a *= s;
            p.b *= s;
            p.c *= s;
            p.d *= s;
        }
        return PiecewiseCurve(knots_, std::move(ps));
    }

    /// Global minimum over [lo, hi] by per-piece candidate enumeration
    /// (endpoints plus interior stationary points).
    struct MinResult {
        double value;
        double x;
    };
    MinResult min_on(double lo, double hi) const {
        MinResult best{std::numeric_limits<double>::infinity(), lo};
        auto consider = [&](double x) {
            if (!(x >= lo && x <= hi) || !std::isfinite(x)) return;
            const double v = eval(x);
            if (v < best.value) best = {v, x};
        };
        consider(lo);
        consider(hi);
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const double plo = std::max(piece_lo(i), lo);
            const double phi = std::min(piece_hi(i), hi);
            if (!(plo < phi)) continue;
            if (std::isfinite(plo)) consider(plo);
            if (std::isfinite(phi)) consider(phi);
            // stationary points: 2a x^3 + b x^2 - d = 0 (times x^2)
            const CurvePiece& p = pieces_[i];
            if (p.a == 0.0 && p.d == 0.0) continue;
            for (double r : solve_cubic_real(2.0 * p.a, p.b, 0.0, -p.d)) {
                if (std::isfinite(plo) ? (r > plo) : true) {
                    if (std::isfinite(phi) ? (r < phi) : true) consider(r);
                }
            }
        }
        return best;
    }

  private:
    std::vector<double> knots_;
    std::vector<CurvePiece> pieces_;
};

/// Exact call-price curve C(x) = int (y-x)^+ dm of a measure in the
/// atoms + uniform + invcube class: piecewise (quadratic + d/x), convex,
/// nonincreasing, zero above the support.
///
/// The knots refine every piece endpoint, so on a curve segment each
/// measure piece is either absent or covers the segment entirely.
inline PiecewiseCurve call_curve(const Measure& m) {
    std::vector<double> ks = m.breakpoints();
    const std::size_t n = ks.size();
    std::vector<CurvePiece> ps(n + 1);

    for (std::size_t i = 0; i <= n; ++i) {
        // R = +inf on the trailing segment (nonzero only with a +inf tail)
        const double R = (i == n) ? std::numeric_limits<double>::infinity()
                                  : ks[i];
        const double L = (i == 0) ? -std::numeric_limits<double>::infinity()
                                  : ks[i - 1];
        CurvePiece cp;
        // mass and first moment in [R, inf)
        double m0 = 0.0, m1 = 0.0;
        for (const auto& a : m.atoms()) {
            if (a.x >= R) {
                m0 += a.w;
                m1 += a.w * a.x;
            }
        }
        for (const auto& p : m.uniform_pieces()) {
            if (p.lo >= R) {
                m0 += p.w;
                m1 += p.w * p.mean();
            }
        }
        for (const auto& p : m.invcube_pieces()) {
            if (p.lo >= R) {
                m0 += p.w;
                m1 += p.w * p.mean();
            }
        }
        // C(x) = m1 - x*m0 + int_x^R (y - x) f_seg(y) dy
        cp.b -= m0;
        cp.c += m1;
        for (const auto& p : m.uniform_pieces()) {
            if (p.lo <= L && p.hi >= R) {
                const double rho = p.density();
                cp.a += 0.5 * rho;
                cp.b -= rho * R;
                cp.c += 0.5 * rho * R * R;
            }
        }
        for (const auto& p : m.invcube_pieces()) {
            if (p.lo <= L && p.hi >= R) {
                // int_x^R (y-x) c|y|^-3 dy
                //   = c*sgn*[(-1/R + x/(2R^2)) - (-1/(2x))]
                const double c = p.coeff();
                const double sgn = p.sign();
                cp.c += -c * sgn * InvCubePiece::inv1(R);
                cp.b += c * sgn * InvCubePiece::inv2(R);
                cp.d += c * sgn * 0.5;
            }
        }
        ps[i] = cp;
    }
    return PiecewiseCurve(std::move(ks), std::move(ps));
}

}  // namespace mtbounds
