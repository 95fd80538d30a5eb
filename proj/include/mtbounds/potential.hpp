#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mtbounds/pair.hpp"
#include "mtbounds/piecewise.hpp"

namespace mtbounds {

enum class Side { left, right };
enum class ConjugateRegion { below_a, above_b, inside };

struct ShapeResult {
    bool ok = true;
    double violation_x = 0.0;

    explicit operator bool() const { return ok; }
};

struct ConjugateResult {
    double value = 0.0;
    double x = 0.0;  // optimizer
};

/// Potential D = C_nu - C_mu of a convex-ordered pair: nonnegative,
/// vanishing at +-inf, concave on E = [a, b] and convex outside under the
/// dispersion assumption.
class Potential {
  public:
    Potential() = default;

    /// Potential of the pair (mu, nu) itself.
    static Potential from_pair(const MarginalPair& pair) {
        Potential p;
        p.curve_ = call_curve(pair.nu).axpy(-1.0, call_curve(pair.mu));
        p.a_ = pair.a;
        p.b_ = pair.b;
        return p;
    }

    /// Potential of the normalized residual pair (eta_bar, gamma_bar);
    /// equals the pair potential scaled by 1/(1-kappa).
    static Potential normalized(const MarginalPair& pair) {
        if (pair.identical) {
            throw std::invalid_argument("Potential: identical marginals");
        }
        Potential p = from_pair(pair);
        p.curve_ = p.curve_.scaled(1.0 / (1.0 - pair.kappa));
        return p;
    }

    static Potential from_measures(const Measure& mu, const Measure& nu,
                                   double a, double b) {
        Potential p;
        p.curve_ = call_curve(nu).axpy(-1.0, call_curve(mu));
        p.a_ = a;
        p.b_ = b;
        return p;
    }

    const PiecewiseCurve& curve() const { return curve_; }
    double a() const { return a_; }
    double b() const { return b_; }

    double value(double x) const { return curve_.eval(x); }
    double deriv(double x, Side side) const {
        return side == Side::left ? curve_.deriv_left(x)
                                  : curve_.deriv_right(x);
    }

    /// Verifies D >= 0, concavity on (a, b) and convexity outside [a, b],
    /// including the sign of kinks at atoms.
    ShapeResult shape_check(double tol = 1e-10) const {
        const auto& ks = curve_.knots();
        if (ks.empty()) return {true, 0.0};
        // nonnegativity
        auto mn = curve_.min_on(ks.front(), ks.back());
        if (mn.value < -tol) return {false, mn.x};
        // curvature sign per piece (f'' is monotone within a piece, so the
        // endpoint values bound it)
        for (std::size_t i = 0; i < curve_.pieces().size(); ++i) {
            const double lo = curve_.piece_lo(i);
            const double hi = curve_.piece_hi(i);
            const auto& p = curve_.pieces()[i];
            auto probe = [&](double x) { return p.second_deriv(x); };
            const double xl = std::isinf(lo) ? hi - 1.0 : lo;
            const double xr = std::isinf(hi) ? lo + 1.0 : hi;
            const double inside_lo = std::max(lo, a_);
            const double inside_hi = std::min(hi, b_);
            if (inside_lo < inside_hi) {
                // piece intersects the interior of E: concave required
                if (probe(std::max(xl, inside_lo)) > tol ||
                    probe(std::min(xr, inside_hi)) > tol) {
                    return {false, 0.5 * (inside_lo + inside_hi)};
                }
            }
            const bool outside =
                hi <= a_ || lo >= b_ || (std::isinf(lo) && hi <= a_);
            if (outside) {
                if (probe(xl) < -tol || probe(xr) < -tol) {
                    return {false, 0.5 * (std::max(xl, lo) + std::min(xr, hi))};
                }
            }
        }
        // kink signs: jump of D' is nu({x}) - mu({x})
        for (double x : ks) {
            const double jump = curve_.deriv_right(x) - curve_.deriv_left(x);
            if (x > a_ && x < b_ && jump > tol) return {false, x};
            if ((x < a_ || x > b_) && jump < -tol) return {false, x};
        }
        return {true, 0.0};
    }

    /// Conjugate transforms used by the tangent construction:
    ///   below_a: inf_{x <= a} (D(x) - theta x)   (theta in [0, inf))
    ///   above_b: inf_{x >= b} (D(x) - theta x)   (theta in (-inf, 0])
    ///   inside:  sup_{a <= x <= b} (D(x) - theta x)
    /// Optimizers are exact (slope matching per piece); on flat stretches
    /// below_a reports the largest optimizer, above_b the smallest.
    ConjugateResult conjugate(ConjugateRegion region, double theta) const {
        switch (region) {
            case ConjugateRegion::below_a: {
                if (theta < 0.0) {
                    throw std::domain_error(
                        "conjugate below_a: theta < 0 is not attained");
                }
                const double x = argmin_left(theta, a_);
                return {value(x) - theta * x, x};
            }
            case ConjugateRegion::above_b: {
                if (theta > 0.0) {
                    throw std::domain_error(
                        "conjugate above_b: theta > 0 is not attained");
                }
                const double x = argmin_right(theta, b_);
                return {value(x) - theta * x, x};
            }
            case ConjugateRegion::inside: {
                const double x = argmax_inside(theta);
                return {value(x) - theta * x, x};
            }
        }
        throw std::logic_error("conjugate: bad region");
    }

    /// Envelope solution: either pinned at a kink/cap or tangent in the
    /// interior of a specific piece.
    struct EnvPoint {
        double x = 0.0;
        bool pinned = true;
        CurvePiece piece;  // valid when !pinned
    };

    /// Largest minimizer of D(x) - m x over (-inf, cap]; requires
    /// convexity left of cap. Characterization: largest x with D'(x-) <= m.
    EnvPoint argmin_left_env(double m, double cap) const {
        if (curve_.deriv_left(cap) <= m) return {cap, true, {}};
        const std::size_t idx = curve_.piece_index_left(cap);
        for (std::size_t i = idx + 1; i-- > 0;) {
            const double lo = curve_.piece_lo(i);
            const double hi = std::min(curve_.piece_hi(i), cap);
            if (!(lo < hi)) continue;
            const auto& p = curve_.pieces()[i];
            const double slo =
                std::isinf(lo) ? tail_slope(p, true) : p.deriv(lo);
            if (slo > m) continue;  // whole piece above m, keep walking
            const double shi = p.deriv(hi);
            if (shi <= m) return {hi, true, {}};  // kink at hi
            return {solve_slope(p, m, lo, hi), false, p};
        }
        throw std::domain_error("argmin_left: slope below attainable range");
    }
    double argmin_left(double m, double cap) const {
        return argmin_left_env(m, cap).x;
    }

    /// Smallest minimizer of D(x) - m x over [cap, inf); requires
    /// convexity right of cap. Characterization: smallest x with D'(x+) >= m.
    EnvPoint argmin_right_env(double m, double cap) const {
        if (curve_.deriv_right(cap) >= m) return {cap, true, {}};
        const std::size_t start = curve_.piece_index(cap);
        for (std::size_t i = start; i < curve_.pieces().size(); ++i) {
            const double lo = std::max(curve_.piece_lo(i), cap);
            const double hi = curve_.piece_hi(i);
            if (!(lo < hi)) continue;
            const auto& p = curve_.pieces()[i];
            const double shi =
                std::isinf(hi) ? tail_slope(p, false) : p.deriv(hi);
            if (shi < m) continue;
            const double slo = p.deriv(lo);
            if (slo >= m) return {lo, true, {}};
            return {solve_slope(p, m, lo, hi), false, p};
        }
        throw std::domain_error("argmin_right: slope above attainable range");
    }
    double argmin_right(double m, double cap) const {
        return argmin_right_env(m, cap).x;
    }

    /// Smallest minimizer of D(x) - m x over (-inf, cap]: the opposite
    /// selection to argmin_left, used to probe law invariance of the
    /// coupling under tie-breaking.
    double argmin_left_smallest(double m, double cap) const {
        for (std::size_t i = 0; i < curve_.pieces().size(); ++i) {
            const double lo = curve_.piece_lo(i);
            const double hi = std::min(curve_.piece_hi(i), cap);
            if (!(lo < hi)) continue;
            const auto& p = curve_.pieces()[i];
            const double slo = std::isinf(lo) ? tail_slope(p, true)
                                              : p.deriv(lo);
            if (slo >= m) {
                return std::isinf(lo)
                           ? -std::numeric_limits<double>::infinity()
                           : lo;
            }
            const double shi = p.deriv(hi);
            if (shi < m) continue;
            return solve_slope(p, m, lo, hi);
        }
        return cap;
    }

    /// Largest minimizer of D(x) - m x over [cap, inf).
    double argmin_right_largest(double m, double cap) const {
        for (std::size_t i = curve_.pieces().size(); i-- > 0;) {
            const double lo = std::max(curve_.piece_lo(i), cap);
            const double hi = curve_.piece_hi(i);
            if (!(lo < hi)) continue;
            const auto& p = curve_.pieces()[i];
            const double shi = std::isinf(hi) ? tail_slope(p, false)
                                              : p.deriv(hi);
            if (shi <= m) {
                return std::isinf(hi) ? std::numeric_limits<double>::infinity()
                                      : hi;
            }
            const double slo = p.deriv(lo);
            if (slo > m) continue;
            return solve_slope(p, m, lo, hi);
        }
        return cap;
    }

  private:
    double argmax_inside(double theta) const {
        // D concave on [a, b]: maximizer where D'(x+) <= theta <= D'(x-);
        // smallest such x = first point with D'(x+) <= theta.
        if (a_ == b_) return a_;
        if (curve_.deriv_right(a_) <= theta) return a_;
        if (curve_.deriv_left(b_) > theta) return b_;
        const std::size_t start = curve_.piece_index(a_);
        for (std::size_t i = start; i < curve_.pieces().size(); ++i) {
            const double lo = std::max(curve_.piece_lo(i), a_);
            const double hi = std::min(curve_.piece_hi(i), b_);
            if (!(lo < hi)) continue;
            const auto& p = curve_.pieces()[i];
            // slopes decrease along the piece
            if (p.deriv(lo) <= theta) return lo;
            if (p.deriv(hi) > theta) continue;
            return solve_slope(p, theta, lo, hi);
        }
        return b_;
    }

    static double tail_slope(const CurvePiece& p, bool left_tail) {
        // slope limit at -inf (left) or +inf (right); quadratic terms cannot
        // extend to infinity for potentials of equal-mean pairs.
        (void)left_tail;
        return p.b;
    }

    /// Solve p.deriv(x) = m for x in (lo, hi), p.deriv monotone there.
    static double solve_slope(const CurvePiece& p, double m, double lo,
                              double hi) {
        if (p.d == 0.0) {
            if (p.a == 0.0) return hi;  // flat piece: slope identically p.b
            return (m - p.b) / (2.0 * p.a);
        }
        if (p.a == 0.0) {
            // b - d/x^2 = m  =>  x^2 = d/(b - m)
            const double x2 = p.d / (p.b - m);
            if (x2 > 0.0) {
                const double r = std::sqrt(x2);
                const double mid =
                    std::isinf(lo) ? hi - 1.0
                                   : (std::isinf(hi) ? lo + 1.0 : 0.5 * (lo + hi));
                return mid < 0.0 ? -r : r;
            }
        }
        // mixed piece: bisect the monotone derivative to machine precision
        double l = std::isinf(lo) ? std::min(-1.0, 2.0 * hi - 1.0) : lo;
        double h = std::isinf(hi) ? std::max(1.0, 2.0 * lo + 1.0) : hi;
        if (std::isinf(lo)) {
            while (p.deriv(l) > m) l *= 2.0;
        }
        if (std::isinf(hi)) {
            while (p.deriv(h) < m) h *= 2.0;
        }
        const bool increasing = p.deriv(h) >= p.deriv(l);
        for (int it = 0; it < 200 && h - l > 1e-16 * (1.0 + std::abs(l) + std::abs(h));
             ++it) {
            const double mid = 0.5 * (l + h);
            if ((p.deriv(mid) < m) == increasing) {
                l = mid;
            } else {
                h = mid;
            }
        }
        return 0.5 * (l + h);
    }

    PiecewiseCurve curve_;
    double a_ = 0.0;
    double b_ = 0.0;
};

}  // namespace mtbounds
