#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtbounds {

inline constexpr double kMassTol = 1e-12;
inline constexpr double kMeanTol = 1e-12;

/// Point mass of weight `w` at `x`.
struct Atom {
    double x = 0.0;
    double w = 0.0;
};

/// `w` * Uniform[lo, hi].
struct UniformPiece {
    double lo = 0.0;
    double hi = 0.0;
    double w = 0.0;

    double density() const { return w / (hi - lo); }
    double mean() const { return 0.5 * (lo + hi); }
};

/// Mass `w` with density proportional to |x|^-3 on [lo, hi]. The interval
/// must not straddle zero; lo may be -inf (negative side) and hi may be
/// +inf (positive side). Used for heavy-tail marginals that arise in
/// closed-form test cases; not part of the JSON surface.
struct InvCubePiece {
    double lo = 0.0;
    double hi = 0.0;
    double w = 0.0;

    static double inv1(double t) { return std::isinf(t) ? 0.0 : 1.0 / t; }
    static double inv2(double t) {
        return std::isinf(t) ? 0.0 : 1.0 / (2.0 * t * t);
    }

    bool positive_side() const { return lo > 0.0; }
    double sign() const { return positive_side() ? 1.0 : -1.0; }
    // integral of |x|^-3 over [lo, hi]
    double raw_mass() const { return std::abs(inv2(lo) - inv2(hi)); }
    /// density scale c so that the density is c * |x|^-3
    double coeff() const { return w / raw_mass(); }
    /// conditional mean of the piece (per unit mass)
    double mean() const {
        const double c = 1.0 / raw_mass();
        return positive_side() ? c * (inv1(lo) - inv1(hi))
                               : c * (inv1(hi) - inv1(lo));
    }
    /// mass of the piece at or below x
    double cdf_mass(double x) const {
        if (x <= lo) return 0.0;
        if (x >= hi) return w;
        const double c = coeff();
        return positive_side() ? c * (inv2(lo) - inv2(x))
                               : c * (inv2(x) - inv2(lo));
    }
    /// moment of the piece over [xl, hi] (xl inside or below)
    void mass_mean_above(double xl, double& m0, double& m1) const {
        const double x = std::max(xl, lo);
        if (x >= hi) return;
        const double c = coeff();
        m0 += c * sign() * (inv2(x) - inv2(hi));
        m1 += c * sign() * (inv1(x) - inv1(hi));
    }
};

/// Finite mixture of point atoms, uniform pieces and inverse-cube pieces.
/// Pieces may overlap (densities add); atoms may sit inside piece interiors.
/// Immutable after construction; all operations are pure.
class Measure {
  public:
    Measure() = default;
    Measure(std::vector<Atom> atoms, std::vector<UniformPiece> uniforms,
            std::vector<InvCubePiece> invcubes = {})
        : atoms_(std::move(atoms)),
          uniforms_(std::move(uniforms)),
          invcubes_(std::move(invcubes)) {
        validate();
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const Atom& l, const Atom& r) { return l.x < r.x; });
        mass_ = 0.0;
        for (const auto& a : atoms_) mass_ += a.w;
        for (const auto& p : uniforms_) mass_ += p.w;
        for (const auto& p : invcubes_) mass_ += p.w;
    }

    static Measure dirac(double x, double w = 1.0) { return Measure({{x, w}}, {}); }
    static Measure uniform(double lo, double hi, double w = 1.0) {
        return Measure({}, {{lo, hi, w}});
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<UniformPiece>& uniform_pieces() const { return uniforms_; }
    const std::vector<InvCubePiece>& invcube_pieces() const { return invcubes_; }
    double mass() const { return mass_; }
    bool is_probability() const { return std::abs(mass_ - 1.0) <= kMassTol; }
    bool empty() const {
        return atoms_.empty() && uniforms_.empty() && invcubes_.empty();
    }
    bool has_atoms() const { return !atoms_.empty(); }

    /// Smallest / largest point of the support (+-inf for unbounded tails).
    double support_lo() const {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& a : atoms_) lo = std::min(lo, a.x);
        for (const auto& p : uniforms_) lo = std::min(lo, p.lo);
        for (const auto& p : invcubes_) lo = std::min(lo, p.lo);
        return lo;
    }
    double support_hi() const {
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& a : atoms_) hi = std::max(hi, a.x);
        for (const auto& p : uniforms_) hi = std::max(hi, p.hi);
        for (const auto& p : invcubes_) hi = std::max(hi, p.hi);
        return hi;
    }

    /// Right-continuous CDF value in [0, mass].
    double cdf(double x) const {
        double acc = 0.0;
        for (const auto& a : atoms_) {
            if (a.x <= x) acc += a.w;
        }
        for (const auto& p : uniforms_) {
            if (x >= p.hi) {
                acc += p.w;
            } else if (x > p.lo) {
                acc += p.w * (x - p.lo) / (p.hi - p.lo);
            }
        }
        for (const auto& p : invcubes_) acc += p.cdf_mass(x);
        return acc;
    }

    /// Left limit of the CDF.
    double cdf_left(double x) const {
        double acc = 0.0;
        for (const auto& a : atoms_) {
            if (a.x < x) acc += a.w;
        }
        for (const auto& p : uniforms_) {
            if (x >= p.hi) {
                acc += p.w;
            } else if (x > p.lo) {
                acc += p.w * (x - p.lo) / (p.hi - p.lo);
            }
        }
        for (const auto& p : invcubes_) acc += p.cdf_mass(x);
        return acc;
    }

    double atom_mass_at(double x) const {
        double acc = 0.0;
        for (const auto& a : atoms_) {
            if (a.x == x) acc += a.w;
        }
        return acc;
    }

    /// Lebesgue density of the absolutely continuous part,
    /// right-continuous at piece edges.
    double density(double x) const {
        double acc = 0.0;
        for (const auto& p : uniforms_) {
            if (x >= p.lo && x < p.hi) acc += p.density();
        }
        for (const auto& p : invcubes_) {
            if (x >= p.lo && x < p.hi) {
                acc += p.coeff() / std::abs(x * x * x);
            }
        }
        return acc;
    }

    /// Left-continuous generalized inverse F^{-1}(u) = inf{x : F(x) >= u}.
    /// Requires a probability measure and u in (0, 1).
    double quantile_left(double u) const {
        if (!(u > 0.0 && u < 1.0)) {
            throw std::domain_error("quantile_left: u must be in (0,1)");
        }
        if (!is_probability()) {
            throw std::domain_error("quantile_left: not a probability measure");
        }
        // bracket by support, then bisect F(x) >= u (F nondecreasing,
        // right-continuous; the left-continuous inverse is the infimum).
        double lo = support_lo();
        double hi = support_hi();
        if (std::isinf(lo)) {
            lo = std::min(-1.0, finite_lo() - 1.0);
            while (cdf(lo) >= u) lo *= 2.0;
        }
        if (std::isinf(hi)) {
            hi = std::max(1.0, finite_hi() + 1.0);
            while (cdf(hi) < u) hi *= 2.0;
        }
        if (cdf(lo) >= u) return lo;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (cdf(mid) >= u) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return hi;
    }

    double mean() const {
        double acc = 0.0;
        for (const auto& a : atoms_) acc += a.w * a.x;
        for (const auto& p : uniforms_) acc += p.w * p.mean();
        for (const auto& p : invcubes_) acc += p.w * p.mean();
        return acc;
    }

    /// Second moment; +inf when an inverse-cube tail makes it diverge.
    double second_moment() const {
        double acc = 0.0;
        for (const auto& a : atoms_) acc += a.w * a.x * a.x;
        for (const auto& p : uniforms_) {
            acc += p.w * (p.hi * p.hi + p.hi * p.lo + p.lo * p.lo) / 3.0;
        }
        for (const auto& p : invcubes_) {
            if (std::isinf(p.lo) || std::isinf(p.hi)) {
                return std::numeric_limits<double>::infinity();
            }
            acc += p.coeff() * std::log(std::abs(p.hi / p.lo));
        }
        return acc;
    }

    /// Call function C(x) = integral of (y - x)^+ d(measure).
    double call_value(double x) const {
        double acc = 0.0;
        for (const auto& a : atoms_) {
            if (a.x > x) acc += a.w * (a.x - x);
        }
        for (const auto& p : uniforms_) {
            if (x <= p.lo) {
                acc += p.w * (p.mean() - x);
            } else if (x < p.hi) {
                const double t = p.hi - x;
                acc += p.density() * 0.5 * t * t;
            }
        }
        for (const auto& p : invcubes_) acc += invcube_call(p, x);
        return acc;
    }

    /// Deterministic i.i.d. sample of size n via inverse-CDF.
    std::vector<double> sample(std::uint64_t seed, std::size_t n) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            double u = unif(rng);
            while (u <= 0.0 || u >= 1.0) u = unif(rng);
            out.push_back(quantile_left(u));
        }
        return out;
    }

    /// Multiply all weights by s (s >= 0).
    Measure scaled(double s) const {
        if (s < 0.0) throw std::invalid_argument("scaled: negative factor");
        std::vector<Atom> as = atoms_;
        std::vector<UniformPiece> us = uniforms_;
        std::vector<InvCubePiece> is = invcubes_;
        for (auto& a : as) a.w *= s;
        for (auto& p : us) p.w *= s;
        for (auto& p : is) p.w *= s;
        return Measure(std::move(as), std::move(us), std::move(is));
    }

    /// Sorted unique finite endpoints and atom locations.
    std::vector<double> breakpoints() const {
        std::vector<double> bs;
        for (const auto& a : atoms_) bs.push_back(a.x);
        for (const auto& p : uniforms_) {
            bs.push_back(p.lo);
            bs.push_back(p.hi);
        }
        for (const auto& p : invcubes_) {
            if (!std::isinf(p.lo)) bs.push_back(p.lo);
            if (!std::isinf(p.hi)) bs.push_back(p.hi);
        }
        std::sort(bs.begin(), bs.end());
        bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
        return bs;
    }

    bool has_infinite_tail() const {
        for (const auto& p : invcubes_) {
            if (std::isinf(p.lo) || std::isinf(p.hi)) return true;
        }
        return false;
    }

  private:
    void validate() const {
        for (const auto& a : atoms_) {
            if (!(a.w >= 0.0) || !std::isfinite(a.x)) {
                throw std::invalid_argument("Measure: bad atom");
            }
        }
        for (const auto& p : uniforms_) {
            if (!(p.lo < p.hi) || !(p.w >= 0.0) || !std::isfinite(p.lo) ||
                !std::isfinite(p.hi)) {
                throw std::invalid_argument("Measure: bad uniform piece");
            }
        }
        for (const auto& p : invcubes_) {
            if (!(p.lo < p.hi) || !(p.w >= 0.0)) {
                throw std::invalid_argument("Measure: bad invcube piece");
            }
            const bool pos = p.lo > 0.0;
            const bool neg = p.hi < 0.0;
            if (!pos && !neg) {
                throw std::invalid_argument(
                    "Measure: invcube piece must not straddle zero");
            }
            if ((pos && std::isinf(p.lo)) || (neg && std::isinf(p.hi))) {
                throw std::invalid_argument("Measure: invcube piece unbounded "
                                            "on the wrong side");
            }
        }
    }

    double finite_lo() const {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& a : atoms_) lo = std::min(lo, a.x);
        for (const auto& p : uniforms_) lo = std::min(lo, p.lo);
        for (const auto& p : invcubes_) {
            lo = std::min(lo, std::isinf(p.lo) ? p.hi : p.lo);
        }
        return std::isinf(lo) ? 0.0 : lo;
    }
    double finite_hi() const {
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& a : atoms_) hi = std::max(hi, a.x);
        for (const auto& p : uniforms_) hi = std::max(hi, p.hi);
        for (const auto& p : invcubes_) {
            hi = std::max(hi, std::isinf(p.hi) ? p.lo : p.hi);
        }
        return std::isinf(hi) ? 0.0 : hi;
    }

    static double invcube_call(const InvCubePiece& p, double x) {
        double m0 = 0.0, m1 = 0.0;
        p.mass_mean_above(x, m0, m1);
        return m1 - x * m0;
    }

    std::vector<Atom> atoms_;
    std::vector<UniformPiece> uniforms_;
    std::vector<InvCubePiece> invcubes_;
    double mass_ = 0.0;
};

/// Piecewise-constant approximation of a user density on [lo, hi]:
/// cells are split until the midpoint-vs-trapezoid mass estimates agree
/// to `tol` per cell, then each cell becomes a uniform piece.
template <class Density>
Measure discretize_to_pieces(const Density& f, double lo, double hi,
                             double tol = 1e-6, int max_cells = 1 << 16) {
    struct Cell {
        double lo, hi;
    };
    std::vector<Cell> work{{lo, hi}};
    std::vector<UniformPiece> out;
    int budget = max_cells;
    while (!work.empty()) {
        Cell c = work.back();
        work.pop_back();
        const double w = c.hi - c.lo;
        const double fm = f(0.5 * (c.lo + c.hi));
        const double trap = 0.5 * (f(c.lo) + f(c.hi));
        if (budget > 0 && std::abs(fm - trap) * w > tol) {
            --budget;
            work.push_back({c.lo, 0.5 * (c.lo + c.hi)});
            work.push_back({0.5 * (c.lo + c.hi), c.hi});
        } else {
            const double m = w * (fm + 2.0 * trap) / 3.0;  // Simpson mass
            if (m > 0.0) out.push_back({c.lo, c.hi, m});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const UniformPiece& l, const UniformPiece& r) {
                  return l.lo < r.lo;
              });
    return Measure({}, std::move(out));
}

}  // namespace mtbounds
