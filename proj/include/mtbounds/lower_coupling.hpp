#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mtbounds/pair.hpp"
#include "mtbounds/potential.hpp"
#include "mtbounds/quadrature.hpp"

namespace mtbounds {

/// Which optimizer to pick when the tangent touches along a flat stretch.
/// `inner` (largest P, smallest Q) is the production selection; the
/// resulting law is selection-independent, which tests probe via `outer`.
enum class TieBreak { inner, outer };

/// One point of the lower-coupling solution.
struct PhiPoint {
    double u = 0.0;
    double x = 0.0;     // F_eta_bar^{-1}(u)
    double phi = 0.0;   // bi-tangent slope
    double P = 0.0;     // lower tangency point, P <= a
    double Q = 0.0;     // upper tangency point, Q >= b
    double zeta = 0.0;  // gamma_a - u - phi
    double w = 0.0;     // down-branch probability (Q - x)/(Q - P)
};

namespace detail {

inline double down_weight(double x, double P, double Q) {
    if (std::isinf(P) && std::isinf(Q)) return 0.5;
    if (std::isinf(Q)) return 1.0;
    if (std::isinf(P)) return 0.0;
    return (Q - x) / (Q - P);
}

/// E[|Y - x|] of the two-point law at (P, Q) with martingale weights:
/// 2 (x - P)(Q - x)/(Q - P).
inline double two_point_cost(double x, double P, double Q) {
    if (std::isinf(P) && std::isinf(Q)) {
        return std::numeric_limits<double>::infinity();
    }
    if (std::isinf(P)) return 2.0 * (Q - x);
    if (std::isinf(Q)) return 2.0 * (x - P);
    return 2.0 * (x - P) * (Q - x) / (Q - P);
}

/// Bi-tangent solver: finds the slope m with
///   [f(P) - m P] + [f(Q) - (c - m) Q] = K,
/// where P minimizes f - m x over (-inf, a] and Q minimizes f - (c - m) x
/// over [b, inf). The left side is nondecreasing in m (rate Q - P), so an
/// exact candidate-slope scan brackets the root and safeguarded Newton
/// polishes it to machine precision.
class TangentSolver {
  public:
    TangentSolver() = default;
    TangentSolver(const Potential& pot, TieBreak tie)
        : pot_(&pot), tie_(tie) {
        const auto& c = pot.curve();
        left_tail_slope_ = c.pieces().front().b;
        right_tail_slope_ = c.pieces().back().b;
        for (double k : c.knots()) {
            if (k <= pot.a()) {
                left_criticals_.push_back(c.deriv_left(k));
                left_criticals_.push_back(c.deriv_right(k));
            }
            if (k >= pot.b()) {
                right_criticals_.push_back(c.deriv_left(k));
                right_criticals_.push_back(c.deriv_right(k));
            }
        }
        std::sort(left_criticals_.begin(), left_criticals_.end());
        std::sort(right_criticals_.begin(), right_criticals_.end());
    }

    struct Solved {
        double m;
        double P;
        double Q;
    };

    Solved solve(double c, double K) const {
        const double a = pot_->a();
        const double b = pot_->b();
        const double m_lo = std::max(left_tail_slope_, c - right_tail_slope_);
        const double scale = 1.0 + std::abs(K);

        double lo = m_lo;
        double glo = G(lo, c);
        if (glo >= K - 1e-13 * scale) {
            if (glo > K + 1e-8 * scale) {
                throw std::runtime_error(
                    "tangent solve: boundary value exceeds target");
            }
            return finish(lo, c);
        }

        // candidate slopes where either envelope changes piece
        std::vector<double> cand;
        cand.reserve(left_criticals_.size() + right_criticals_.size() + 1);
        for (double s : left_criticals_) {
            if (s > m_lo) cand.push_back(s);
        }
        for (double t : right_criticals_) {
            if (c - t > m_lo) cand.push_back(c - t);
        }
        // root of the fully pinned (linear in m) regime as sentinel
        const double g_pin = pot_->value(a) + pot_->value(b) - c * b;
        cand.push_back((b > a ? (K - g_pin) / (b - a) : m_lo) + 1.0);
        std::sort(cand.begin(), cand.end());

        double hi = lo, ghi = glo;
        for (double m : cand) {
            if (m <= lo) continue;
            hi = m;
            ghi = G(hi, c);
            if (ghi >= K) break;
            lo = hi;
            glo = ghi;
        }
        if (ghi < K) {
            throw std::runtime_error("tangent solve: no bracket found");
        }

        // regimes are fixed across the bracket; solve the piece-combination
        // equation in closed form where the piece types allow it
        if (auto closed = solve_regime(c, K, lo, hi)) {
            // ties at the bracket ends get the tie-broken selection
            const double pad = 1e-13 * (1.0 + std::abs(lo) + std::abs(hi));
            if (closed->m > lo + pad && closed->m < hi - pad) return *closed;
            return finish(closed->m, c);
        }

        // fallback: safeguarded Newton (mixed or quad-vs-invcube regimes)
        double m = 0.5 * (lo + hi);
        for (int it = 0; it < 120; ++it) {
            if (hi - lo <= 4e-16 * (1.0 + std::abs(lo) + std::abs(hi))) break;
            const double g = G(m, c);
            if (g < K) {
                lo = m;
            } else {
                hi = m;
            }
            const double P = pot_->argmin_left(m, a);
            const double Q = pot_->argmin_right(c - m, b);
            double next = 0.5 * (lo + hi);
            if (std::isfinite(P) && std::isfinite(Q) && Q > P) {
                const double newton = m + (K - g) / (Q - P);
                if (newton > lo && newton < hi) next = newton;
            }
            m = next;
        }
        return finish(0.5 * (lo + hi), c);
    }

  private:
    double G(double m, double c) const {
        const double P = pot_->argmin_left(m, pot_->a());
        const double Q = pot_->argmin_right(c - m, pot_->b());
        double v = 0.0;
        v += std::isinf(P) ? 0.0 : pot_->value(P) - m * P;
        v += std::isinf(Q) ? 0.0 : pot_->value(Q) - (c - m) * Q;
        return v;
    }

    Solved finish(double m, double c) const {
        const double P = tie_ == TieBreak::inner
                             ? pot_->argmin_left(m, pot_->a())
                             : pot_->argmin_left_smallest(m, pot_->a());
        const double Q = tie_ == TieBreak::inner
                             ? pot_->argmin_right(c - m, pot_->b())
                             : pot_->argmin_right_largest(c - m, pot_->b());
        return {m, P, Q};
    }

    // one envelope side, classified by the piece type at the tangency
    struct Term {
        enum Kind { pinned, quad, invc, mixed } kind;
        double x0 = 0.0;   // pinned point
        CurvePiece p;      // tangency piece (quad / invc / mixed)
        double sgn = 1.0;  // sign of x within an invcube piece
    };

    static Term classify(const Potential::EnvPoint& e) {
        if (e.pinned) return {Term::pinned, e.x, {}, 1.0};
        if (e.piece.d == 0.0 && e.piece.a != 0.0) {
            return {Term::quad, e.x, e.piece, 1.0};
        }
        if (e.piece.a == 0.0 && e.piece.d != 0.0) {
            return {Term::invc, e.x, e.piece, e.x < 0.0 ? -1.0 : 1.0};
        }
        return {Term::mixed, e.x, e.piece, 1.0};
    }

    // stable real roots of A t^2 + B t + C = 0
    static int quad_roots(double A, double B, double C, double out[2]) {
        if (std::abs(A) < 1e-300) {
            if (B == 0.0) return 0;
            out[0] = -C / B;
            return 1;
        }
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0) return 0;
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (B + (B >= 0.0 ? sq : -sq));
        out[0] = q / A;
        out[1] = (q != 0.0) ? C / q : out[0];
        return 2;
    }

    /// Closed-form root of TermL(m) + TermR(c - m) = K inside [lo, hi].
    std::optional<Solved> solve_regime(double c, double K, double lo,
                                       double hi) const {
        const double mid = 0.5 * (lo + hi);
        Term L, R;
        try {
            L = classify(pot_->argmin_left_env(mid, pot_->a()));
            R = classify(pot_->argmin_right_env(c - mid, pot_->b()));
        } catch (const std::domain_error&) {
            return std::nullopt;
        }
        if (L.kind == Term::mixed || R.kind == Term::mixed) return std::nullopt;
        const double pad = 1e-9 * (1.0 + std::abs(lo) + std::abs(hi));
        auto in_bracket = [&](double m) {
            return m >= lo - pad && m <= hi + pad;
        };
        auto clampm = [&](double m) { return std::clamp(m, lo, hi); };

        if (L.kind == Term::pinned && R.kind == Term::pinned) {
            const double fL = pot_->value(L.x0), fR = pot_->value(R.x0);
            const double m = (K - fL - fR + c * R.x0) / (R.x0 - L.x0);
            if (!in_bracket(m)) return std::nullopt;
            return Solved{clampm(m), L.x0, R.x0};
        }
        if (L.kind == Term::pinned && R.kind == Term::quad) {
            // t = theta - bR; -(t^2)/(4aR) + x0 t + C0 = 0
            const double fL = pot_->value(L.x0);
            const double C0 = fL - (c - R.p.b) * L.x0 + R.p.c - K;
            double r[2];
            const int n = quad_roots(-1.0 / (4.0 * R.p.a), L.x0, C0, r);
            for (int i = 0; i < n; ++i) {
                const double m = c - R.p.b - r[i];
                if (in_bracket(m)) {
                    return Solved{clampm(m), L.x0, r[i] / (2.0 * R.p.a)};
                }
            }
            return std::nullopt;
        }
        if (L.kind == Term::quad && R.kind == Term::pinned) {
            const double fR = pot_->value(R.x0);
            const double C0 = L.p.c + fR - (c - L.p.b) * R.x0 - K;
            double r[2];
            const int n = quad_roots(-1.0 / (4.0 * L.p.a), R.x0, C0, r);
            for (int i = 0; i < n; ++i) {
                const double m = L.p.b + r[i];
                if (in_bracket(m)) {
                    return Solved{clampm(m), r[i] / (2.0 * L.p.a), R.x0};
                }
            }
            return std::nullopt;
        }
        if (L.kind == Term::quad && R.kind == Term::quad) {
            const double A2 = -1.0 / (4.0 * L.p.a) - 1.0 / (4.0 * R.p.a);
            const double cb = c - R.p.b;
            const double A1 = L.p.b / (2.0 * L.p.a) + cb / (2.0 * R.p.a);
            const double A0 = -L.p.b * L.p.b / (4.0 * L.p.a) -
                              cb * cb / (4.0 * R.p.a) + L.p.c + R.p.c - K;
            double r[2];
            const int n = quad_roots(A2, A1, A0, r);
            for (int i = 0; i < n; ++i) {
                const double m = r[i];
                if (in_bracket(m)) {
                    return Solved{clampm(m), (m - L.p.b) / (2.0 * L.p.a),
                                  (c - m - R.p.b) / (2.0 * R.p.a)};
                }
            }
            return std::nullopt;
        }
        if (L.kind == Term::pinned && R.kind == Term::invc) {
            // W = sqrt(dR (bR - theta)) >= 0, m = (c - bR) + W^2/dR
            const double fL = pot_->value(L.x0);
            const double sigma = R.sgn * (R.p.d > 0.0 ? 1.0 : -1.0);
            const double C0 = K - fL - R.p.c + (c - R.p.b) * L.x0;
            double r[2];
            const int n = quad_roots(L.x0 / R.p.d, -2.0 * sigma, C0, r);
            for (int i = 0; i < n; ++i) {
                const double W = r[i];
                if (W <= 0.0) continue;
                const double m = (c - R.p.b) + W * W / R.p.d;
                if (in_bracket(m)) {
                    return Solved{clampm(m), L.x0,
                                  R.sgn * std::abs(R.p.d) / W};
                }
            }
            return std::nullopt;
        }
        if (L.kind == Term::invc && R.kind == Term::pinned) {
            const double fR = pot_->value(R.x0);
            const double sigma = L.sgn * (L.p.d > 0.0 ? 1.0 : -1.0);
            const double C0 = K - L.p.c - fR + (c - L.p.b) * R.x0;
            double r[2];
            const int n = quad_roots(R.x0 / L.p.d, -2.0 * sigma, C0, r);
            for (int i = 0; i < n; ++i) {
                const double W = r[i];
                if (W <= 0.0) continue;
                const double m = L.p.b - W * W / L.p.d;
                if (in_bracket(m)) {
                    return Solved{clampm(m), L.sgn * std::abs(L.p.d) / W,
                                  R.x0};
                }
            }
            return std::nullopt;
        }
        if (L.kind == Term::invc && R.kind == Term::invc) {
            const double sigL = L.sgn * (L.p.d > 0.0 ? 1.0 : -1.0);
            const double sigR = R.sgn * (R.p.d > 0.0 ? 1.0 : -1.0);
            const double R0 = K - L.p.c - R.p.c;
            const double S0 = L.p.b + R.p.b - c;
            // sigL WL + sigR WR = R0/2;  WL^2/dL + WR^2/dR = S0
            const double A = 1.0 / L.p.d + 1.0 / R.p.d;
            const double B = -R0 * sigR / L.p.d;
            const double C0 = 0.25 * R0 * R0 / L.p.d - S0;
            double r[2];
            int n;
            const bool balanced = std::abs(A) < 1e-14 * (std::abs(1.0 / L.p.d) +
                                                         std::abs(1.0 / R.p.d));
            if (balanced) {
                // dL ~ -dR: linear in WR
                if (B == 0.0) return std::nullopt;
                r[0] = -C0 / B;
                n = 1;
            } else {
                n = quad_roots(A, B, C0, r);
            }
            for (int i = 0; i < n; ++i) {
                const double WR = r[i];
                if (WR <= 0.0) continue;
                double WL = sigL * (0.5 * R0 - sigR * WR);
                if (balanced && R0 != 0.0) {
                    // algebraically equal, but the fused product keeps the
                    // tiny root accurate when R0^2 nearly cancels 4 dL S0
                    WL = sigL * std::fma(R0, R0, 4.0 * L.p.d * S0) /
                         (4.0 * R0);
                }
                if (WL <= 0.0) continue;
                const double m = L.p.b - WL * WL / L.p.d;
                if (in_bracket(m)) {
                    return Solved{clampm(m), L.sgn * std::abs(L.p.d) / WL,
                                  R.sgn * std::abs(R.p.d) / WR};
                }
            }
            return std::nullopt;
        }
        return std::nullopt;  // quad-vs-invcube: no closed form wired up
    }

    const Potential* pot_ = nullptr;
    TieBreak tie_ = TieBreak::inner;
    std::vector<double> left_criticals_;
    std::vector<double> right_criticals_;
    double left_tail_slope_ = 0.0;
    double right_tail_slope_ = 0.0;
};

}  // namespace detail

/// Optimal lower-bound martingale coupling of a validated pair: with
/// probability kappa the identity map on the common mass, otherwise the
/// two-point transport of eta_bar into gamma_bar through the tangency
/// points (P(u), Q(u)). Non-copyable (the tangent solver holds internal
/// references); wrap in a unique_ptr to move it around.
class CouplingMap {
  public:
    explicit CouplingMap(MarginalPair pair, TieBreak tie = TieBreak::inner,
                         std::size_t base_grid = 512)
        : pair_(std::move(pair)), tie_(tie) {
        if (pair_.identical) return;
        pot_ = Potential::normalized(pair_);
        if (auto shape = pot_.shape_check(); !shape.ok) {
            throw DispersionError(shape.violation_x, shape.violation_x);
        }
        solver_ = detail::TangentSolver(pot_, tie_);
        if (base_grid > 0) build_grid(base_grid);
    }

    CouplingMap(const CouplingMap&) = delete;
    CouplingMap& operator=(const CouplingMap&) = delete;

    const MarginalPair& pair() const { return pair_; }
    const Potential& normalized_potential() const { return pot_; }
    double kappa() const { return pair_.kappa; }
    bool identical() const { return pair_.identical; }
    const std::vector<PhiPoint>& grid() const { return grid_; }

    /// Exact solution record at u in (0, 1).
    PhiPoint at(double u) const {
        if (!(u > 0.0 && u < 1.0)) {
            throw std::domain_error("CouplingMap: u must be in (0,1)");
        }
        if (pair_.identical) {
            throw std::domain_error("CouplingMap: identical marginals");
        }
        PhiPoint r;
        r.u = u;
        r.x = pair_.eta_bar.quantile_left(u);
        const double c = pair_.gamma_a - u;
        const double K = pot_.value(r.x) - r.x * c;
        const auto sol = solver_.solve(c, K);
        r.phi = sol.m;
        r.P = sol.P;
        r.Q = sol.Q;
        r.zeta = c - sol.m;
        r.w = detail::down_weight(r.x, r.P, r.Q);
        return r;
    }

    PhiPoint at_clamped(double u) const {
        return at(std::clamp(u, 1e-14, 1.0 - 1e-14));
    }

    /// p(x) = P(F_eta_bar(x)), q(x) = Q(F_eta_bar(x)) for x in [a, b].
    PhiPoint at_x(double x) const {
        return at(std::clamp(pair_.eta_bar.cdf(x), 1e-14, 1.0 - 1e-14));
    }

    /// Price of the coupling: (1-kappa) * int_0^1 2(x_u-P)(Q-x_u)/(Q-P) du.
    double primal_price(double tol = 1e-9) const {
        if (pair_.identical) return 0.0;
        auto f = [&](double u) {
            const PhiPoint r = at_clamped(u);
            return detail::two_point_cost(r.x, r.P, r.Q);
        };
        std::vector<double> seeds;
        seeds.reserve(grid_.size());
        for (const auto& g : grid_) seeds.push_back(g.u);
        const double integral =
            adaptive_simpson_seeded(f, 0.0, 1.0, seeds, tol);
        return (1.0 - pair_.kappa) * integral;
    }

    /// CDF of the law of Y under the coupling (common mass included).
    double pushforward_cdf(double y) const {
        if (pair_.identical) return pair_.mu.cdf(y);
        double part;
        if (y >= pair_.b) {
            part = 1.0 + at_clamped(inverse_Q(y)).zeta;
        } else if (y >= pair_.a) {
            part = pair_.gamma_a;
        } else {
            part = at_clamped(inverse_P(y)).phi;
        }
        return pair_.common.cdf(y) + (1.0 - pair_.kappa) * part;
    }

    /// Deterministic sample of n pairs (x, y).
    std::vector<std::pair<double, double>> sample(std::uint64_t seed,
                                                  std::size_t n) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<std::pair<double, double>> out;
        out.reserve(n);
        const double kap = pair_.kappa;
        std::optional<Measure> common_bar;
        if (kap > 0.0) common_bar = pair_.common.scaled(1.0 / kap);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = unif(rng);
            double u = std::clamp(unif(rng), 1e-15, 1.0 - 1e-15);
            const double v = unif(rng);
            if (z < kap) {
                const double x = common_bar->quantile_left(u);
                out.emplace_back(x, x);
            } else {
                const PhiPoint r = at(u);
                out.emplace_back(r.x, v <= r.w ? r.P : r.Q);
            }
        }
        return out;
    }

    /// u* = inf{u : P(u) <= y}; P is nonincreasing in u.
    double inverse_P(double y) const {
        double lo = 1e-14, hi = 1.0 - 1e-14;
        if (at(lo).P <= y) return lo;
        if (at(hi).P > y) return hi;
        for (int it = 0; it < 90; ++it) {
            const double mid = 0.5 * (lo + hi);
            (at(mid).P <= y ? hi : lo) = mid;
        }
        return hi;
    }

    /// u* = inf{u : Q(u) <= y}; Q is nonincreasing in u.
    double inverse_Q(double y) const {
        double lo = 1e-14, hi = 1.0 - 1e-14;
        if (at(lo).Q <= y) return lo;
        if (at(hi).Q > y) return hi;
        for (int it = 0; it < 90; ++it) {
            const double mid = 0.5 * (lo + hi);
            (at(mid).Q <= y ? hi : lo) = mid;
        }
        return hi;
    }

  private:
    void build_grid(std::size_t base) {
        std::vector<double> us;
        us.reserve(base + 64);
        for (std::size_t i = 0; i <= base; ++i) {
            us.push_back(static_cast<double>(i) / static_cast<double>(base));
        }
        for (double k : pair_.eta_bar.breakpoints()) {
            us.push_back(pair_.eta_bar.cdf_left(k));
            us.push_back(pair_.eta_bar.cdf(k));
        }
        // gamma-side kinks pulled back through phi and zeta
        for (double k : pot_.curve().knots()) {
            for (double s :
                 {pot_.curve().deriv_left(k), pot_.curve().deriv_right(k)}) {
                if (k <= pair_.a) us.push_back(pullback(s, /*use_phi=*/true));
                if (k >= pair_.b) us.push_back(pullback(s, /*use_phi=*/false));
            }
        }
        for (double& u : us) u = std::clamp(u, 1e-12, 1.0 - 1e-12);
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end()), us.end());

        grid_.clear();
        grid_.reserve(us.size());
        for (double u : us) grid_.push_back(at(u));
        // refine where the down probability moves fast
        for (int pass = 0; pass < 4; ++pass) {
            std::vector<PhiPoint> refined;
            refined.reserve(grid_.size() * 2);
            bool changed = false;
            for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
                refined.push_back(grid_[i]);
                if (std::abs(grid_[i + 1].w - grid_[i].w) > 0.02 &&
                    grid_[i + 1].u - grid_[i].u > 1e-9) {
                    refined.push_back(at(0.5 * (grid_[i].u + grid_[i + 1].u)));
                    changed = true;
                }
            }
            refined.push_back(grid_.back());
            grid_.swap(refined);
            if (!changed) break;
        }
    }

    // solve phi(u) = s or zeta(u) = s; both are nonincreasing in u
    double pullback(double s, bool use_phi) const {
        auto val = [&](double u) {
            const PhiPoint r = at(u);
            return use_phi ? r.phi : r.zeta;
        };
        double lo = 1e-12, hi = 1.0 - 1e-12;
        if (val(lo) <= s) return lo;
        if (val(hi) >= s) return hi;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (val(mid) > s ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    MarginalPair pair_;
    TieBreak tie_;
    Potential pot_;
    detail::TangentSolver solver_;
    std::vector<PhiPoint> grid_;
};

/// E_u(x) on the normalized residual pair:
/// D(F^{-1}(u)) + (x - F^{-1}(u)) (gamma_a - u) - D(x).
inline double E_u(const MarginalPair& pair, double u, double x) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("E_u: u not in (0,1)");
    const Potential pot = Potential::normalized(pair);
    const double xu = pair.eta_bar.quantile_left(u);
    return pot.value(xu) + (x - xu) * (pair.gamma_a - u) - pot.value(x);
}

/// (phi(u), P(u), Q(u)) of a validated pair.
inline PhiPoint phi(const MarginalPair& pair, double u,
                    TieBreak tie = TieBreak::inner) {
    return CouplingMap(pair, tie, 0).at(u);
}

inline double zeta(const MarginalPair& pair, double u) {
    return phi(pair, u).zeta;
}

inline double down_probability(const CouplingMap& map, double u) {
    return map.at(u).w;
}

inline double primal_price(const CouplingMap& map, double tol = 1e-9) {
    return map.primal_price(tol);
}

struct OdeResidualResult {
    bool applicable = false;
    double max_residual = 0.0;
};

/// Finite-difference check of the coupled ODEs for p and q on interior
/// grid points; requires both marginals to be atom-free.
inline OdeResidualResult ode_residual(const MarginalPair& pair,
                                      const CouplingMap& map,
                                      std::size_t n_grid = 200,
                                      double h = 1e-5) {
    if (pair.mu.has_atoms() || pair.nu.has_atoms() || pair.identical ||
        pair.a == pair.b) {
        return {false, 0.0};
    }
    OdeResidualResult res;
    res.applicable = true;
    std::vector<double> knots;
    for (double k : pair.eta_bar.breakpoints()) knots.push_back(k);
    for (double k : pair.gamma_bar.breakpoints()) knots.push_back(k);
    const double a = pair.a, b = pair.b;
    for (std::size_t i = 1; i < n_grid; ++i) {
        const double x =
            a + (b - a) * static_cast<double>(i) / static_cast<double>(n_grid);
        if (x - a < 20.0 * h || b - x < 20.0 * h) continue;
        bool near_knot = false;
        for (double k : knots) {
            if (std::abs(x - k) < 20.0 * h) near_knot = true;
        }
        if (near_knot) continue;
        const PhiPoint c = map.at_x(x);
        const PhiPoint cp = map.at_x(x + h);
        const PhiPoint cm = map.at_x(x - h);
        const double fe = pair.eta_bar.density(x);
        if (fe <= 0.0) continue;
        const double fgp = pair.gamma_bar.density(c.P);
        const double fgq = pair.gamma_bar.density(c.Q);
        if (fgp > 0.0) {
            const double dp = (cp.P - cm.P) / (2.0 * h);
            const double rhs = -(c.Q - c.x) / (c.Q - c.P) * fe / fgp;
            res.max_residual = std::max(res.max_residual, std::abs(dp - rhs));
        }
        if (fgq > 0.0) {
            const double dq = (cp.Q - cm.Q) / (2.0 * h);
            const double rhs = -(c.x - c.P) / (c.Q - c.P) * fe / fgq;
            res.max_residual = std::max(res.max_residual, std::abs(dq - rhs));
        }
    }
    return res;
}

}  // namespace mtbounds
