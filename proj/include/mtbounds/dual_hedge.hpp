#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mtbounds/lower_coupling.hpp"
#include "mtbounds/quadrature.hpp"

namespace mtbounds {

/// A jump interval of p or q: the Lagrangian vanishes for y anywhere in
/// [y_lo, y_hi] when X sits at x.
struct JumpGap {
    double x;
    double y_lo;
    double y_hi;
};

struct SubhedgeReport {
    double min_L = 0.0;
    double argmin_x = 0.0;
    double argmin_y = 0.0;
    double max_abs_support = 0.0;  // max |L| over support triples and gaps
};

/// Semi-static subhedge (psi, delta) built from the optimal coupling:
/// theta and alpha accumulate 2/(q-p) integrals on [a, b] and extend to R
/// through the monotone inverses of p and q. Normalized so that
/// theta(x0) = alpha(x0) = 0 at x0 = (a+b)/2.
class HedgePair {
  public:
    explicit HedgePair(const CouplingMap& map, std::size_t grid = 1024)
        : map_(&map) {
        const MarginalPair& pr = map.pair();
        if (pr.identical) {
            identical_ = true;
            a_ = b_ = x0_ = 0.0;
            return;
        }
        a_ = pr.a;
        b_ = pr.b;
        x0_ = 0.5 * (a_ + b_);
        build_tables(grid);
    }

    double a() const { return a_; }
    double b() const { return b_; }
    double x0() const { return x0_; }

    /// theta(x) = int_{x0}^x 2/(q-p) dz, nondecreasing on [a, b].
    double theta(double x) const {
        if (identical_) return 0.0;
        check_inside(x);
        return eval_cum(theta_cum_, x, [this](double z) {
            const PhiPoint r = map_->at_x(z);
            return 2.0 / span(r);
        });
    }

    /// alpha(x) = x theta(x) - int_{x0}^x (q+p)/(q-p) dz on [a, b].
    double alpha(double x) const {
        if (identical_) return 0.0;
        check_inside(x);
        const double i2 = eval_cum(i2_cum_, x, [this](double z) {
            const PhiPoint r = map_->at_x(z);
            if (std::isinf(r.Q) || std::isinf(r.P)) {
                return std::isinf(r.Q) ? 1.0 : -1.0;
            }
            return (r.Q + r.P) / span(r);
        });
        return x * theta(x) - i2;
    }

    /// Right-continuous inverse of p: inf{x in E : p(x) <= y}, b if none.
    double p_inv_right(double y) const {
        double lo = a_, hi = b_;
        if (map_->at_x(hi).P > y) return b_;
        if (map_->at_x(lo).P <= y) return a_;
        for (int it = 0; it < 90; ++it) {
            const double mid = 0.5 * (lo + hi);
            (map_->at_x(mid).P <= y ? hi : lo) = mid;
        }
        return hi;
    }

    /// Left-continuous inverse of q: sup{x in E : q(x) >= y}, a if q(a) < y.
    double q_inv_left(double y) const {
        double lo = a_, hi = b_;
        if (map_->at_x(lo).Q < y) return a_;
        if (map_->at_x(hi).Q >= y) return b_;
        for (int it = 0; it < 90; ++it) {
            const double mid = 0.5 * (lo + hi);
            (map_->at_x(mid).Q >= y ? lo : hi) = mid;
        }
        return lo;
    }

    double psi(double y) const {
        if (identical_) return 0.0;
        if (y < a_) {
            const double x = p_inv_right(y);
            return alpha(x) + (x - y) * (1.0 - theta(x));
        }
        if (y > b_) {
            const double x = q_inv_left(y);
            return alpha(x) + (x - y) * (-1.0 - theta(x));
        }
        return alpha(y);
    }

    double delta(double x) const {
        if (identical_) return 0.0;
        if (x < a_) return theta(p_inv_right(x));
        if (x > b_) return theta(q_inv_left(x));
        return theta(x);
    }

    /// L(x, y) = |y-x| + psi(x) - psi(y) + delta(x)(y-x).
    double lagrangian(double x, double y) const {
        return std::abs(y - x) + psi(x) - psi(y) + delta(x) * (y - x);
    }

    /// Jump intervals of p and q (from eta_bar atoms and from genuine
    /// discontinuities of P, Q in u).
    std::vector<JumpGap> jump_gaps() const {
        std::vector<JumpGap> gaps;
        if (identical_) return gaps;
        const MarginalPair& pr = map_->pair();
        const double eps = 1e-11;
        for (const auto& at : pr.eta_bar.atoms()) {
            const double um = pr.eta_bar.cdf_left(at.x);
            const double up = pr.eta_bar.cdf(at.x);
            if (up - um < 1e-14) continue;
            const PhiPoint lo = map_->at_clamped(up - eps);
            const PhiPoint hi = map_->at_clamped(um + eps);
            if (hi.P - lo.P > 1e-9) gaps.push_back({at.x, lo.P, hi.P});
            if (hi.Q - lo.Q > 1e-9) gaps.push_back({at.x, lo.Q, hi.Q});
        }
        // genuine u-discontinuities: bisect where the grid shows a move
        // far larger than the local continuous trend
        const auto& g = map_->grid();
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            if (g[i + 1].u - g[i].u < 1e-12) continue;
            for (int side = 0; side < 2; ++side) {
                const double v0 = side == 0 ? g[i].P : g[i].Q;
                const double v1 = side == 0 ? g[i + 1].P : g[i + 1].Q;
                if (std::isinf(v0) || std::isinf(v1)) continue;
                if (v0 - v1 < 1e-5 * (1.0 + std::abs(v0))) continue;
                double ulo = g[i].u, uhi = g[i + 1].u;
                for (int it = 0; it < 60; ++it) {
                    const double um = 0.5 * (ulo + uhi);
                    const PhiPoint rm = map_->at(um);
                    const double vm = side == 0 ? rm.P : rm.Q;
                    (v0 - vm > 0.5 * (v0 - v1) ? uhi : ulo) = um;
                }
                const PhiPoint lo = map_->at_clamped(uhi + eps);
                const PhiPoint hi = map_->at_clamped(ulo - eps);
                const double vlo = side == 0 ? lo.P : lo.Q;
                const double vhi = side == 0 ? hi.P : hi.Q;
                if (vhi - vlo > 1e-9) {
                    gaps.push_back({map_->at(0.5 * (ulo + uhi)).x, vlo, vhi});
                }
            }
        }
        return gaps;
    }

    /// Grid certificate: min of L over the product grid, plus |L| at the
    /// support triples (x, p(x)), (x, x), (x, q(x)) and across jump gaps.
    SubhedgeReport verify_subhedge(std::size_t nx, std::size_t ny,
                                   double lo, double hi) const {
        if (nx < 2 || ny < 2) {
            throw std::invalid_argument("verify_subhedge: grids need >= 2 points");
        }
        SubhedgeReport rep;
        rep.min_L = std::numeric_limits<double>::infinity();
        if (identical_) {
            rep.min_L = 0.0;
            return rep;
        }
        std::vector<double> xs(nx), psix(nx), delx(nx);
        std::vector<double> ys(ny), psiy(ny);
        for (std::size_t i = 0; i < nx; ++i) {
            xs[i] = lo + (hi - lo) * static_cast<double>(i) /
                             static_cast<double>(nx - 1);
            psix[i] = psi(xs[i]);
            delx[i] = delta(xs[i]);
        }
        for (std::size_t j = 0; j < ny; ++j) {
            ys[j] = lo + (hi - lo) * static_cast<double>(j) /
                             static_cast<double>(ny - 1);
            psiy[j] = psi(ys[j]);
        }
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                const double L = std::abs(ys[j] - xs[i]) + psix[i] - psiy[j] +
                                 delx[i] * (ys[j] - xs[i]);
                if (L < rep.min_L) {
                    rep.min_L = L;
                    rep.argmin_x = xs[i];
                    rep.argmin_y = ys[j];
                }
            }
        }
        // support triples on an E-grid
        const std::size_t ne = std::max<std::size_t>(nx, 256);
        for (std::size_t i = 0; i <= ne; ++i) {
            const double x = a_ + (b_ - a_) * static_cast<double>(i) /
                                      static_cast<double>(ne);
            const PhiPoint r = map_->at_x(x);
            for (double y : {r.P, x, r.Q}) {
                if (!std::isfinite(y)) continue;
                rep.max_abs_support =
                    std::max(rep.max_abs_support, std::abs(lagrangian(x, y)));
            }
        }
        for (const auto& gap : jump_gaps()) {
            for (int k = 1; k < 8; ++k) {
                const double y =
                    gap.y_lo + (gap.y_hi - gap.y_lo) * k / 8.0;
                if (!std::isfinite(y)) continue;
                rep.max_abs_support = std::max(
                    rep.max_abs_support, std::abs(lagrangian(gap.x, y)));
            }
        }
        return rep;
    }

    /// Dual objective int psi d(nu) - int psi d(mu).
    double dual_value(double tol = 1e-9) const {
        if (identical_) return 0.0;
        return integrate_psi(map_->pair().nu, tol) -
               integrate_psi(map_->pair().mu, tol);
    }

  private:
    static void sort_unique(std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    static double span(const PhiPoint& r) {
        if (std::isinf(r.P) || std::isinf(r.Q)) {
            return std::numeric_limits<double>::infinity();
        }
        return r.Q - r.P;
    }

    void check_inside(double x) const {
        if (x < a_ - 1e-9 || x > b_ + 1e-9) {
            throw std::domain_error("theta/alpha: x outside [a, b]");
        }
    }

    void build_tables(std::size_t grid) {
        std::vector<double> zs;
        zs.push_back(a_);
        zs.push_back(b_);
        zs.push_back(x0_);
        for (double k : map_->pair().eta_bar.breakpoints()) {
            if (k >= a_ && k <= b_) zs.push_back(k);
        }
        for (const auto& r : map_->grid()) {
            if (r.x > a_ && r.x < b_) zs.push_back(r.x);
        }
        for (std::size_t i = 1; i < grid; ++i) {
            zs.push_back(a_ + (b_ - a_) * static_cast<double>(i) /
                                  static_cast<double>(grid));
        }
        sort_unique(zs);
        zs_ = std::move(zs);
        theta_cum_.assign(zs_.size(), 0.0);
        i2_cum_.assign(zs_.size(), 0.0);
        auto f1 = [this](double z) { return 2.0 / span(map_->at_x(z)); };
        auto f2 = [this](double z) {
            const PhiPoint r = map_->at_x(z);
            if (std::isinf(r.Q)) return 1.0;
            if (std::isinf(r.P)) return -1.0;
            return (r.Q + r.P) / span(r);
        };
        for (std::size_t i = 1; i < zs_.size(); ++i) {
            theta_cum_[i] = theta_cum_[i - 1] +
                            adaptive_simpson(f1, zs_[i - 1], zs_[i], 1e-13);
            i2_cum_[i] = i2_cum_[i - 1] +
                         adaptive_simpson(f2, zs_[i - 1], zs_[i], 1e-13);
        }
        // shift so the accumulators vanish at x0
        const std::size_t i0 = static_cast<std::size_t>(
            std::lower_bound(zs_.begin(), zs_.end(), x0_) - zs_.begin());
        const double t0 = theta_cum_[i0];
        const double s0 = i2_cum_[i0];
        for (std::size_t i = 0; i < zs_.size(); ++i) {
            theta_cum_[i] -= t0;
            i2_cum_[i] -= s0;
        }
    }

    template <class F>
    double eval_cum(const std::vector<double>& cum, double x,
                    const F& f) const {
        const double xc = std::clamp(x, a_, b_);
        auto it = std::upper_bound(zs_.begin(), zs_.end(), xc);
        const std::size_t i =
            static_cast<std::size_t>(it - zs_.begin()) - 1;
        return cum[i] + adaptive_simpson(f, zs_[i], xc, 1e-13);
    }

    /// int psi d(m); inverse-cube tails integrate the asymptotic-linear
    /// rearrangement of psi in the variable t = 1/y.
    double integrate_psi(const Measure& m, double tol) const {
        double acc = 0.0;
        for (const auto& at : m.atoms()) acc += at.w * psi(at.x);
        std::vector<double> seeds{a_, b_, x0_};
        const double per =
            tol / static_cast<double>(1 + m.uniform_pieces().size() +
                                      m.invcube_pieces().size());
        for (const auto& p : m.uniform_pieces()) {
            const double rho = p.density();
            acc += adaptive_simpson_seeded(
                [&](double y) { return rho * psi(y); }, p.lo, p.hi, seeds,
                per);
        }
        for (const auto& p : m.invcube_pieces()) {
            const double c = p.coeff();
            if (std::isfinite(p.lo) && std::isfinite(p.hi)) {
                acc += adaptive_simpson_seeded(
                    [&](double y) {
                        return c * psi(y) / std::abs(y * y * y);
                    },
                    p.lo, p.hi, seeds, per);
                continue;
            }
            // t*psi(1/t) without cancellation at t -> 0
            auto tpsi = [&](double t) {
                if (t == 0.0) {
                    const double xq = q_inv_left(
                        std::numeric_limits<double>::infinity());
                    const double xp = p_inv_right(
                        -std::numeric_limits<double>::infinity());
                    // sign of the tail decides which inverse applies
                    if (p.lo > 0.0) return 1.0 + theta(xq);
                    return -(1.0 - theta(xp));
                }
                const double y = 1.0 / t;
                if (y > b_) {
                    const double x = q_inv_left(y);
                    return t * alpha(x) + (t * x - 1.0) * (-1.0 - theta(x));
                }
                if (y < a_) {
                    const double x = p_inv_right(y);
                    return t * alpha(x) + (t * x - 1.0) * (1.0 - theta(x));
                }
                return t * psi(y);
            };
            if (std::isinf(p.hi)) {
                acc += adaptive_simpson(
                    [&](double t) { return c * tpsi(t); }, 0.0, 1.0 / p.lo,
                    per);
            } else {
                // lo = -inf, hi < 0
                acc -= adaptive_simpson(
                    [&](double t) { return c * tpsi(t); }, 1.0 / p.hi, 0.0,
                    per);
            }
        }
        return acc;
    }

    const CouplingMap* map_;
    bool identical_ = false;
    double a_ = 0.0, b_ = 0.0, x0_ = 0.0;
    std::vector<double> zs_;
    std::vector<double> theta_cum_;
    std::vector<double> i2_cum_;
};

}  // namespace mtbounds
