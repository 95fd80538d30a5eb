#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "mtbounds/lower_coupling.hpp"
#include "mtbounds/pair.hpp"
#include "mtbounds/potential.hpp"
#include "mtbounds/quadrature.hpp"

namespace mtbounds {

struct StrengthenedResult {
    bool ok = false;
    bool trivial_point_mass = false;  // mu = delta_x: unique coupling
    std::string reason;
    double witness = 0.0;

    explicit operator bool() const { return ok; }
};

/// Assumption check for the maximizing coupling: no common mass, supp(mu)
/// inside an interval E and supp(nu) in its complement.
inline StrengthenedResult check_strengthened(const MarginalPair& pair) {
    StrengthenedResult res;
    if (pair.identical) {
        res.reason = "identical marginals (kappa = 1)";
        res.witness = 1.0;
        return res;
    }
    if (pair.kappa > kMassTol) {
        res.reason = "common mass present (kappa > 0)";
        res.witness = pair.kappa;
        return res;
    }
    if (pair.mu.atoms().size() == 1 && pair.mu.uniform_pieces().empty() &&
        pair.mu.invcube_pieces().empty()) {
        res.ok = true;
        res.trivial_point_mass = true;
        return res;
    }
    // kappa = 0 means eta_bar = mu, gamma_bar = nu and decompose has
    // already verified supp(nu) does not meet (a, b)
    res.ok = true;
    return res;
}

/// One point of the upper-coupling solution.
struct UpperPoint {
    double u = 0.0;
    double x = 0.0;       // F_mu^{-1}(u)
    double G = 0.0;       // lower target, G <= a, nondecreasing
    double H = 0.0;       // upper target, H >= b, nondecreasing
    double phi_hat = 0.0; // bi-tangent slope
    double w = 0.0;       // weight of the down branch (H-x)/(H-G)
};

/// F_u(y) of the upper construction, for y >= b.
inline double F_u_upper(const MarginalPair& pair, double u, double y) {
    if (!(u > 0.0 && u < 1.0)) {
        throw std::domain_error("F_u: u not in (0,1)");
    }
    const double xu = pair.mu.quantile_left(u);
    const PiecewiseCurve cnu = call_curve(pair.nu);
    const double b = pair.b;
    return pair.mu.call_value(xu) + (y - xu) * (u - 1.0) + cnu.eval(b) +
           (y - b) * cnu.deriv_right(b) - cnu.eval(y);
}

/// Maximal-cost martingale coupling under the strengthened assumption:
/// conditional on X = x_u the mass moves to {G(u), H(u)} with the
/// martingale weights. The same tangency machinery as the lower bound,
/// applied to C_nu instead of the potential.
class UpperCouplingMap {
  public:
    explicit UpperCouplingMap(MarginalPair pair, std::size_t base_grid = 512)
        : pair_(std::move(pair)) {
        auto chk = check_strengthened(pair_);
        if (!chk.ok) {
            throw std::invalid_argument("upper coupling: " + chk.reason);
        }
        trivial_ = chk.trivial_point_mass;
        curve_ = Potential::from_measures(Measure(), pair_.nu, pair_.a,
                                          pair_.b);
        cnu_b_ = curve_.value(pair_.b);
        cnu_db_ = curve_.curve().deriv_right(pair_.b);
        if (!trivial_) {
            solver_ = detail::TangentSolver(curve_, TieBreak::inner);
            if (base_grid > 0) build_grid(base_grid);
        }
    }

    UpperCouplingMap(const UpperCouplingMap&) = delete;
    UpperCouplingMap& operator=(const UpperCouplingMap&) = delete;

    const MarginalPair& pair() const { return pair_; }
    bool trivial_point_mass() const { return trivial_; }
    const std::vector<UpperPoint>& grid() const { return grid_; }

    UpperPoint at(double u) const {
        if (!(u > 0.0 && u < 1.0)) {
            throw std::domain_error("UpperCouplingMap: u must be in (0,1)");
        }
        UpperPoint r;
        r.u = u;
        r.x = pair_.mu.quantile_left(u);
        if (trivial_) {
            // forced coupling: Y ~ nu independent of the (single-atom) X
            r.G = pair_.nu.quantile_left(std::min(u, 0.5));
            r.H = pair_.nu.quantile_left(std::max(u, 0.5));
            r.w = detail::down_weight(r.x, r.G, r.H);
            return r;
        }
        const double c = (u - 1.0) + cnu_db_;
        const double K =
            pair_.mu.call_value(r.x) - r.x * (u - 1.0) + cnu_b_ - pair_.b * cnu_db_;
        const auto sol = solver_.solve(c, K);
        r.phi_hat = sol.m;
        r.G = sol.P;
        r.H = sol.Q;
        r.w = detail::down_weight(r.x, r.G, r.H);
        return r;
    }

    UpperPoint at_clamped(double u) const {
        return at(std::clamp(u, 1e-14, 1.0 - 1e-14));
    }

    UpperPoint at_x(double x) const {
        return at(std::clamp(pair_.mu.cdf(x), 1e-14, 1.0 - 1e-14));
    }

    /// Robust upper bound: int_0^1 2 (x_u - G)(H - x_u)/(H - G) du.
    double price(double tol = 1e-9) const {
        if (trivial_) {
            const double x = pair_.mu.atoms().front().x;
            return 2.0 * pair_.nu.call_value(x);
        }
        auto f = [&](double u) {
            const UpperPoint r = at_clamped(u);
            return detail::two_point_cost(r.x, r.G, r.H);
        };
        std::vector<double> seeds;
        seeds.reserve(grid_.size());
        for (const auto& g : grid_) seeds.push_back(g.u);
        return adaptive_simpson_seeded(f, 0.0, 1.0, seeds, tol);
    }

    /// Jensen bound sqrt(E[Y^2] - E[X^2]); the price never exceeds it.
    double jensen_bound() const {
        return std::sqrt(pair_.nu.second_moment() - pair_.mu.second_moment());
    }

    /// CDF of the law of Y under the coupling.
    double pushforward_cdf(double y) const {
        if (trivial_) return pair_.nu.cdf(y);
        double acc = 0.0;
        if (y >= pair_.a) {
            // every down branch lands at or below a
            acc += cum_w(1.0);
        } else {
            const double ug = monotone_sup(
                [&](double u) { return at_clamped(u).G; }, y);
            acc += cum_w(ug);
        }
        if (y >= pair_.b) {
            const double uh = monotone_sup(
                [&](double u) { return at_clamped(u).H; }, y);
            acc += uh - cum_w(uh);
        }
        return acc;
    }

    std::vector<std::pair<double, double>> sample(std::uint64_t seed,
                                                  std::size_t n) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<std::pair<double, double>> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            double u = std::clamp(unif(rng), 1e-15, 1.0 - 1e-15);
            const double v = unif(rng);
            if (trivial_) {
                out.emplace_back(pair_.mu.atoms().front().x,
                                 pair_.nu.quantile_left(u));
                continue;
            }
            const UpperPoint r = at(u);
            out.emplace_back(r.x, v <= r.w ? r.G : r.H);
        }
        return out;
    }

  private:
    void build_grid(std::size_t base) {
        std::vector<double> us;
        for (std::size_t i = 0; i <= base; ++i) {
            us.push_back(static_cast<double>(i) / static_cast<double>(base));
        }
        for (double k : pair_.mu.breakpoints()) {
            us.push_back(pair_.mu.cdf_left(k));
            us.push_back(pair_.mu.cdf(k));
        }
        for (double& u : us) u = std::clamp(u, 1e-12, 1.0 - 1e-12);
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end()), us.end());
        grid_.clear();
        grid_.reserve(us.size());
        for (double u : us) grid_.push_back(at(u));
        for (int pass = 0; pass < 4; ++pass) {
            std::vector<UpperPoint> refined;
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
        // cumulative down-branch weight on the grid
        cumw_.assign(grid_.size(), 0.0);
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            cumw_[i] = cumw_[i - 1] +
                       adaptive_simpson(
                           [&](double u) { return at_clamped(u).w; },
                           grid_[i - 1].u, grid_[i].u, 1e-12);
        }
    }

    /// int_0^u w(v) dv via the grid table plus a partial cell.
    double cum_w(double u) const {
        if (grid_.empty()) return 0.0;
        const double uc = std::clamp(u, grid_.front().u, grid_.back().u);
        std::size_t lo = 0, hi = grid_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (grid_[mid].u <= uc ? lo : hi) = mid;
        }
        double acc = cumw_[lo];
        acc += adaptive_simpson([&](double v) { return at_clamped(v).w; },
                                grid_[lo].u, uc, 1e-12);
        if (u > grid_.back().u) {
            acc += (u - grid_.back().u) * grid_.back().w;
        }
        return acc;
    }

    /// sup{u : f(u) <= y} for a nondecreasing f (0 if none).
    template <class F>
    double monotone_sup(const F& f, double y) const {
        double lo = 1e-14, hi = 1.0 - 1e-14;
        if (f(lo) > y) return 0.0;
        if (f(hi) <= y) return 1.0;
        for (int it = 0; it < 90; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) <= y ? lo : hi) = mid;
        }
        return lo;
    }

    MarginalPair pair_;
    bool trivial_ = false;
    Potential curve_;  // C_nu with the region split at [a, b]
    double cnu_b_ = 0.0;
    double cnu_db_ = 0.0;
    detail::TangentSolver solver_;
    std::vector<UpperPoint> grid_;
    std::vector<double> cumw_;
};

inline double upper_price(const UpperCouplingMap& map, double tol = 1e-9) {
    return map.price(tol);
}

}  // namespace mtbounds
