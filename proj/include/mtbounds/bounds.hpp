#pragma once

#include <algorithm>
#include <cmath>
#include <memory>

#include "mtbounds/dual_hedge.hpp"
#include "mtbounds/lower_coupling.hpp"
#include "mtbounds/pair.hpp"
#include "mtbounds/upper_coupling.hpp"

namespace mtbounds {

/// Summary of a lower-bound run: primal price of the optimal coupling,
/// value of the semi-static subhedge, their gap, and the numerical
/// certificates backing optimality.
struct BoundReport {
    double primal_price = 0.0;
    double dual_value = 0.0;
    double gap = 0.0;
    double min_lagrangian = 0.0;
    double marginal_error = 0.0;
    double kappa = 0.0;
};

/// Max CDF mismatch between the coupling pushforward and nu, probed at
/// the nu breakpoints and n quantiles.
inline double marginal_recovery_error(const CouplingMap& map,
                                      std::size_t n_quantiles = 200) {
    const Measure& nu = map.pair().nu;
    double err = 0.0;
    for (std::size_t i = 1; i <= n_quantiles; ++i) {
        const double u =
            static_cast<double>(i) / static_cast<double>(n_quantiles + 1);
        const double y = nu.quantile_left(u);
        err = std::max(err, std::abs(map.pushforward_cdf(y) - nu.cdf(y)));
    }
    for (double y : nu.breakpoints()) {
        err = std::max(err, std::abs(map.pushforward_cdf(y) - nu.cdf(y)));
    }
    return err;
}

inline double upper_recovery_error(const UpperCouplingMap& map,
                                   std::size_t n_quantiles = 200) {
    const Measure& nu = map.pair().nu;
    double err = 0.0;
    for (std::size_t i = 1; i <= n_quantiles; ++i) {
        const double u =
            static_cast<double>(i) / static_cast<double>(n_quantiles + 1);
        const double y = nu.quantile_left(u);
        err = std::max(err, std::abs(map.pushforward_cdf(y) - nu.cdf(y)));
    }
    return err;
}

/// Padded hull of both supports, clipped to effective quantile ranges for
/// unbounded tails.
inline std::pair<double, double> verification_box(const MarginalPair& pair,
                                                  double pad = 2.0) {
    auto effective = [](const Measure& m, bool low) {
        const double s = low ? m.support_lo() : m.support_hi();
        if (std::isfinite(s)) return s;
        return m.quantile_left(low ? 1e-6 : 1.0 - 1e-6);
    };
    const double lo = std::min(effective(pair.mu, true), effective(pair.nu, true));
    const double hi =
        std::max(effective(pair.mu, false), effective(pair.nu, false));
    return {lo - pad, hi + pad};
}

/// Full lower-bound pipeline on a validated pair.
inline BoundReport lower_bound_report(const CouplingMap& map,
                                      std::size_t grid = 256,
                                      double quad_tol = 1e-9) {
    BoundReport rep;
    rep.kappa = map.kappa();
    if (map.identical()) return rep;
    rep.primal_price = map.primal_price(quad_tol);
    HedgePair hedge(map);
    rep.dual_value = hedge.dual_value(quad_tol);
    rep.gap = rep.primal_price - rep.dual_value;
    const auto box = verification_box(map.pair());
    rep.min_lagrangian =
        hedge.verify_subhedge(grid, grid, box.first, box.second).min_L;
    rep.marginal_error = marginal_recovery_error(map);
    return rep;
}

}  // namespace mtbounds
