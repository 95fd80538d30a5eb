#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtbounds/measure.hpp"

namespace mtbounds {

enum class LpSense { minimize, maximize };

struct LpInfeasible : std::runtime_error {
    explicit LpInfeasible(const std::string& family)
        : std::runtime_error("LP infeasible: " + family +
                             " (consider a larger martingale slack epsilon)"),
          constraint_family(family) {}
    std::string constraint_family;
};

/// Equal-mass discretization: every uniform or inverse-cube piece splits
/// into n cells, each replaced by an atom at the cell's conditional mean
/// (mass and mean preserved exactly); existing atoms are kept verbatim.
inline std::vector<Atom> discretize(const Measure& m, std::size_t n) {
    if (n < 2) throw std::invalid_argument("discretize: n >= 2 required");
    std::vector<Atom> out;
    for (const auto& a : m.atoms()) out.push_back(a);
    for (const auto& p : m.uniform_pieces()) {
        const double step = (p.hi - p.lo) / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            out.push_back({p.lo + (static_cast<double>(k) + 0.5) * step,
                           p.w / static_cast<double>(n)});
        }
    }
    for (const auto& p : m.invcube_pieces()) {
        // equal-mass cells split at the piece quantiles
        const double wc = p.w / static_cast<double>(n);
        double prev = p.lo;
        for (std::size_t k = 1; k <= n; ++k) {
            double next;
            if (k == n) {
                next = p.hi;
            } else {
                const double target = wc * static_cast<double>(k);
                double lo = std::isinf(p.lo) ? std::min(-2.0, 2.0 * p.hi) : p.lo;
                double hi = std::isinf(p.hi) ? std::max(2.0, 2.0 * p.lo) : p.hi;
                while (p.cdf_mass(lo) > target) lo *= 2.0;
                while (p.cdf_mass(hi) < target) hi *= 2.0;
                for (int it = 0; it < 100; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (p.cdf_mass(mid) < target ? lo : hi) = mid;
                }
                next = 0.5 * (lo + hi);
            }
            InvCubePiece cell{prev, next, wc};
            out.push_back({cell.mean(), wc});
            prev = next;
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Atom& l, const Atom& r) { return l.x < r.x; });
    return out;
}

/// Discrete martingale transport LP on atom supports:
///   optimize sum pi_ij |y_j - x_i|
///   s.t. row sums = mu_i, column sums = nu_j,
///        |sum_j pi_ij (y_j - x_i)| <= eps * mu_i.
struct DiscreteLP {
    std::vector<Atom> x;  // mu atoms
    std::vector<Atom> y;  // nu atoms
    LpSense sense = LpSense::minimize;
    double epsilon = 1e-12;
};

struct LpSolution {
    double value = 0.0;
    double epsilon_used = 0.0;
    // transport plan as (x, y, mass) triples of the basic variables
    std::vector<std::array<double, 3>> plan;
};

namespace detail_lp {

/// Revised simplex with a dense basis inverse over a sparse column matrix
/// (every transport column has at most four nonzeros). Dantzig pricing
/// with a Bland fallback under degenerate stalling keeps the pivot
/// sequence deterministic and cycle-free.
class RevisedSimplex {
  public:
    RevisedSimplex(std::size_t m, std::size_t n)
        : m_(m), n_(n), cost_(n, 0.0), col_rows_(n), col_vals_(n), b_(m, 0.0) {}

    void set_cost(std::size_t j, double c) { cost_[j] = c; }
    void add_entry(std::size_t i, std::size_t j, double v) {
        col_rows_[j].push_back(i);
        col_vals_[j].push_back(v);
    }
    void set_rhs(std::size_t i, double v) { b_[i] = v; }

    /// Minimizes cost over Ax = b, x >= 0 (b >= 0 expected).
    /// Big-M on an all-artificial start; the right-hand side carries a
    /// deterministic anti-degeneracy perturbation that is removed before
    /// the solution is read off. Throws LpInfeasible.
    double solve(std::vector<double>* primal_out) {
        double cmax = 1.0;
        for (std::size_t j = 0; j < n_; ++j) {
            cmax = std::max(cmax, std::abs(cost_[j]));
        }
        big_m_ = 1e5 * cmax;

        basis_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) basis_[i] = n_ + i;  // artificial
        binv_.assign(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = 1.0;
        double bscale = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            bscale = std::max(bscale, std::abs(b_[i]));
        }
        bpert_ = b_;
        for (std::size_t i = 0; i < m_; ++i) {
            bpert_[i] += 1e-9 * bscale * static_cast<double>(i + 1) /
                         static_cast<double>(m_);
        }
        xb_ = bpert_;

        iterate();

        // read the solution against the unperturbed right-hand side
        std::vector<double> xb_true(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double* row = &binv_[i * m_];
            double acc = 0.0;
            for (std::size_t k = 0; k < m_; ++k) acc += row[k] * b_[k];
            xb_true[i] = acc;
        }
        double art = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] >= n_) art += std::abs(xb_true[i]);
        }
        if (art > 1e-7) throw LpInfeasible("marginal/martingale system");

        if (primal_out) {
            primal_out->assign(n_, 0.0);
            for (std::size_t i = 0; i < m_; ++i) {
                if (basis_[i] < n_) {
                    (*primal_out)[basis_[i]] = std::max(xb_true[i], 0.0);
                }
            }
        }
        double obj = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) {
                obj += cost_[basis_[i]] * std::max(xb_true[i], 0.0);
            }
        }
        return obj;
    }

  private:
    double col_cost(std::size_t j) const {
        return j < n_ ? cost_[j] : big_m_;
    }

    // y = c_B^T B^{-1}
    void btran(std::vector<double>& y) const {
        y.assign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = col_cost(basis_[i]);
            if (cb == 0.0) continue;
            const double* row = &binv_[i * m_];
            for (std::size_t k = 0; k < m_; ++k) y[k] += cb * row[k];
        }
    }

    // w = B^{-1} a_j
    void ftran(std::size_t j, std::vector<double>& w) const {
        w.assign(m_, 0.0);
        if (j >= n_) {
            const std::size_t r = j - n_;
            for (std::size_t i = 0; i < m_; ++i) w[i] = binv_[i * m_ + r];
            return;
        }
        const auto& rows = col_rows_[j];
        const auto& vals = col_vals_[j];
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const std::size_t r = rows[k];
            const double v = vals[k];
            for (std::size_t i = 0; i < m_; ++i) {
                w[i] += v * binv_[i * m_ + r];
            }
        }
    }

    double reduced_cost(std::size_t j, const std::vector<double>& y) const {
        double d = col_cost(j);
        const auto& rows = col_rows_[j];
        const auto& vals = col_vals_[j];
        for (std::size_t k = 0; k < rows.size(); ++k) {
            d -= y[rows[k]] * vals[k];
        }
        return d;
    }

    void iterate() {
        const double dtol = 1e-9;
        std::vector<double> y, w;
        std::vector<char> in_basis(n_ + m_, 0);
        for (std::size_t i = 0; i < m_; ++i) in_basis[basis_[i]] = 1;
        double last_obj = std::numeric_limits<double>::infinity();
        int stall = 0;
        bool bland = false;
        for (std::size_t iter = 0;; ++iter) {
            if (iter > 500000) {
                throw std::runtime_error("simplex: iteration limit");
            }
            if (iter % 256 == 255) refactorize();
            btran(y);
            // entering column
            std::size_t enter = n_;
            double best = -dtol;
            for (std::size_t j = 0; j < n_; ++j) {
                if (in_basis[j]) continue;
                const double d = reduced_cost(j, y);
                if (bland) {
                    if (d < -dtol) {
                        enter = j;
                        break;
                    }
                } else if (d < best) {
                    best = d;
                    enter = j;
                }
            }
            if (enter == n_) return;  // optimal
            ftran(enter, w);
            // ratio test, lowest basis index on near-ties
            auto pick_leaving = [&]() {
                double wmax = 0.0;
                for (std::size_t i = 0; i < m_; ++i) {
                    wmax = std::max(wmax, std::abs(w[i]));
                }
                const double ptol = 1e-10 * (1.0 + wmax);
                std::size_t leave = m_;
                double ratio = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < m_; ++i) {
                    if (w[i] > ptol) {
                        const double r = std::max(xb_[i], 0.0) / w[i];
                        if (r < ratio - 1e-13 ||
                            (r < ratio + 1e-13 &&
                             (leave == m_ || basis_[i] < basis_[leave]))) {
                            ratio = r;
                            leave = i;
                        }
                    }
                }
                return std::pair<std::size_t, double>(leave, ratio);
            };
            auto [leave, ratio] = pick_leaving();
            if (leave == m_) {
                // recompute the inverse before concluding unboundedness
                refactorize();
                ftran(enter, w);
                std::tie(leave, ratio) = pick_leaving();
                if (leave == m_) {
                    throw std::runtime_error("simplex: unbounded");
                }
            }
            // pivot: update basis inverse and solution
            const double piv = w[leave];
            double* lrow = &binv_[leave * m_];
            for (std::size_t k = 0; k < m_; ++k) lrow[k] /= piv;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == leave) continue;
                const double f = w[i];
                if (f == 0.0) continue;
                double* row = &binv_[i * m_];
                for (std::size_t k = 0; k < m_; ++k) row[k] -= f * lrow[k];
                xb_[i] -= ratio * f;
                if (xb_[i] < 0.0 && xb_[i] > -1e-9) xb_[i] = 0.0;
            }
            in_basis[basis_[leave]] = 0;
            in_basis[enter] = 1;
            basis_[leave] = enter;
            xb_[leave] = ratio;
            // degenerate-stall detection: fall back to Bland ordering
            double obj = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                obj += col_cost(basis_[i]) * xb_[i];
            }
            if (obj < last_obj - 1e-13) {
                last_obj = obj;
                stall = 0;
                bland = false;
            } else if (++stall > 256) {
                bland = true;
            }
        }
    }

    void refactorize() {
        // rebuild B^{-1} from the basis columns by Gauss-Jordan
        std::vector<double> B(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t j = basis_[i];
            if (j >= n_) {
                B[(j - n_) * m_ + i] = 1.0;
            } else {
                for (std::size_t k = 0; k < col_rows_[j].size(); ++k) {
                    B[col_rows_[j][k] * m_ + i] = col_vals_[j][k];
                }
            }
        }
        std::vector<double> inv(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
        for (std::size_t c = 0; c < m_; ++c) {
            std::size_t piv = c;
            double pv = std::abs(B[c * m_ + c]);
            for (std::size_t r = c + 1; r < m_; ++r) {
                if (std::abs(B[r * m_ + c]) > pv) {
                    pv = std::abs(B[r * m_ + c]);
                    piv = r;
                }
            }
            if (pv < 1e-13) continue;  // singular direction; keep going
            if (piv != c) {
                for (std::size_t k = 0; k < m_; ++k) {
                    std::swap(B[piv * m_ + k], B[c * m_ + k]);
                    std::swap(inv[piv * m_ + k], inv[c * m_ + k]);
                }
            }
            const double s = 1.0 / B[c * m_ + c];
            for (std::size_t k = 0; k < m_; ++k) {
                B[c * m_ + k] *= s;
                inv[c * m_ + k] *= s;
            }
            for (std::size_t r = 0; r < m_; ++r) {
                if (r == c) continue;
                const double f = B[r * m_ + c];
                if (f == 0.0) continue;
                for (std::size_t k = 0; k < m_; ++k) {
                    B[r * m_ + k] -= f * B[c * m_ + k];
                    inv[r * m_ + k] -= f * inv[c * m_ + k];
                }
            }
        }
        binv_.swap(inv);
        // refresh the basic solution
        xb_.assign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double* row = &binv_[i * m_];
            double acc = 0.0;
            for (std::size_t k = 0; k < m_; ++k) acc += row[k] * bpert_[k];
            xb_[i] = std::max(acc, 0.0);
        }
    }

    std::size_t m_, n_;
    double big_m_ = 1e5;
    std::vector<double> cost_;
    std::vector<std::vector<std::size_t>> col_rows_;
    std::vector<std::vector<double>> col_vals_;
    std::vector<double> b_;
    std::vector<double> bpert_;
    std::vector<double> binv_;
    std::vector<double> xb_;
    std::vector<std::size_t> basis_;
};

}  // namespace detail_lp

/// Solve the martingale transport LP. On infeasibility at the requested
/// epsilon, retries once with eps = 2 * (max cell width)^2, the scale of
/// the conditional-mean quantization error.
inline LpSolution solve_lp(const DiscreteLP& lp) {
    const std::size_t nx = lp.x.size();
    const std::size_t ny = lp.y.size();
    if (nx == 0 || ny == 0) throw std::invalid_argument("solve_lp: empty side");

    auto run = [&](double eps) -> LpSolution {
        // a sub-roundoff band is an equality in all but name; modelling it
        // with slack columns only adds degenerate rows
        const bool band = eps > 1e-9;
        const std::size_t m = nx + ny + (band ? 2 * nx : nx);
        const std::size_t nvar = nx * ny + (band ? 2 * nx : 0);
        detail_lp::RevisedSimplex sx(m, nvar);
        auto var = [&](std::size_t i, std::size_t j) { return i * ny + j; };
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                const double cost = std::abs(lp.y[j].x - lp.x[i].x);
                sx.set_cost(var(i, j),
                            lp.sense == LpSense::minimize ? cost : -cost);
            }
        }
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                const std::size_t v = var(i, j);
                sx.add_entry(i, v, 1.0);
                sx.add_entry(nx + j, v, 1.0);
                const double drift = lp.y[j].x - lp.x[i].x;
                if (band) {
                    if (drift != 0.0) {
                        sx.add_entry(nx + ny + 2 * i, v, drift);
                        sx.add_entry(nx + ny + 2 * i + 1, v, -drift);
                    }
                } else if (drift != 0.0) {
                    sx.add_entry(nx + ny + i, v, drift);
                }
            }
            sx.set_rhs(i, lp.x[i].w);
            if (band) {
                sx.add_entry(nx + ny + 2 * i, nx * ny + 2 * i, 1.0);
                sx.add_entry(nx + ny + 2 * i + 1, nx * ny + 2 * i + 1, 1.0);
                sx.set_rhs(nx + ny + 2 * i, eps * lp.x[i].w);
                sx.set_rhs(nx + ny + 2 * i + 1, eps * lp.x[i].w);
            } else {
                sx.set_rhs(nx + ny + i, 0.0);
            }
        }
        for (std::size_t j = 0; j < ny; ++j) sx.set_rhs(nx + j, lp.y[j].w);

        std::vector<double> primal;
        double obj = sx.solve(&primal);
        if (lp.sense == LpSense::maximize) obj = -obj;
        LpSolution sol;
        sol.value = obj;
        sol.epsilon_used = eps;
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                const double v = primal[var(i, j)];
                if (v > 1e-14) sol.plan.push_back({lp.x[i].x, lp.y[j].x, v});
            }
        }
        return sol;
    };

    try {
        return run(lp.epsilon);
    } catch (const LpInfeasible&) {
        double maxw = 0.0;
        auto widths = [&](const std::vector<Atom>& side) {
            for (std::size_t k = 0; k + 1 < side.size(); ++k) {
                maxw = std::max(maxw, side[k + 1].x - side[k].x);
            }
        };
        widths(lp.x);
        widths(lp.y);
        const double eps2 = 2.0 * maxw * maxw;
        if (eps2 <= lp.epsilon) throw;
        return run(eps2);
    }
}

}  // namespace mtbounds
