#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mtbounds {

namespace detail {

template <class F>
double adaptive_simpson_rec(const F& f, double lo, double hi, double flo,
                            double fmid, double fhi, double whole, double tol,
                            int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid);
    const double rm = 0.5 * (mid + hi);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, lo, mid, flo, flm, fmid, left, 0.5 * tol,
                                depth - 1) +
           adaptive_simpson_rec(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol,
                                depth - 1);
}

}  // namespace detail

/// Adaptive Simpson on [lo, hi] with absolute tolerance `tol`.
template <class F>
double adaptive_simpson(const F& f, double lo, double hi, double tol,
                        int max_depth = 48) {
    if (!(hi > lo)) return 0.0;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    return detail::adaptive_simpson_rec(f, lo, hi, flo, fmid, fhi, whole, tol,
                                        max_depth);
}

/// Adaptive Simpson seeded at known kinks: integrates each subinterval
/// separately so the integrand only needs to be smooth between seeds.
template <class F>
double adaptive_simpson_seeded(const F& f, double lo, double hi,
                               const std::vector<double>& seeds, double tol,
                               int max_depth = 48) {
    if (!(hi > lo)) return 0.0;
    std::vector<double> cuts;
    cuts.push_back(lo);
    for (double s : seeds) {
        if (s > lo && s < hi) cuts.push_back(s);
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    const double per = tol / static_cast<double>(cuts.size());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] < 1e-300) continue;
        total += adaptive_simpson(f, cuts[i], cuts[i + 1], per, max_depth);
    }
    return total;
}

/// 15-point Gauss-Legendre on [lo, hi]; exact for polynomials up to degree 29.
template <class F>
double gauss_legendre_15(const F& f, double lo, double hi) {
    static const double xs[8] = {0.0,
                                 0.2011940939974345223006283,
                                 0.3941513470775633698972074,
                                 0.5709721726085388475372267,
                                 0.7244177313601700474161861,
                                 0.8482065834104272162006483,
                                 0.9372733924007059043077589,
                                 0.9879925180204854284895657};
    static const double ws[8] = {0.2025782419255612728806202,
                                 0.1984314853271115764561183,
                                 0.1861610000155622110268006,
                                 0.1662692058169939335532009,
                                 0.1395706779261543144478048,
                                 0.1071592204671719350118695,
                                 0.0703660474881081247092674,
                                 0.0307532419961172683546284};
    const double c = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    double acc = ws[0] * f(c);
    for (int k = 1; k < 8; ++k) {
        acc += ws[k] * (f(c - h * xs[k]) + f(c + h * xs[k]));
    }
    return acc * h;
}

/// Real roots of a*x^3 + b*x^2 + c*x + d = 0 (degenerates handled), ascending.
inline std::vector<double> solve_cubic_real(double a, double b, double c,
                                            double d) {
    std::vector<double> roots;
    const double eps = 1e-14;
    if (std::abs(a) < eps * (std::abs(b) + std::abs(c) + std::abs(d) + 1.0)) {
        // quadratic b x^2 + c x + d
        if (std::abs(b) < eps * (std::abs(c) + std::abs(d) + 1.0)) {
            if (std::abs(c) > 0.0) roots.push_back(-d / c);
            return roots;
        }
        const double disc = c * c - 4.0 * b * d;
        if (disc < 0.0) return roots;
        const double sq = std::sqrt(disc);
        // numerically stable pair
        const double q = -0.5 * (c + (c >= 0.0 ? sq : -sq));
        double r1 = q / b;
        double r2 = (std::abs(q) > 0.0) ? d / q : r1;
        if (r1 > r2) std::swap(r1, r2);
        roots.push_back(r1);
        if (r2 != r1) roots.push_back(r2);
        return roots;
    }
    // depressed cubic t^3 + p t + q with x = t - b/(3a)
    const double binv = 1.0 / a;
    const double B = b * binv, C = c * binv, D = d * binv;
    const double shift = B / 3.0;
    const double p = C - B * B / 3.0;
    const double q = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        const double u = std::cbrt(-q / 2.0 + sq);
        const double v = std::cbrt(-q / 2.0 - sq);
        roots.push_back(u + v - shift);
    } else {
        // three real roots (trigonometric form)
        const double r = std::sqrt(-p * p * p / 27.0);
        const double phi = std::acos(std::clamp(-q / (2.0 * r), -1.0, 1.0));
        const double m = 2.0 * std::cbrt(r);
        for (int k = 0; k < 3; ++k) {
            roots.push_back(m * std::cos((phi + 2.0 * M_PI * k) / 3.0) - shift);
        }
        std::sort(roots.begin(), roots.end());
    }
    // one Newton polish pass per root
    for (double& x : roots) {
        for (int it = 0; it < 3; ++it) {
            const double fx = ((a * x + b) * x + c) * x + d;
            const double dfx = (3.0 * a * x + 2.0 * b) * x + c;
            if (std::abs(dfx) < 1e-300) break;
            x -= fx / dfx;
        }
    }
    return roots;
}

}  // namespace mtbounds
