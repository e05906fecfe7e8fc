#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "fraclab/grid.hpp"

namespace fraclab {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;     // achieved error estimate
    int panels = 0;
    bool converged = true;
};

namespace detail {

// Gauss 7 / Kronrod 15 node pair on [-1, 1]; the classical published values.
inline constexpr double kGK15Nodes[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769, -0.741531185599394,
    -0.586087235467691, -0.405845151377397, -0.207784955007898, 0.0,
    0.207784955007898,  0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};
inline constexpr double kK15Weights[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
inline constexpr double kG7Weights[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
    0.381830050505119, 0.279705391489277, 0.129484966168870};

template <typename Fn>
void gk15_panel(Fn&& f, double a, double b, double& value, double& error, double& resabs) {
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    double k = 0.0, g = 0.0, rabs = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double fx = f(c + hw * kGK15Nodes[i]);
        k += kK15Weights[i] * fx;
        rabs += kK15Weights[i] * std::abs(fx);
        if (i % 2 == 1) g += kG7Weights[i / 2] * fx;
    }
    value = k * hw;
    resabs = rabs * hw;
    // QUADPACK-style sharpened difference estimate.
    const double diff = std::abs(k - g) * hw;
    error = diff;
    if (rabs > 0.0 && diff > 0.0)
        error = resabs * std::min(1.0, std::pow(200.0 * diff / resabs, 1.5));
}

}  // namespace detail

/**
 * Globally adaptive Gauss-Kronrod quadrature on [a, b]. The worst panel
 * (largest error estimate) is bisected until the summed estimate meets
 * max(abs_tol, rel_tol * |integral|) or the panel budget runs out.
 * `initial_panels` splits the interval up front so narrow interior features
 * are not missed by a single coarse pass.
 */
template <typename Fn>
QuadResult integrate_adaptive(Fn&& f, double a, double b, double abs_tol = 1e-12,
                              double rel_tol = 1e-10, int max_panels = 4000,
                              int initial_panels = 8) {
    struct Panel {
        double err, a, b, val;
        bool operator<(const Panel& o) const { return err < o.err; }
    };
    std::priority_queue<Panel> q;
    double total = 0.0, total_err = 0.0;
    int used = 0;
    const int init = std::max(1, initial_panels);
    for (int i = 0; i < init; ++i) {
        const double pa = a + (b - a) * i / init;
        const double pb = a + (b - a) * (i + 1) / init;
        double v, e, ra;
        detail::gk15_panel(f, pa, pb, v, e, ra);
        q.push({e, pa, pb, v});
        total += v;
        total_err += e;
        ++used;
    }
    while (total_err > std::max(abs_tol, rel_tol * std::abs(total)) && used < max_panels) {
        Panel worst = q.top();
        q.pop();
        total -= worst.val;
        total_err -= worst.err;
        const double mid = 0.5 * (worst.a + worst.b);
        for (int half = 0; half < 2; ++half) {
            const double pa = half == 0 ? worst.a : mid;
            const double pb = half == 0 ? mid : worst.b;
            double v, e, ra;
            detail::gk15_panel(f, pa, pb, v, e, ra);
            q.push({e, pa, pb, v});
            total += v;
            total_err += e;
        }
        ++used;
    }
    return {total, total_err, used, total_err <= std::max(abs_tol, rel_tol * std::abs(total))};
}

/**
 * Composite trapezoid with interval doubling: refines until two consecutive
 * refinements move the answer by less than the tolerance. Suited to smooth
 * integrands where evaluation reuse matters (each level reuses all previous
 * samples).
 */
template <typename Fn>
QuadResult integrate_doubling(Fn&& f, double a, double b, double tol, int min_intervals = 32,
                              int max_intervals = 1 << 20) {
    int m = std::max(2, min_intervals);
    double hstep = (b - a) / m;
    double sum = 0.5 * (f(a) + f(b));
    for (int i = 1; i < m; ++i) sum += f(a + i * hstep);
    double prev = sum * hstep;
    int used = m;
    while (m < max_intervals) {
        double add = 0.0;
        for (int i = 0; i < m; ++i) add += f(a + (i + 0.5) * hstep);
        m *= 2;
        hstep *= 0.5;
        sum += add;
        const double cur = sum * hstep;
        used = m;
        if (std::abs(cur - prev) < tol) return {cur, std::abs(cur - prev), used, true};
        prev = cur;
    }
    return {prev, tol, used, false};
}

}  // namespace fraclab
