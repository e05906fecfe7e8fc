#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fraclab/grid.hpp"

namespace fraclab {

constexpr double kInfExponent = std::numeric_limits<double>::infinity();

/**
 * Exponent pair (p, ell) of a Morrey scale M^{p,ell}: the norm weights the
 * L^p average on a ball of radius R by R^{(ell-N)/p}. p = infinity collapses
 * the scale to the max norm whatever ell is. The derived quantities are the
 * scaling slope ell/p (decay exponents come in these units) and the
 * admissibility index kappa = ell/(2 mu p), which must stay below 1 for a
 * potential class to be subordinate to the fractional dissipation.
 */
struct MorreyParams {
    double p = 2.0;
    double ell = 1.0;

    bool is_sup() const { return std::isinf(p); }
    double slope() const { return is_sup() ? 0.0 : ell / p; }
    double kappa(double mu) const { return is_sup() ? 0.0 : ell / (2.0 * mu * p); }
    bool admissible(double mu) const { return kappa(mu) < 1.0; }
};

inline MorreyParams make_morrey_params(double p, double ell, int dim) {
    if (!(p >= 1.0)) throw invalid_input("morrey params: p must satisfy 1 <= p <= inf");
    if (!(ell > 0.0) || ell > double(dim))
        throw invalid_input("morrey params: ell must lie in (0, dim]");
    return MorreyParams{p, ell};
}

/**
 * The discrete stand-in for "sup over all centers and radii": every grid
 * node is a center, radii come from a finite sorted list, and balls are
 * either periodic Euclidean discs or periodic cubes (Chebyshev balls). In
 * 1-d the two shapes coincide. Windows always contain their center node, so
 * no ball is ever empty.
 */
struct BallFamily {
    enum class Shape { euclidean, cube };
    std::vector<double> radii;
    Shape shape = Shape::cube;
};

inline BallFamily make_ball_family(const Grid& g, std::vector<double> radii,
                                   BallFamily::Shape shape = BallFamily::Shape::cube) {
    if (radii.empty()) throw invalid_input("ball family: empty radii list");
    std::sort(radii.begin(), radii.end());
    if (radii.front() < g.h * (1.0 - 1e-12))
        throw invalid_input("ball family: radii must be >= the grid spacing");
    if (radii.back() > 0.5 * g.extent * (1.0 + 1e-12))
        throw invalid_input("ball family: radii must be <= L/2");
    return BallFamily{std::move(radii), shape};
}

/** Dyadic radii {h 2^j} up to L/2, with L/2 itself always included. */
inline BallFamily default_ball_family(const Grid& g,
                                      BallFamily::Shape shape = BallFamily::Shape::cube) {
    std::vector<double> radii;
    for (double r = g.h; r <= 0.5 * g.extent * (1.0 + 1e-12); r *= 2.0) radii.push_back(r);
    if (radii.empty() || radii.back() < 0.5 * g.extent * (1.0 - 1e-12))
        radii.push_back(0.5 * g.extent);
    return BallFamily{std::move(radii), shape};
}

namespace detail {

// Periodic summed-area table: prefix sums of the doubled array, so any
// wrapped window of length <= n is a contiguous range. Built once per field
// and queried per (center, radius) in O(1); read-only after construction.
struct PrefixTable {
    int dim;
    int n;
    std::vector<double> pre;  // 1-d: size 2n+1; 2-d: (2n+1)^2 row-major

    explicit PrefixTable(const Grid& g, const std::vector<double>& v) : dim(g.dim), n(g.n) {
        if (dim == 1) {
            pre.assign(2 * n + 1, 0.0);
            for (int i = 0; i < 2 * n; ++i) pre[i + 1] = pre[i] + v[std::size_t(i % n)];
        } else {
            const int w = 2 * n + 1;
            pre.assign(std::size_t(w) * w, 0.0);
            for (int i = 0; i < 2 * n; ++i)
                for (int j = 0; j < 2 * n; ++j) {
                    const double val = v[std::size_t(i % n) * n + (j % n)];
                    pre[std::size_t(i + 1) * w + (j + 1)] = val +
                        pre[std::size_t(i) * w + (j + 1)] + pre[std::size_t(i + 1) * w + j] -
                        pre[std::size_t(i) * w + j];
                }
        }
    }

    // Sum over the cube window of half-width k nodes centered at (c0, c1).
    double window(int c0, int c1, int k) const {
        int len = 2 * k + 1;
        if (len > n) len = n;  // window covers the whole torus
        if (dim == 1) {
            const int a = ((c0 - k) % n + n) % n;
            return pre[std::size_t(a + len)] - pre[std::size_t(a)];
        }
        const int w = 2 * n + 1;
        const int a = ((c0 - k) % n + n) % n;
        const int b = ((c1 - k) % n + n) % n;
        return pre[std::size_t(a + len) * w + (b + len)] - pre[std::size_t(a) * w + (b + len)] -
               pre[std::size_t(a + len) * w + b] + pre[std::size_t(a) * w + b];
    }
};

// Offsets of grid nodes inside the Euclidean disc of radius R (2-d only).
// Offsets are clipped to one canonical residue per axis so that a radius of
// L/2 enumerates every node exactly once instead of aliasing the wrap.
inline std::vector<std::pair<int, int>> disc_offsets(const Grid& g, double radius) {
    const int k = static_cast<int>(std::floor(radius / g.h + 1e-9));
    const int lo = std::max(-k, -g.n / 2), hi = std::min(k, g.n / 2 - 1);
    std::vector<std::pair<int, int>> offs;
    for (int di = lo; di <= hi; ++di)
        for (int dj = lo; dj <= hi; ++dj)
            if (g.h * g.h * (double(di) * di + double(dj) * dj) <= radius * radius * (1.0 + 1e-12))
                offs.emplace_back(di, dj);
    return offs;
}

// Largest window sum over all centers for one radius, dispatching between
// the prefix-table fast path and the exact disc masks. Returns the argmax
// center through `best_center`.
inline double max_window_sum(const Grid& g, const std::vector<double>& v,
                             const PrefixTable& table, double radius, BallFamily::Shape shape,
                             std::size_t& best_center) {
    double best = -std::numeric_limits<double>::infinity();
    best_center = 0;
    if (g.dim == 1 || shape == BallFamily::Shape::cube) {
        // in 1-d the Euclidean ball IS the cube window
        const int k = static_cast<int>(std::floor(radius / g.h + 1e-9));
        if (g.dim == 1) {
            for (int c = 0; c < g.n; ++c) {
                const double s = table.window(c, 0, k);
                if (s > best) {
                    best = s;
                    best_center = std::size_t(c);
                }
            }
        } else {
            for (int c0 = 0; c0 < g.n; ++c0)
                for (int c1 = 0; c1 < g.n; ++c1) {
                    const double s = table.window(c0, c1, k);
                    if (s > best) {
                        best = s;
                        best_center = std::size_t(c0) * g.n + c1;
                    }
                }
        }
        return best;
    }
    // exact Euclidean discs: O(n^2 |disc|), the deliberate slow oracle
    if (g.n > 128)
        throw invalid_input(
            "euclidean ball shape is the exact slow path, limited to n <= 128 in 2-d; "
            "use the cube shape for larger grids");
    const auto offs = disc_offsets(g, radius);
    for (int c0 = 0; c0 < g.n; ++c0)
        for (int c1 = 0; c1 < g.n; ++c1) {
            double s = 0.0;
            for (const auto& [di, dj] : offs) {
                const int i = ((c0 + di) % g.n + g.n) % g.n;
                const int j = ((c1 + dj) % g.n + g.n) % g.n;
                s += v[std::size_t(i) * g.n + j];
            }
            if (s > best) {
                best = s;
                best_center = std::size_t(c0) * g.n + c1;
            }
        }
    return best;
}

}  // namespace detail

/** Norm value together with where the discrete sup was attained. */
struct NormReport {
    double value = 0.0;
    std::size_t argmax_center = 0;
    double argmax_radius = 0.0;
};

/**
 * Discrete Morrey norm: max over centers and family radii of
 * R^{(ell-N)/p} (h^dim sum_{ball} |u|^p)^{1/p}; the max norm when p = inf.
 */
inline NormReport morrey_norm_report(const Field& u, const MorreyParams& par,
                                     const BallFamily& family) {
    if (family.radii.empty()) throw invalid_input("morrey_norm: empty radii list");
    const Grid& g = u.grid;
    if (par.is_sup()) {
        NormReport rep;
        for (std::size_t i = 0; i < u.values.size(); ++i)
            if (std::abs(u.values[i]) > rep.value) {
                rep.value = std::abs(u.values[i]);
                rep.argmax_center = i;
            }
        rep.argmax_radius = family.radii.front();
        return rep;
    }
    std::vector<double> powed(u.values.size());
    for (std::size_t i = 0; i < powed.size(); ++i)
        powed[i] = std::pow(std::abs(u.values[i]), par.p);
    const detail::PrefixTable table(g, powed);
    const double cell = g.dim == 2 ? g.h * g.h : g.h;
    NormReport rep;
    for (const double R : family.radii) {
        std::size_t center = 0;
        const double s = detail::max_window_sum(g, powed, table, R, family.shape, center);
        const double norm =
            std::pow(R, (par.ell - g.dim) / par.p) * std::pow(cell * s, 1.0 / par.p);
        if (norm > rep.value) {
            rep.value = norm;
            rep.argmax_center = center;
            rep.argmax_radius = R;
        }
    }
    return rep;
}

inline double morrey_norm(const Field& u, const MorreyParams& par, const BallFamily& family) {
    return morrey_norm_report(u, par, family).value;
}

/** Morrey norm of a measure: max over centers/radii of R^{ell-N} |mu|(ball). */
inline NormReport morrey_measure_norm_report(const AtomicMeasure& m, double ell,
                                             const BallFamily& family) {
    if (family.radii.empty()) throw invalid_input("morrey_measure_norm: empty radii list");
    const Grid& g = m.grid;
    std::vector<double> masses(g.size(), 0.0);
    for (const auto& [idx, mass] : m.atoms) masses[idx] += std::abs(mass);
    const detail::PrefixTable table(g, masses);
    NormReport rep;
    for (const double R : family.radii) {
        std::size_t center = 0;
        const double s = detail::max_window_sum(g, masses, table, R, family.shape, center);
        const double norm = std::pow(R, ell - g.dim) * s;
        if (norm > rep.value) {
            rep.value = norm;
            rep.argmax_center = center;
            rep.argmax_radius = R;
        }
    }
    return rep;
}

inline double morrey_measure_norm(const AtomicMeasure& m, double ell, const BallFamily& family) {
    return morrey_measure_norm_report(m, ell, family).value;
}

/**
 * Uniform L^p norm: max over centers of the L^p norm on the Euclidean ball
 * of radius 1 (the translation-invariant gauge of the uniform spaces).
 */
inline double uniform_norm(const Field& u, double p) {
    const Grid& g = u.grid;
    if (g.extent < 2.0) throw invalid_input("uniform_norm: box must satisfy L >= 2");
    if (std::isinf(p)) return u.max_abs();
    if (!(p >= 1.0)) throw invalid_input("uniform_norm: p must satisfy 1 <= p <= inf");
    std::vector<double> powed(u.values.size());
    for (std::size_t i = 0; i < powed.size(); ++i)
        powed[i] = std::pow(std::abs(u.values[i]), p);
    const double cell = g.dim == 2 ? g.h * g.h : g.h;
    double best = 0.0;
    if (g.dim == 1) {
        const detail::PrefixTable table(g, powed);
        const int k = static_cast<int>(std::floor(1.0 / g.h + 1e-9));
        for (int c = 0; c < g.n; ++c) best = std::max(best, table.window(c, 0, k));
    } else {
        const auto offs = detail::disc_offsets(g, 1.0);
        for (int c0 = 0; c0 < g.n; ++c0)
            for (int c1 = 0; c1 < g.n; ++c1) {
                double s = 0.0;
                for (const auto& [di, dj] : offs) {
                    const int i = ((c0 + di) % g.n + g.n) % g.n;
                    const int j = ((c1 + dj) % g.n + g.n) % g.n;
                    s += powed[std::size_t(i) * g.n + j];
                }
                best = std::max(best, s);
            }
    }
    return std::pow(cell * best, 1.0 / p);
}

/** Ratio report for the scale embedding M^{q,s} into M^{p,ell}. */
struct EmbeddingReport {
    double ratio = 0.0;
    double norm_target = 0.0;  // ||u|| in M^{p,ell}
    double norm_source = 0.0;  // ||u|| in M^{q,s}
};

inline EmbeddingReport embedding_check(const Field& u, const MorreyParams& source,
                                       const MorreyParams& target, const BallFamily& family) {
    // hypothesis: target p <= source q and equal slopes ell/p = s/q
    const bool p_ok = target.p <= source.p || source.is_sup();
    if (!p_ok || std::abs(target.slope() - source.slope()) > 1e-12)
        throw invalid_input("embedding_check: needs p <= q and ell/p = s/q");
    EmbeddingReport rep;
    rep.norm_source = morrey_norm(u, source, family);
    rep.norm_target = morrey_norm(u, target, family);
    rep.ratio = rep.norm_source == 0.0 ? 0.0 : rep.norm_target / rep.norm_source;
    return rep;
}

/** Holder-type exponent bookkeeping for pointwise products V*u. */
struct ProductParams {
    double z = 1.0;
    double nu = 1.0;
};

inline ProductParams morrey_product_params(double p, double ell, double p1, double ell1) {
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    const double inv_p1 = std::isinf(p1) ? 0.0 : 1.0 / p1;
    if (inv_p + inv_p1 > 1.0 + 1e-15)
        throw invalid_input("morrey_product_params: 1/p + 1/p1 exceeds 1");
    const double inv_z = inv_p + inv_p1;
    ProductParams out;
    out.z = inv_z == 0.0 ? kInfExponent : 1.0 / inv_z;
    const double slope = (std::isinf(p) ? 0.0 : ell / p) + (std::isinf(p1) ? 0.0 : ell1 / p1);
    out.nu = std::isinf(out.z) ? 0.0 : slope * out.z;
    return out;
}

/** Field shifted by whole nodes (periodic), values[i] = u[i - shift]. */
inline Field translate(const Field& u, int shift0, int shift1 = 0) {
    const Grid& g = u.grid;
    Field out{g, std::vector<double>(g.size())};
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i)
            out.values[std::size_t(i)] = u.values[std::size_t(((i - shift0) % g.n + g.n) % g.n)];
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                const int si = ((i - shift0) % g.n + g.n) % g.n;
                const int sj = ((j - shift1) % g.n + g.n) % g.n;
                out.values[std::size_t(i) * g.n + j] = u.values[std::size_t(si) * g.n + sj];
            }
    }
    return out;
}

/** Norm of tau_y u - u for a lattice shift y: the translation modulus. */
inline double translation_modulus(const Field& u, int shift0, int shift1,
                                  const MorreyParams& par, const BallFamily& family) {
    return morrey_norm(translate(u, shift0, shift1) - u, par, family);
}

}  // namespace fraclab
