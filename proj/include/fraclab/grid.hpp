#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fraclab {

// Error taxonomy. invalid_input covers contract violations (bad arguments,
// malformed configs) and maps to CLI exit code 2; solver_failure covers
// numerical breakdown (non-convergence, blow-up) and maps to exit code 3.
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct solver_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Point = std::array<double, 2>;  // second coordinate ignored when dim == 1

/**
 * Periodic box [-L/2, L/2)^dim sampled uniformly with n points per axis.
 *
 * Node layout is row-major: in 2-d the flat index is i = i0*n + i1 with
 * coordinates x_k = -L/2 + i_k*h; in 1-d simply x = -L/2 + i*h.
 * The discrete frequency set per axis is {2*pi*m/L : m = -n/2 .. n/2-1}.
 *
 * Grid is a small value type; copying is cheap and fields keep their own copy.
 */
struct Grid {
    int dim = 1;
    double extent = 1.0;  // box side L
    int n = 8;            // points per axis, even
    double h = 0.125;     // spacing L/n

    std::size_t size() const {
        std::size_t s = static_cast<std::size_t>(n);
        return dim == 2 ? s * s : s;
    }

    // Coordinate of the node with per-axis indices (i0, i1).
    Point node(std::size_t flat) const {
        if (dim == 1) return {-0.5 * extent + h * static_cast<double>(flat), 0.0};
        const std::size_t i0 = flat / static_cast<std::size_t>(n);
        const std::size_t i1 = flat % static_cast<std::size_t>(n);
        return {-0.5 * extent + h * static_cast<double>(i0),
                -0.5 * extent + h * static_cast<double>(i1)};
    }

    // Shortest signed representative of d modulo L, in [-L/2, L/2).
    double wrap(double d) const {
        double w = d - extent * std::round(d / extent);
        if (w >= 0.5 * extent) w -= extent;  // round-half-even edge
        return w;
    }

    // Periodic Euclidean distance between two points.
    double distance(const Point& a, const Point& b) const {
        const double d0 = wrap(a[0] - b[0]);
        if (dim == 1) return std::abs(d0);
        const double d1 = wrap(a[1] - b[1]);
        return std::hypot(d0, d1);
    }

    // Periodic Chebyshev (cube) distance.
    double distance_cube(const Point& a, const Point& b) const {
        const double d0 = std::abs(wrap(a[0] - b[0]));
        if (dim == 1) return d0;
        return std::max(d0, std::abs(wrap(a[1] - b[1])));
    }

    bool operator==(const Grid& o) const {
        return dim == o.dim && extent == o.extent && n == o.n;
    }
};

inline Grid make_grid(int dim, double extent, int points_per_axis) {
    if (dim != 1 && dim != 2)
        throw invalid_input("invalid-dimension: dim must be 1 or 2, got " + std::to_string(dim));
    if (points_per_axis < 8 || points_per_axis % 2 != 0)
        throw invalid_input("odd-n: points_per_axis must be even and >= 8, got " +
                            std::to_string(points_per_axis));
    if (!(extent > 0.0) || !std::isfinite(extent))
        throw invalid_input("non-positive extent: " + std::to_string(extent));
    Grid g;
    g.dim = dim;
    g.extent = extent;
    g.n = points_per_axis;
    g.h = extent / points_per_axis;
    return g;
}

/**
 * Real-valued samples on a Grid, row-major. Fields are plain values:
 * every operation returns a fresh Field and never mutates its inputs, so
 * concurrent read-only sharing is safe by construction.
 */
struct Field {
    Grid grid;
    std::vector<double> values;

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double min() const {
        double m = values.empty() ? 0.0 : values.front();
        for (double v : values) m = std::min(m, v);
        return m;
    }
    double max() const {
        double m = values.empty() ? 0.0 : values.front();
        for (double v : values) m = std::max(m, v);
        return m;
    }
    // Discrete integral h^dim * sum of values.
    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        const double cell = grid.dim == 2 ? grid.h * grid.h : grid.h;
        return s * cell;
    }
};

inline void check_finite(const Field& f, const char* what) {
    for (double v : f.values)
        if (!std::isfinite(v)) throw invalid_input(std::string("non-finite sample value in ") + what);
}

template <typename Fn>
Field field_from_fn(const Grid& grid, Fn&& f) {
    Field out{grid, std::vector<double>(grid.size())};
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = f(grid.node(i));
    check_finite(out, "field_from_fn");
    return out;
}

/**
 * Self-similar datum |x|^{-alpha} centered at the origin. The singular node
 * at x = 0 takes the value at distance h/2 instead, which keeps the field
 * finite while perturbing ball averages only at the smallest radius.
 */
inline Field power_law_field(const Grid& grid, double alpha) {
    if (!(alpha > 0.0)) throw invalid_input("power_law_field: alpha must be positive");
    const Point origin{0.0, 0.0};
    return field_from_fn(grid, [&](const Point& x) {
        const double r = grid.distance(x, origin);
        return std::pow(r > 0.0 ? r : 0.5 * grid.h, -alpha);
    });
}

// Indicator of the periodic Euclidean ball B(center, radius).
inline Field characteristic_ball(const Grid& grid, const Point& center, double radius) {
    if (!(radius > 0.0) || radius > 0.5 * grid.extent)
        throw invalid_input("characteristic_ball: radius must lie in (0, L/2]");
    Field out{grid, std::vector<double>(grid.size())};
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = grid.distance(grid.node(i), center) <= radius ? 1.0 : 0.0;
    return out;
}

/** Finite atomic measure supported on grid nodes. */
struct AtomicMeasure {
    Grid grid;
    std::vector<std::pair<std::size_t, double>> atoms;  // (node index, mass)

    double total_variation() const {
        double s = 0.0;
        for (const auto& [idx, mass] : atoms) s += std::abs(mass);
        return s;
    }
};

inline AtomicMeasure make_measure(const Grid& grid,
                                  std::vector<std::pair<std::size_t, double>> atoms) {
    for (const auto& [idx, mass] : atoms) {
        if (idx >= grid.size()) throw invalid_input("measure atom index out of range");
        if (!std::isfinite(mass)) throw invalid_input("non-finite atom mass");
    }
    return AtomicMeasure{grid, std::move(atoms)};
}

// Elementwise helpers used throughout the solvers.
inline Field operator+(const Field& a, const Field& b) {
    if (!(a.grid == b.grid)) throw invalid_input("field addition: grid mismatch");
    Field out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    return out;
}
inline Field operator-(const Field& a, const Field& b) {
    if (!(a.grid == b.grid)) throw invalid_input("field subtraction: grid mismatch");
    Field out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}
inline Field operator*(double c, const Field& a) {
    Field out = a;
    for (double& v : out.values) v *= c;
    return out;
}
inline Field abs(const Field& a) {
    Field out = a;
    for (double& v : out.values) v = std::abs(v);
    return out;
}

}  // namespace fraclab
