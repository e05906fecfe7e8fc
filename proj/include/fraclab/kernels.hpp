#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fraclab/grid.hpp"
#include "fraclab/quadrature.hpp"

namespace fraclab {

/** Heat kernel (4*pi*t)^{-dim/2} exp(-r^2/(4t)) for displacement magnitude r. */
inline double gaussian_kernel(double t, double displacement, int dim) {
    if (!(t > 0.0)) throw invalid_input("gaussian_kernel: t must be positive");
    if (dim != 1 && dim != 2) throw invalid_input("gaussian_kernel: dim must be 1 or 2");
    const double r2 = displacement * displacement;
    return std::pow(4.0 * M_PI * t, -0.5 * dim) * std::exp(-r2 / (4.0 * t));
}

namespace detail {

inline void check_stable_params(double mu, double t) {
    if (!(mu > 0.0 && mu < 1.0))
        throw invalid_input("subordinator density: mu must lie in (0,1)");
    if (!(t > 0.0)) throw invalid_input("subordinator density: t must be positive");
}

}  // namespace detail

/**
 * Density of the one-sided stable subordinator via the real-axis integral
 * obtained by collapsing the Bromwich contour onto the branch cut:
 *
 *   f(s) = (1/pi) * Int_0^inf exp(-s r - t cos(pi mu) r^mu)
 *                            * sin(t sin(pi mu) r^mu) dr.
 *
 * The envelope exp(-s r) bounds the tail, so truncation at r = 50/s loses
 * less than e^{-50} of the mass. Only safe for mu <= 1/2: beyond that
 * cos(pi mu) < 0 and the integrand grows exponentially before the e^{-sr}
 * factor wins, destroying the sign-alternating cancellation in doubles.
 */
inline double subordinator_density_contour(double mu, double t, double s) {
    detail::check_stable_params(mu, t);
    if (s <= 0.0) return 0.0;
    const double cpm = std::cos(M_PI * mu);
    const double spm = std::sin(M_PI * mu);
    const double upper = 50.0 / s;
    auto integrand = [&](double r) {
        if (r <= 0.0) return 0.0;
        const double phase = t * spm * std::pow(r, mu);
        const double expo = -s * r - t * cpm * std::pow(r, mu);
        if (expo < -745.0) return 0.0;
        return std::exp(expo) * std::sin(phase);
    };
    // seed the adaptive pass with a few panels per oscillation of the phase
    const double cycles = t * spm * std::pow(upper, mu) / (2.0 * M_PI);
    const int initial = std::clamp(static_cast<int>(4.0 * cycles) + 1, 16, 64);
    const QuadResult q =
        integrate_adaptive(integrand, 0.0, upper, 1e-280, 1e-9, 4000, initial);
    return q.value / M_PI;
}

namespace detail {

// log of Kanter's angular function a(phi) on (0, pi); strictly increasing
// from a(0+) = mu^{mu/(1-mu)} (1-mu) to +infinity at pi.
inline double stable_angular_log_a(double mu, double phi) {
    return (mu * std::log(std::sin(mu * phi)) +
            (1.0 - mu) * std::log(std::sin((1.0 - mu) * phi)) -
            std::log(std::sin(phi))) /
           (1.0 - mu);
}

// Convergent series for the standardized one-sided stable density,
//   g(x) = (1/pi) sum_{j>=1} (-1)^{j+1} Gamma(j mu + 1)/j! sin(pi j mu) x^{-j mu - 1}.
// The ratio of consecutive terms shrinks like (j mu)^mu x^{-mu}/(j+1), so the
// series converges for every x > 0 but is only cancellation-safe for x large;
// callers gate it on the tail region. Returns -1 when 80 terms do not settle.
inline double stable_density_series(double mu, double x) {
    double sum = 0.0, log_fact = 0.0;
    for (int j = 1; j <= 80; ++j) {
        log_fact += std::log(static_cast<double>(j));
        const double log_mag =
            std::lgamma(j * mu + 1.0) - log_fact - (j * mu + 1.0) * std::log(x);
        const double term = (j % 2 == 1 ? 1.0 : -1.0) * std::exp(log_mag) *
                            std::sin(M_PI * j * mu);
        sum += term;
        if (std::exp(log_mag) < 1e-14 * std::abs(sum)) return sum / M_PI;
    }
    return -1.0;
}

}  // namespace detail

/**
 * The same density through the angular (Kanter) representation of the
 * standardized law g(x) with f_{t,mu}(s) = t^{-1/mu} g(s t^{-1/mu}):
 *
 *   g(x) = (mu/(1-mu)) x^{-1/(1-mu)} (1/pi) Int_0^pi a(phi) e^{-z a(phi)} dphi,
 *   z    = x^{-mu/(1-mu)},
 *   a    = sin(mu phi)^{mu/(1-mu)} sin((1-mu) phi) / sin(phi)^{1/(1-mu)}.
 *
 * The integrand is nonnegative and bounded, so no cancellation occurs at any
 * mu; this is the route of choice for mu > 1/2 and for the deep left tail,
 * where the contour form is numerically hopeless. In the right tail (small z)
 * the integrand collapses into a boundary layer of width ~ (z/40)^{1-mu} at
 * phi = pi, so that regime is served by the convergent series instead; for
 * large z the integration interval is truncated where e^{-z a} underflows.
 */
inline double subordinator_density_angular(double mu, double t, double s) {
    detail::check_stable_params(mu, t);
    if (s <= 0.0) return 0.0;
    const double tinv = std::pow(t, -1.0 / mu);
    const double x = s * tinv;
    const double q = mu / (1.0 - mu);
    const double z = std::pow(x, -q);
    const double a0 = std::pow(mu, q) * (1.0 - mu);  // limit of a(phi) at phi=0
    if (z * a0 > 745.0) return 0.0;                  // left wall: density underflows

    if (z < 0.2) {
        const double series = detail::stable_density_series(mu, x);
        if (series >= 0.0) return tinv * series;
        // fall through to the integral if the series did not settle
    }

    auto integrand = [&](double phi) {
        double ln_a;
        if (phi <= 0.0) {
            ln_a = std::log(a0);
        } else if (phi >= M_PI) {
            return 0.0;  // a blows up, e^{-z a} wins
        } else {
            ln_a = detail::stable_angular_log_a(mu, phi);
        }
        if (std::log(z) + ln_a > 710.0) return 0.0;  // z*a overflows => e^{-za} = 0
        const double a = std::exp(ln_a);
        const double za = z * a;
        if (za > 745.0) return 0.0;
        return a * std::exp(-za);
    };
    // truncate where z a(phi) = 750: beyond it the integrand is identically 0
    // in doubles. a is monotone, so a bisection suffices.
    double lo = 0.0, hi = M_PI;
    const double target = std::log(750.0 / z);
    for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (detail::stable_angular_log_a(mu, mid) < target ? lo : hi) = mid;
    }
    const double phi_cut = hi;
    const QuadResult qr =
        integrate_adaptive(integrand, 0.0, phi_cut, 1e-280, 1e-10, 3000, 24);
    const double g = q * std::pow(x, -1.0 / (1.0 - mu)) * qr.value / M_PI;
    return tinv * g;
}

/**
 * Density f_{t,mu}(s) of the stable subordinator: the law whose Laplace
 * transform is exp(-t z^mu), the weight that synthesizes the fractional
 * semigroup from the heat semigroup. Dispatches between the two
 * representations above and clamps sub-1e-9 quadrature noise so that the
 * (provable) nonnegativity survives into downstream assertions.
 */
inline double subordinator_density(double mu, double t, double s) {
    detail::check_stable_params(mu, t);
    if (s <= 0.0) return 0.0;
    const double bulk = std::pow(t, 1.0 / mu);
    double v;
    if (mu <= 0.5 && s >= 0.01 * bulk)
        v = subordinator_density_contour(mu, t, s);
    else
        v = subordinator_density_angular(mu, t, s);
    if (v < 0.0) {
        const double scale = 1.0 / bulk;  // height scale of the density
        if (v > -1e-9 * (1.0 + scale)) return 0.0;
        std::ostringstream msg;
        msg << "subordinator density significantly negative: f(" << s << ") = " << v
            << " at mu=" << mu << ", t=" << t;
        throw solver_failure(msg.str());
    }
    return v;
}

/** Callable bundle for a fixed (mu, t): the subordination weight in s. */
struct SubordinatorDensity {
    double mu;
    double t;
    double operator()(double s) const { return subordinator_density(mu, t, s); }
};

/**
 * Fractional heat kernel by subordination,
 *   k_mu(t, r) = Int_0^inf f_{t,mu}(s) k_1(s, r) ds,
 * integrated in u = log s so one rule resolves both the essential decay of
 * f at s -> 0 and its s^{-1-mu} tail. Throws if the adaptive rule cannot
 * reach its tolerance, reporting what it did achieve.
 */
inline double fractional_kernel(double mu, double t, double displacement, int dim) {
    detail::check_stable_params(mu, t);
    if (dim != 1 && dim != 2) throw invalid_input("fractional_kernel: dim must be 1 or 2");
    const double r = std::abs(displacement);
    const double u0 = std::log(t) / mu;  // log of the bulk scale t^{1/mu}
    // Left cutoff: f_{t,mu} underflows once z*a0 > 745 with
    // z = (s t^{-1/mu})^{-mu/(1-mu)}; below that the integrand is flat zero.
    const double q = mu / (1.0 - mu);
    const double a0 = std::pow(mu, q) * (1.0 - mu);
    double u_lo = u0 + std::log(a0 / 745.0) / q - 5.0;
    if (r > 0.0) {
        const double gauss_cut = std::log(r * r / 2980.0);  // e^{-745} point
        u_lo = std::max(u_lo, gauss_cut - 2.0);
    }
    // Right cutoff: integrand decays like e^{-(mu + dim/2) u} past the larger
    // of the subordinator bulk and the Gaussian saddle at s ~ r^2/4.
    double u_hi = u0;
    if (r > 0.0) u_hi = std::max(u_hi, std::log(r * r / 4.0 + std::pow(t, 1.0 / mu)));
    u_hi += 40.0 / (mu + 0.5 * dim) + 5.0;
    auto integrand = [&](double u) {
        const double s = std::exp(u);
        const double f = subordinator_density(mu, t, s);
        if (f <= 0.0) return 0.0;
        return f * gaussian_kernel(s, r, dim) * s;  // ds = s du
    };
    const QuadResult qr =
        integrate_adaptive(integrand, u_lo, u_hi, 1e-280, 1e-8, 800, 32);
    if (!qr.converged) {
        std::ostringstream msg;
        msg << "fractional_kernel: subordination quadrature did not converge "
            << "(achieved error estimate " << qr.error << " on value " << qr.value
            << " after " << qr.panels << " panels; mu=" << mu << ", t=" << t
            << ", r=" << r << ")";
        throw solver_failure(msg.str());
    }
    return std::max(qr.value, 0.0);
}

/** Free kernel for any admissible exponent: Gaussian at mu = 1, subordinated below. */
inline double free_kernel(double mu, double t, double displacement, int dim) {
    if (mu == 1.0) return gaussian_kernel(t, displacement, dim);
    return fractional_kernel(mu, t, displacement, dim);
}

/** Smooth comparison profile (1+r^2)^{-(dim+2 mu)/2} for kernel tails. */
inline double comparison_profile_I(double mu, double r, int dim) {
    return std::pow(1.0 + r * r, -0.5 * (dim + 2.0 * mu));
}

/** Piecewise comparison profile min{1, r^{-(dim+2 mu)}}. */
inline double comparison_profile_H(double mu, double r, int dim) {
    if (std::abs(r) <= 1.0) return 1.0;
    return std::pow(std::abs(r), -(dim + 2.0 * mu));
}

/**
 * Self-similarity defect of the free kernel: k(t, r) collapses onto a single
 * profile under r -> t^{1/(2mu)} z, k -> t^{dim/(2mu)} k. Returns the largest
 * per-sample relative mismatch between the t1- and t2-rescalings over the
 * supplied profile coordinates z.
 */
inline double kernel_self_similarity_check(double mu, double t1, double t2,
                                           const std::vector<double>& samples,
                                           int dim = 1) {
    if (!(t1 > 0.0 && t2 > 0.0))
        throw invalid_input("kernel_self_similarity_check: times must be positive");
    double worst = 0.0;
    for (const double z : samples) {
        const double a =
            std::pow(t1, 0.5 * dim / mu) * free_kernel(mu, t1, std::pow(t1, 0.5 / mu) * z, dim);
        const double b =
            std::pow(t2, 0.5 * dim / mu) * free_kernel(mu, t2, std::pow(t2, 0.5 / mu) * z, dim);
        const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
        worst = std::max(worst, std::abs(a - b) / scale);
    }
    return worst;
}

}  // namespace fraclab
