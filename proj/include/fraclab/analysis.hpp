#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fraclab/fitting.hpp"
#include "fraclab/freeprop.hpp"
#include "fraclab/grid.hpp"
#include "fraclab/kernels.hpp"
#include "fraclab/morrey.hpp"
#include "fraclab/perturbed.hpp"

namespace fraclab {

/** A sequence of (time, norm) samples along one evolution. */
using NormTrajectory = std::vector<std::pair<double, double>>;

// ---------------------------------------------------------------------------
// Negativity-on-every-ball window test
// ---------------------------------------------------------------------------

/**
 * Result of the sliding-window negativity test. beta(r) is the worst (largest)
 * signed integral of V over a ball of radius r, maximized over every grid
 * center. The test holds when some tested radius keeps even that worst window
 * strictly negative; (witness_c, witness_radius) then record the smallest such
 * radius with beta(r*) <= -witness_c < 0.
 */
struct ABReport {
    std::vector<double> radii;
    std::vector<double> beta;
    bool holds = false;
    double witness_c = 0.0;
    double witness_radius = 0.0;
};

inline ABReport ab_check(const Field& V, const std::vector<double>& radii,
                         BallFamily::Shape shape = BallFamily::Shape::cube) {
    check_finite(V, "ab_check potential");
    if (radii.empty()) throw invalid_input("ab_check: empty radius list");
    const Grid& g = V.grid;
    for (double r : radii)
        if (!(r > 0.0 && r <= g.extent / 2.0 + 1e-12))
            throw invalid_input("ab_check: radii must lie in (0, L/2]");
    const double cell = g.dim == 2 ? g.h * g.h : g.h;
    const detail::PrefixTable table(g, V.values);

    ABReport rep;
    rep.radii = radii;
    rep.beta.resize(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        std::size_t center = 0;
        rep.beta[i] = cell * detail::max_window_sum(g, V.values, table, radii[i], shape, center);
    }
    // witness: the smallest tested radius whose worst window is already negative
    std::vector<std::size_t> order(radii.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
    for (std::size_t i : order)
        if (rep.beta[i] < -1e-12) {
            rep.holds = true;
            rep.witness_c = -rep.beta[i];
            rep.witness_radius = radii[i];
            break;
        }
    return rep;
}

// ---------------------------------------------------------------------------
// Absorption profile and decay certificates
// ---------------------------------------------------------------------------

namespace detail {

inline void check_certificate_potential(const Field& V) {
    check_finite(V, "certificate potential");
    if (V.max() > 0.0)
        throw invalid_input("certificate: potential must be nonpositive");
    if (!(V.max_abs() > 0.0))
        throw invalid_input("certificate: potential must not vanish identically");
}

}  // namespace detail

/**
 * Absorption profile Psi(x) = Int_0^{theta/||V||_inf} S_mu(s)|V|(x) ds by
 * composite Simpson quadrature, starting at 32 intervals and doubling until
 * the profile moves by less than 1e-6 in sup norm. The averaging identity
 * behind the certificate guarantees 0 < Psi <= theta pointwise; both ends are
 * asserted after the quadrature settles.
 */
inline Field psi_field(double mu, const Field& V, double theta) {
    if (!(mu > 0.0 && mu <= 1.0)) throw invalid_input("psi_field: mu must lie in (0, 1]");
    if (!(theta > 0.0 && theta < 1.0)) throw invalid_input("psi_field: theta must lie in (0, 1)");
    detail::check_certificate_potential(V);
    const double T = theta / V.max_abs();
    const FreePropagator prop = make_free_propagator(V.grid, mu);
    const Field absV = abs(V);

    auto simpson = [&](int m) {
        const double dt = T / m;
        Field acc{V.grid, std::vector<double>(V.grid.size(), 0.0)};
        for (int k = 0; k <= m; ++k) {
            const double w = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            const Field node = apply_free(prop, absV, k * dt);
            for (std::size_t i = 0; i < acc.values.size(); ++i)
                acc.values[i] += w * node.values[i];
        }
        for (double& v : acc.values) v *= dt / 3.0;
        return acc;
    };

    Field psi = simpson(32);
    for (int m = 64; m <= 1024; m *= 2) {
        const Field next = simpson(m);
        double change = 0.0;
        for (std::size_t i = 0; i < psi.values.size(); ++i)
            change = std::max(change, std::abs(next.values[i] - psi.values[i]));
        psi = next;
        if (change < 1e-6) break;
        if (m == 1024)
            throw solver_failure("psi_field: quadrature did not settle below 1e-6 at 1024 intervals");
    }
    if (!(psi.min() > 0.0))
        throw solver_failure("psi_field: absorption profile lost strict positivity");
    if (psi.max() > theta + 1e-8)
        throw solver_failure("psi_field: absorption profile exceeded theta, quadrature unsound");
    return psi;
}

/** Certified rate factor c(theta) = -(1/theta) ln(1 - (1-theta) inf Psi). */
inline double certificate_rate(double theta, double inf_psi) {
    return -std::log1p(-(1.0 - theta) * inf_psi) / theta;
}

/** Certified prefactor C0(theta) = 1 / (1 - (1-theta) inf Psi). */
inline double certificate_prefactor(double theta, double inf_psi) {
    return 1.0 / (1.0 - (1.0 - theta) * inf_psi);
}

/**
 * Exponential-decay certificate: the bound ||S_{mu,V}(t)||_{L^inf -> L^inf}
 * <= C0 e^{-omega0 t} with explicit constants from the absorption profile.
 */
struct DecayCertificate {
    double theta = 0.0;
    Field psi;
    double inf_psi = 0.0;
    double c_rate = 0.0;
    double C0 = 0.0;
    double omega0 = 0.0;
};

inline std::vector<double> default_theta_grid() {
    // the optimum in theta is interior and flat; 19 points resolve it
    std::vector<double> grid;
    for (int k = 1; k <= 19; ++k) grid.push_back(0.05 * k);
    return grid;
}

inline DecayCertificate decay_certificate(double mu, const Field& V,
                                          const std::vector<double>& theta_grid =
                                              default_theta_grid()) {
    if (theta_grid.empty()) throw invalid_input("decay_certificate: empty theta grid");
    detail::check_certificate_potential(V);
    const double vsup = V.max_abs();
    DecayCertificate best;
    bool found = false;
    for (double theta : theta_grid) {
        Field psi = psi_field(mu, V, theta);
        const double inf_psi = psi.min();
        if (!(inf_psi > 0.0)) continue;
        DecayCertificate cand;
        cand.theta = theta;
        cand.psi = std::move(psi);
        cand.inf_psi = inf_psi;
        cand.c_rate = certificate_rate(theta, inf_psi);
        cand.C0 = certificate_prefactor(theta, inf_psi);
        cand.omega0 = cand.c_rate * vsup;
        if (!found || cand.omega0 > best.omega0) best = std::move(cand);
        found = true;
    }
    if (!found)
        throw solver_failure(
            "decay_certificate: inf Psi <= 0 on the whole theta grid; "
            "the window negativity test likely fails for this potential");
    return best;
}

// ---------------------------------------------------------------------------
// Kernel floor for the absorption profile
// ---------------------------------------------------------------------------

/**
 * Pointwise kernel floor g_mu(s): a lower bound for the transition kernel at
 * displacements up to R. The heat case is the exact on-diagonal-at-distance-R
 * Gaussian; the stable case has the scaling shape s/(s^{1/mu}+R^2)^{(N+2mu)/2}
 * whose constant is not pinned by theory and is calibrated once against the
 * quadrature kernel (calibrate_gmu_constant below).
 */
inline double gmu_floor(double mu, double s, double R, int dim, double c_stable) {
    if (s <= 0.0) return 0.0;
    if (mu == 1.0)
        return std::exp(-R * R / (4.0 * s)) / std::pow(4.0 * M_PI * s, 0.5 * dim);
    return c_stable * s / std::pow(std::pow(s, 1.0 / mu) + R * R, 0.5 * (dim + 2.0 * mu));
}

/**
 * Largest constant making gmu_floor a true lower bound for the subordination
 * kernel over displacements |x| <= R and a time range bracketing the
 * integration window [0, smax]: min over samples of k_mu(s,r) / shape(s).
 */
inline double calibrate_gmu_constant(double mu, double R, int dim, double smax) {
    if (!(mu > 0.0 && mu < 1.0))
        throw invalid_input("calibrate_gmu_constant: only the stable range mu < 1 needs a constant");
    double c = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 8; ++i) {
        const double s = smax * i / 8.0;
        const double shape =
            s / std::pow(std::pow(s, 1.0 / mu) + R * R, 0.5 * (dim + 2.0 * mu));
        for (int j = 0; j <= 4; ++j)
            c = std::min(c, fractional_kernel(mu, s, R * j / 4.0, dim) / shape);
    }
    return c;
}

/**
 * Lower bound for min Psi from the kernel floor: C_V * Int_0^{theta/||V||} g_mu,
 * where C_V is the smallest mass of |V| on any ball of radius R. Window sums
 * use the interval itself in 1-d and, in 2-d, the exact disc masks up to
 * n = 128 or an inscribed cube beyond (never overstating the ball mass).
 */
inline double psi_lower_bound(double mu, const Field& V, double theta, double R,
                              double c_stable = 0.0) {
    detail::check_certificate_potential(V);
    if (!(R > 0.0 && R <= V.grid.extent / 2.0))
        throw invalid_input("psi_lower_bound: radius must lie in (0, L/2]");
    const Grid& g = V.grid;
    const Field absV = abs(V);
    const double cell = g.dim == 2 ? g.h * g.h : g.h;

    std::vector<double> negated(absV.values.size());
    for (std::size_t i = 0; i < negated.size(); ++i) negated[i] = -absV.values[i];
    const detail::PrefixTable table(g, negated);
    std::size_t center = 0;
    double cv;
    if (g.dim == 1) {
        cv = -cell * detail::max_window_sum(g, negated, table, R,
                                            BallFamily::Shape::cube, center);
    } else if (g.n <= 128) {
        cv = -cell * detail::max_window_sum(g, negated, table, R,
                                            BallFamily::Shape::euclidean, center);
    } else {
        cv = -cell * detail::max_window_sum(g, negated, table, R / std::sqrt(2.0),
                                            BallFamily::Shape::cube, center);
    }

    const double T = theta / V.max_abs();
    const int m = 512;
    double integral = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double w = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        integral += w * gmu_floor(mu, T * k / m, R, g.dim, c_stable);
    }
    integral *= T / m / 3.0;
    return cv * integral;
}

// ---------------------------------------------------------------------------
// Operator norm probes and exponential-type estimation
// ---------------------------------------------------------------------------

/**
 * ||S_{mu,V}(t)||_{L^inf -> L^inf} for nonpositive bounded V: positivity of
 * the semigroup turns the operator norm into the evolution of the constant
 * one, whose maximum is returned.
 */
inline double operator_norm_Linfty(double mu, const Field& V, double t, double dt = 1e-2) {
    check_finite(V, "operator norm potential");
    if (V.max() > 0.0)
        throw invalid_input("operator_norm_Linfty: potential must be nonpositive");
    if (t < 0.0) throw invalid_input("operator_norm_Linfty: negative time");
    if (t == 0.0) return 1.0;
    const Potential pot = make_potential(V, SignHint::nonpositive);
    const PerturbedPropagator prop = make_perturbed_propagator(
        V.grid, mu, {pot}, PerturbedPropagator::Scheme::strang, std::min(dt, t));
    const Field ones{V.grid, std::vector<double>(V.grid.size(), 1.0)};
    const Trajectory traj = evolve(prop, ones, t, 1 << 30);
    return traj.back().second.max();
}

/**
 * Fitted exponential type of a norm trajectory. The rate is the slope of
 * -log(norm) against t over the trailing half of the window, because the
 * exponential type is an asymptotic quantity and early transients bias short
 * fits. The fit is asserted reliable only when the worst pointwise deviation
 * stays within 5% of the total drop |omega_hat| * window; rates below the
 * resolution floor are reported as zero in omega_effective.
 */
struct DecayReport {
    static constexpr double rate_floor = 0.02;

    std::string label;
    std::vector<double> ts;
    std::vector<double> log_norms;
    std::size_t fit_begin = 0;
    double omega_hat = 0.0;
    double omega_effective = 0.0;
    double residual = 0.0;
    bool reliable = false;
};

inline DecayReport estimate_exponential_type(const NormTrajectory& samples,
                                             std::string label = "") {
    if (samples.size() < 8)
        throw invalid_input("estimate_exponential_type: need at least 8 samples");
    DecayReport rep;
    rep.label = std::move(label);
    for (const auto& [t, norm] : samples) {
        if (!(norm > 0.0))
            throw invalid_input("estimate_exponential_type: nonpositive norm sample");
        rep.ts.push_back(t);
        rep.log_norms.push_back(std::log(norm));
    }
    rep.fit_begin = samples.size() / 2;
    std::vector<double> xs(rep.ts.begin() + std::ptrdiff_t(rep.fit_begin), rep.ts.end());
    std::vector<double> ys;
    for (std::size_t i = rep.fit_begin; i < rep.log_norms.size(); ++i)
        ys.push_back(-rep.log_norms[i]);
    const LineFit fit = fit_line(xs, ys);
    rep.omega_hat = fit.slope;
    for (std::size_t i = 0; i < xs.size(); ++i)
        rep.residual = std::max(rep.residual,
                                std::abs(ys[i] - (fit.slope * xs[i] + fit.intercept)));
    const double window = xs.back() - xs.front();
    rep.reliable = rep.residual <= std::max(0.05 * std::abs(rep.omega_hat) * window, 1e-9);
    rep.omega_effective = std::abs(rep.omega_hat) < rep.rate_floor ? 0.0 : rep.omega_hat;
    return rep;
}

/**
 * First time a trajectory decays to half its initial value, by linear
 * interpolation between the bracketing samples. Throws when the trajectory
 * never reaches half within the sampled window.
 */
inline double half_decay_time(const NormTrajectory& samples) {
    if (samples.size() < 2) throw invalid_input("half_decay_time: need at least 2 samples");
    const double target = 0.5 * samples.front().second;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const auto& [t1, n1] = samples[i];
        if (n1 <= target) {
            const auto& [t0, n0] = samples[i - 1];
            if (n0 == n1) return t1;
            return t0 + (t1 - t0) * (n0 - target) / (n0 - n1);
        }
    }
    throw solver_failure("half_decay_time: trajectory never decayed to half in the window");
}

// ---------------------------------------------------------------------------
// Two-sided rate comparison across norms
// ---------------------------------------------------------------------------

/**
 * Verdict of the two-sided rate comparison between the sup-norm exponential
 * type and the one measured in the (p, ell) scale: for mu = 1 the two must
 * agree, for mu < 1 the scale rate is pinched between omega_inf / vartheta
 * and (1 + ell/(2 p mu)) omega_inf with vartheta = 1 + N/(2 mu). The interval
 * [lower, upper] already includes the tolerance.
 */
struct SandwichVerdict {
    bool pass = false;
    double lower = 0.0;
    double upper = 0.0;
    double vartheta = 0.0;
    double tolerance = 0.0;
};

inline SandwichVerdict sandwich_check(double mu, double omega_inf, double omega_pl,
                                      double p, double ell, int dim) {
    if (!(mu > 0.0 && mu <= 1.0)) throw invalid_input("sandwich_check: mu must lie in (0, 1]");
    if (!(p >= 1.0)) throw invalid_input("sandwich_check: p must satisfy 1 <= p <= inf");
    if (!(ell > 0.0 && ell <= double(dim)))
        throw invalid_input("sandwich_check: ell must lie in (0, N]");
    if (!std::isfinite(omega_inf) || !std::isfinite(omega_pl))
        throw invalid_input("sandwich_check: rates must be finite");
    SandwichVerdict v;
    v.vartheta = 1.0 + dim / (2.0 * mu);
    if (omega_inf < DecayReport::rate_floor) {
        // no decay visible in sup norm: the dichotomy demands none in the scale either
        v.tolerance = DecayReport::rate_floor;
        v.lower = -v.tolerance;
        v.upper = v.tolerance;
        v.pass = std::abs(omega_pl) < v.tolerance;
        return v;
    }
    v.tolerance = 0.1 * omega_inf;
    if (mu == 1.0) {
        v.lower = omega_inf - v.tolerance;
        v.upper = omega_inf + v.tolerance;
    } else {
        const double stretch = std::isinf(p) ? 0.0 : ell / (2.0 * p * mu);
        v.lower = omega_inf / v.vartheta - v.tolerance;
        v.upper = (1.0 + stretch) * omega_inf + v.tolerance;
    }
    v.pass = omega_pl >= v.lower && omega_pl <= v.upper;
    return v;
}

// ---------------------------------------------------------------------------
// Variational bottom of the spectrum
// ---------------------------------------------------------------------------

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/**
 * Preconditioned conjugate gradients for the shifted operator. Returns the
 * iteration count; the caller chooses the preconditioner (identity is fine,
 * a spectral one cuts the mesh-dependent conditioning).
 */
template <typename ApplyFn, typename PrecFn>
int conjugate_gradient(ApplyFn&& A, PrecFn&& M, const std::vector<double>& b,
                       std::vector<double>& x, double rel_tol, int max_iters) {
    std::vector<double> r = b;
    const std::vector<double> ax = A(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= ax[i];
    std::vector<double> z = M(r);
    std::vector<double> p = z;
    double rz = dot(r, z);
    const double b_norm = std::sqrt(std::max(dot(b, b), 1e-300));
    for (int it = 0; it < max_iters; ++it) {
        if (std::sqrt(dot(r, r)) <= rel_tol * b_norm) return it;
        const std::vector<double> ap = A(p);
        const double alpha = rz / dot(p, ap);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = M(r);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
    }
    throw solver_failure("conjugate_gradient: no convergence within the iteration cap");
}

}  // namespace detail

/** Bottom of the spectrum of phi -> (-Laplace)^mu phi + |V| phi. */
struct RayleighReport {
    double omega2 = 0.0;
    Field minimizer;
    int iterations = 0;
    double residual = 0.0;
};

/**
 * Smallest eigenvalue of the (symmetric, nonnegative) Schroedinger form by
 * shifted inverse power iteration, matrix-free: the fractional Laplacian acts
 * through the Fourier multiplier, the inner solves run preconditioned CG with
 * the constant-coefficient part of the operator as the preconditioner.
 */
inline RayleighReport rayleigh_omega2(double mu, const Field& V) {
    if (!(mu > 0.0 && mu <= 1.0)) throw invalid_input("rayleigh_omega2: mu must lie in (0, 1]");
    check_finite(V, "rayleigh potential");
    if (V.max() > 0.0) throw invalid_input("rayleigh_omega2: potential must be nonpositive");
    const Grid& g = V.grid;
    const Field absV = abs(V);
    const double sigma = 0.1 * std::max(1.0, absV.max());
    const double vbar = absV.integral() / (g.dim == 2 ? g.extent * g.extent : g.extent);

    auto apply_A = [&](const std::vector<double>& x) {
        Field fx{g, x};
        Field out = apply_multiplier(fx, [mu](double xi2) { return std::pow(xi2, mu); });
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] += absV.values[i] * x[i];
        return out.values;
    };
    auto apply_shifted = [&](const std::vector<double>& x) {
        std::vector<double> out = apply_A(x);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * x[i];
        return out;
    };
    // preconditioner: exact inverse of the translation-invariant part
    auto precondition = [&](const std::vector<double>& r) {
        Field fr{g, r};
        Field out = apply_multiplier(fr, [&](double xi2) {
            return 1.0 / (std::pow(xi2, mu) + vbar + sigma);
        });
        return out.values;
    };

    std::vector<double> phi(g.size(), 1.0 / std::sqrt(double(g.size())));
    RayleighReport rep;
    for (int outer = 0; outer < 200; ++outer) {
        std::vector<double> y = phi;
        detail::conjugate_gradient(apply_shifted, precondition, phi, y, 1e-12,
                                   8 * int(g.size()));
        const double nrm = std::sqrt(detail::dot(y, y));
        if (!(nrm > 0.0)) throw solver_failure("rayleigh_omega2: iterate collapsed to zero");
        for (double& v : y) v /= nrm;
        const std::vector<double> ay = apply_A(y);
        const double rho = detail::dot(y, ay);
        double res = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = ay[i] - rho * y[i];
            res += d * d;
        }
        res = std::sqrt(res);
        phi = y;
        rep.iterations = outer + 1;
        rep.residual = res;
        rep.omega2 = rho;
        if (res <= 1e-8) {
            rep.minimizer = Field{g, phi};
            return rep;
        }
    }
    std::ostringstream msg;
    msg << "rayleigh_omega2: inverse iteration stagnated at residual " << rep.residual;
    throw solver_failure(msg.str());
}

// ---------------------------------------------------------------------------
// Growth bounds for positive parts
// ---------------------------------------------------------------------------

/**
 * The growth-bound shape a = c * sum_i ||(V^i)^+||^{1/(1-kappa_i)}. The
 * calibration constant c is an output of designated calibration runs (see
 * calibrate_growth_constant), never a theoretical input: only the scaling in
 * the potential strength carries meaning.
 */
struct GrowthBound {
    std::vector<double> kappas;
    std::vector<double> shape_terms;  // ||(V^i)^+||^{1/(1-kappa_i)}
    double calibration_c = 1.0;
    double bound = 0.0;
};

inline GrowthBound growth_bound(double mu, const std::vector<Potential>& potentials,
                                double calibration_c = 1.0) {
    if (potentials.empty() || potentials.size() > 2)
        throw invalid_input("growth_bound: expected one or two potentials");
    if (!(calibration_c > 0.0)) throw invalid_input("growth_bound: calibration constant must be positive");
    GrowthBound gb;
    gb.calibration_c = calibration_c;
    for (const Potential& pot : potentials) {
        if (!pot.admissible(mu))
            throw invalid_input("growth_bound: potential class not admissible (kappa >= 1)");
        const double kappa = pot.kappa(mu);
        gb.kappas.push_back(kappa);
        gb.shape_terms.push_back(pot.norm_pos == 0.0
                                     ? 0.0
                                     : std::pow(pot.norm_pos, 1.0 / (1.0 - kappa)));
    }
    for (double term : gb.shape_terms) gb.bound += term;
    gb.bound *= calibration_c;
    return gb;
}

/**
 * Smallest constant c with rate <= c * shape across calibration runs, given
 * (shape term, measured growth rate) pairs from a designated family.
 */
inline double calibrate_growth_constant(const std::vector<std::pair<double, double>>& runs) {
    double c = 0.0;
    bool any = false;
    for (const auto& [shape, rate] : runs) {
        if (!(shape > 0.0)) continue;
        c = std::max(c, rate / shape);
        any = true;
    }
    if (!any) throw invalid_input("calibrate_growth_constant: no run with a positive shape term");
    return c;
}

/**
 * Sup-norm trajectory report for the evolution of the constant one under a
 * bounded potential of either sign; the fitted omega_hat is negative for
 * growing evolutions, so -omega_hat estimates the growth rate.
 */
inline DecayReport linfty_rate_report(double mu, const Field& V, double t_final,
                                      double dt = 1e-2, int target_samples = 33) {
    check_finite(V, "rate potential");
    if (!(t_final > 0.0)) throw invalid_input("linfty_rate_report: need a positive window");
    const Potential pot = make_potential(V);
    const PerturbedPropagator prop = make_perturbed_propagator(
        V.grid, mu, {pot}, PerturbedPropagator::Scheme::strang, dt);
    const Field ones{V.grid, std::vector<double>(V.grid.size(), 1.0)};
    const long long nsteps = (long long)std::ceil(t_final / dt - 1e-9);
    const int stride = std::max(1, int(nsteps / std::max(1, target_samples - 1)));
    const Trajectory traj = evolve(prop, ones, t_final, stride);
    NormTrajectory norms;
    for (const auto& [t, u] : traj) norms.emplace_back(t, u.max_abs());
    return estimate_exponential_type(norms, "Linfty");
}

// ---------------------------------------------------------------------------
// Singular-kernel comparison envelopes
// ---------------------------------------------------------------------------

/**
 * The entire comparison function E(z) = sum_n z^{n b1} / Gamma(n b1 + 1),
 * the natural growth envelope for kernels with an integrable (t-tau)^{b1-1}
 * singularity; reduces to e^z at b1 = 1.
 */
inline double mittag_leffler(double b1, double z) {
    if (!(b1 > 0.0 && b1 <= 1.0)) throw invalid_input("mittag_leffler: exponent must lie in (0, 1]");
    if (z < 0.0) throw invalid_input("mittag_leffler: negative argument");
    if (z == 0.0) return 1.0;
    const double lz = std::log(z);
    double sum = 1.0;
    for (int n = 1; n <= 4000; ++n) {
        const double term = std::exp(n * b1 * lz - std::lgamma(n * b1 + 1.0));
        sum += term;
        if (term < 1e-17 * sum) return sum;
    }
    throw solver_failure("mittag_leffler: series failed to settle within 4000 terms");
}

/**
 * Envelope a(t) + theta1 Int_0^t E'(theta1 (t-tau)) a(tau) dtau with
 * theta1 = (c1 Gamma(b1))^{1/b1}, for a sampled uniformly on [0, t]. The
 * kernel factor is integrated exactly per panel through the antiderivative
 * -E(theta1 (t-tau))/theta1, so the weakly singular E' never needs pointwise
 * evaluation; a is taken piecewise linear (panel midpoint value).
 */
inline double gronwall_envelope(double b1, double c1, const std::vector<double>& a, double t) {
    if (!(b1 > 0.0 && b1 <= 1.0)) throw invalid_input("gronwall_envelope: exponent must lie in (0, 1]");
    if (c1 < 0.0) throw invalid_input("gronwall_envelope: negative kernel constant");
    if (t < 0.0) throw invalid_input("gronwall_envelope: negative time");
    if (a.size() < 2) throw invalid_input("gronwall_envelope: need at least 2 samples");
    for (double v : a)
        if (!std::isfinite(v)) throw invalid_input("gronwall_envelope: non-finite sample");
    if (t == 0.0 || c1 == 0.0) return a.back();
    const double theta1 = std::pow(c1 * std::tgamma(b1), 1.0 / b1);
    const std::size_t m = a.size() - 1;
    double env = a.back();
    double e_left = mittag_leffler(b1, theta1 * t);
    for (std::size_t k = 0; k < m; ++k) {
        const double tau_next = t * double(k + 1) / double(m);
        const double e_right = k + 1 == m ? 1.0 : mittag_leffler(b1, theta1 * (t - tau_next));
        env += 0.5 * (a[k] + a[k + 1]) * (e_left - e_right);
        e_left = e_right;
    }
    return env;
}

// ---------------------------------------------------------------------------
// Rate agreement across uniform norms
// ---------------------------------------------------------------------------

/**
 * One trajectory, several uniform-norm gauges: the exponential type must not
 * depend on p. Rates are compared pairwise within 10% once decay is present;
 * with no decay anywhere the report agrees vacuously, and a mix of decaying
 * and flat gauges is a disagreement.
 */
struct UniformDecayReport {
    std::vector<double> ps;
    std::vector<DecayReport> reports;
    bool decay_present = false;
    bool agree = false;
};

inline UniformDecayReport uniform_decay_check(double mu, const Field& V,
                                              const std::vector<double>& ps,
                                              double t_final = 6.0, double dt = 1e-2) {
    if (ps.empty()) throw invalid_input("uniform_decay_check: empty exponent list");
    check_finite(V, "uniform decay potential");
    if (V.max() > 0.0) throw invalid_input("uniform_decay_check: potential must be nonpositive");
    const Potential pot = make_potential(V, SignHint::nonpositive);
    const PerturbedPropagator prop = make_perturbed_propagator(
        V.grid, mu, {pot}, PerturbedPropagator::Scheme::strang, dt);
    const Field ones{V.grid, std::vector<double>(V.grid.size(), 1.0)};
    const long long nsteps = (long long)std::ceil(t_final / dt - 1e-9);
    const int stride = std::max(1, int(nsteps / 47));
    const Trajectory traj = evolve(prop, ones, t_final, stride);

    UniformDecayReport rep;
    rep.ps = ps;
    for (double p : ps) {
        NormTrajectory norms;
        for (const auto& [t, u] : traj) norms.emplace_back(t, uniform_norm(u, p));
        std::ostringstream label;
        label << "L^" << p << "_U";
        rep.reports.push_back(estimate_exponential_type(norms, label.str()));
    }
    rep.decay_present = true;
    bool all_flat = true;
    for (const DecayReport& r : rep.reports) {
        if (r.omega_effective == 0.0) rep.decay_present = false;
        if (std::abs(r.omega_hat) >= DecayReport::rate_floor) all_flat = false;
    }
    if (rep.decay_present) {
        rep.agree = true;
        for (std::size_t i = 0; i < rep.reports.size(); ++i)
            for (std::size_t j = i + 1; j < rep.reports.size(); ++j) {
                const double wi = rep.reports[i].omega_hat;
                const double wj = rep.reports[j].omega_hat;
                if (std::abs(wi - wj) > 0.1 * std::max(wi, wj)) rep.agree = false;
            }
    } else {
        rep.agree = all_flat;
    }
    return rep;
}

}  // namespace fraclab
