#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fraclab/analysis.hpp"
#include "fraclab/freeprop.hpp"
#include "fraclab/grid.hpp"
#include "fraclab/morrey.hpp"
#include "fraclab/perturbed.hpp"

namespace fraclab {

/** What a scripted run is expected to demonstrate. */
enum class ExpectedBehavior { decays, constant_norm, no_uniform_rate };

/**
 * Declarative description of one scripted run. Data and potentials are
 * small recipe strings ("kind" or "kind:params") so specs can travel through
 * JSON files and command lines unchanged:
 *
 *   data:      ones | gaussian:sigma2 | power:alpha | ball:R | atom |
 *              kernel:t0 | random:amplitude
 *   potential: none | constant:v | well:R,depth | sin:L0,scale
 *
 * The atom datum evolves through the measure route and needs strictly
 * positive sample times; the random datum is a seeded band-limited square,
 * so reruns are bitwise reproducible.
 */
struct ExperimentSpec {
    std::string name;
    int dim = 1;
    double extent = 16.0;
    int points = 128;
    double mu = 1.0;
    std::string datum = "gaussian:1";
    std::string potential = "none";
    std::vector<MorreyParams> norms;
    std::vector<double> times;
    std::vector<double> family_radii;  // slow-decay runs only
    double dt = 5e-3;                  // stepping width when a potential is present
    unsigned seed = 0;
    ExpectedBehavior expect = ExpectedBehavior::decays;
};

/** Largest time the box approximates free space: (2t)^{1/2mu} <= L/8. */
inline double validity_horizon(const Grid& g, double mu) {
    return 0.5 * std::pow(g.extent / 8.0, 2.0 * mu);
}

namespace detail {

inline std::vector<double> recipe_params(const std::string& recipe, std::string& kind) {
    const auto colon = recipe.find(':');
    kind = recipe.substr(0, colon);
    std::vector<double> params;
    if (colon == std::string::npos) return params;
    std::istringstream rest(recipe.substr(colon + 1));
    std::string tok;
    while (std::getline(rest, tok, ','))
        if (!tok.empty()) params.push_back(std::stod(tok));
    return params;
}

inline double param_or(const std::vector<double>& params, std::size_t i, double fallback) {
    return i < params.size() ? params[i] : fallback;
}

// Flat index of the node at x = 0 (per-axis index n/2 in the corner layout).
inline std::size_t origin_index(const Grid& g) {
    const std::size_t half = std::size_t(g.n) / 2;
    return g.dim == 2 ? half * std::size_t(g.n) + half : half;
}

}  // namespace detail

/** Materialize a datum recipe on a grid; "atom" is handled by the caller. */
inline Field make_datum(const Grid& g, const std::string& recipe, double mu, unsigned seed) {
    std::string kind;
    const auto params = detail::recipe_params(recipe, kind);
    if (kind == "ones") return Field{g, std::vector<double>(g.size(), 1.0)};
    if (kind == "gaussian") {
        const double sigma2 = detail::param_or(params, 0, 1.0);
        if (!(sigma2 > 0.0)) throw invalid_input("datum gaussian: width must be positive");
        return field_from_fn(g, [&](Point p) {
            const double r = g.distance(p, Point{0.0, 0.0});
            return std::exp(-r * r / (2.0 * sigma2));
        });
    }
    if (kind == "power") return power_law_field(g, detail::param_or(params, 0, 0.25));
    if (kind == "ball")
        return characteristic_ball(g, Point{0.0, 0.0}, detail::param_or(params, 0, 1.0));
    if (kind == "kernel") {
        const double t0 = detail::param_or(params, 0, 1.0);
        if (!(t0 > 0.0)) throw invalid_input("datum kernel: time must be positive");
        const AtomicMeasure atom = make_measure(g, {{detail::origin_index(g), 1.0}});
        return apply_free_measure(make_free_propagator(g, mu), atom, t0);
    }
    if (kind == "random") {
        const double amp = detail::param_or(params, 0, 1.0);
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> coeff(-1.0, 1.0);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
        std::vector<std::pair<double, double>> modes;  // (coefficient, phase) per wave number
        for (int k = 1; k <= 4; ++k) modes.emplace_back(coeff(rng), phase(rng));
        Field base = field_from_fn(g, [&](Point p) {
            double s = 0.0;
            for (std::size_t k = 0; k < modes.size(); ++k) {
                const double arg = 2.0 * M_PI * double(k + 1) / g.extent;
                double wave = std::cos(arg * p[0] + modes[k].second);
                if (g.dim == 2) wave *= std::cos(arg * p[1]);
                s += modes[k].first * wave;
            }
            return s;
        });
        for (double& v : base.values) v = amp * v * v;  // smooth, nonnegative
        return base;
    }
    throw invalid_input("unknown datum recipe: " + recipe);
}

/** Materialize a potential recipe; empty result means free evolution. */
inline std::optional<Field> make_potential_field(const Grid& g, const std::string& recipe) {
    std::string kind;
    const auto params = detail::recipe_params(recipe, kind);
    if (kind == "none" || kind.empty()) return std::nullopt;
    if (kind == "constant")
        return Field{g, std::vector<double>(g.size(), detail::param_or(params, 0, -1.0))};
    if (kind == "well") {
        const double R = detail::param_or(params, 0, 1.0);
        const double depth = detail::param_or(params, 1, -1.0);
        return depth * characteristic_ball(g, Point{0.0, 0.0}, R);
    }
    if (kind == "sin") {
        const double L0 = detail::param_or(params, 0, g.extent / 4.0);
        const double scale = detail::param_or(params, 1, 1.0);
        return field_from_fn(g, [&](Point p) {
            return -scale * (1.0 + std::sin(2.0 * M_PI * p[0] / L0));
        });
    }
    throw invalid_input("unknown potential recipe: " + recipe);
}

/** One norm gauge along one run, with the trend summaries tests assert on. */
struct NormTrack {
    std::string label;
    NormTrajectory samples;
    bool monotone_nonincreasing = true;
    double drop_factor = 1.0;  // first norm over last norm
    double flatness = 0.0;     // max |norm/norm(t_first) - 1|
    LineFit loglog;            // log norm against log t; zeros when t=0 is sampled
};

struct ExperimentReport {
    ExperimentSpec spec;
    bool window_ok = false;
    std::vector<NormTrack> tracks;
};

namespace detail {

inline std::string norm_label(const MorreyParams& par) {
    if (par.is_sup()) return "sup";
    std::ostringstream s;
    s << "M(" << par.p << "," << par.ell << ")";
    return s.str();
}

inline void check_spec_times(const ExperimentSpec& spec, const Grid& g) {
    if (spec.times.size() < 2) throw invalid_input("experiment: need at least 2 sample times");
    const double horizon = validity_horizon(g, spec.mu);
    double prev = -1.0;
    for (double t : spec.times) {
        if (!(t >= 0.0)) throw invalid_input("experiment: negative sample time");
        if (!(t > prev)) throw invalid_input("experiment: times must increase strictly");
        if (t > horizon + 1e-12)
            throw invalid_input("experiment: sample time exceeds the box validity window");
        prev = t;
    }
}

/**
 * Evaluate the evolved state at each requested time. Free evolutions are
 * sampled exactly from the datum; potential runs step sequentially with the
 * splitting scheme, shortening the last step into each sample time.
 */
template <typename Consume>
void sample_evolution(const ExperimentSpec& spec, const Grid& g, const Field& u0,
                      const std::optional<Field>& vfield, Consume&& consume) {
    if (!vfield) {
        const FreePropagator prop = make_free_propagator(g, spec.mu);
        for (double t : spec.times) consume(t, apply_free(prop, u0, t));
        return;
    }
    const FreePropagator free_prop = make_free_propagator(g, spec.mu);
    Field u = u0;
    double t_cur = 0.0;
    const double scale0 = std::max(u0.max_abs(), 1e-300);
    for (double t : spec.times) {
        while (t_cur < t - 1e-12) {
            const double step = std::min(spec.dt, t - t_cur);
            u = detail::splitting_step(free_prop, *vfield, u, step, true);
            t_cur += step;
            detail::guard_blowup(u, scale0, t_cur);
        }
        consume(t, u);
    }
}

inline NormTrack summarize_track(const MorreyParams& par, NormTrajectory samples) {
    NormTrack track;
    track.label = norm_label(par);
    track.samples = std::move(samples);
    const double first = track.samples.front().second;
    double prev = first;
    bool all_positive_t = true, all_positive_norm = first > 0.0;
    for (const auto& [t, norm] : track.samples) {
        if (norm > prev + 1e-12 * std::max(1.0, first)) track.monotone_nonincreasing = false;
        track.flatness = std::max(track.flatness, std::abs(norm / first - 1.0));
        if (t <= 0.0) all_positive_t = false;
        if (norm <= 0.0) all_positive_norm = false;
        prev = norm;
    }
    track.drop_factor = first / std::max(track.samples.back().second, 1e-300);
    if (all_positive_t && all_positive_norm) {
        std::vector<double> lt, ln;
        for (const auto& [t, norm] : track.samples) {
            lt.push_back(std::log(t));
            ln.push_back(std::log(norm));
        }
        track.loglog = fit_line(lt, ln);
    }
    return track;
}

}  // namespace detail

/**
 * Norm trajectories of one evolved datum across the requested gauges, with
 * monotone-trend summaries. Scale pairs with a strictly smaller slope are
 * expected to decay; equal-slope pairs decay only when the datum's far tail
 * is negligible in the gauge, which the drop factor makes visible.
 */
inline ExperimentReport run_individual_decay(const ExperimentSpec& spec) {
    const Grid g = make_grid(spec.dim, spec.extent, spec.points);
    detail::check_spec_times(spec, g);
    if (spec.norms.empty()) throw invalid_input("experiment: empty norm list");
    const BallFamily family = default_ball_family(g);
    const std::optional<Field> vfield = make_potential_field(g, spec.potential);

    ExperimentReport rep;
    rep.spec = spec;
    rep.window_ok = true;

    std::vector<NormTrajectory> per_norm(spec.norms.size());
    if (spec.datum == "atom") {
        if (vfield) throw invalid_input("experiment: atom datum requires a free evolution");
        for (double t : spec.times)
            if (!(t > 0.0))
                throw invalid_input("experiment: atom datum needs strictly positive times");
        const AtomicMeasure m = make_measure(g, {{detail::origin_index(g), 1.0}});
        const FreePropagator prop = make_free_propagator(g, spec.mu);
        for (double t : spec.times) {
            const Field u = apply_free_measure(prop, m, t);
            for (std::size_t i = 0; i < spec.norms.size(); ++i)
                per_norm[i].emplace_back(t, morrey_norm(u, spec.norms[i], family));
        }
    } else {
        const Field u0 = make_datum(g, spec.datum, spec.mu, spec.seed);
        detail::sample_evolution(spec, g, u0, vfield, [&](double t, const Field& u) {
            for (std::size_t i = 0; i < spec.norms.size(); ++i)
                per_norm[i].emplace_back(t, morrey_norm(u, spec.norms[i], family));
        });
    }
    for (std::size_t i = 0; i < spec.norms.size(); ++i)
        rep.tracks.push_back(detail::summarize_track(spec.norms[i], std::move(per_norm[i])));
    return rep;
}

/**
 * Flatness run for scale-invariant data: a power datum |x|^{-ell/p} is
 * pre-smoothed by S_mu(0.1) so it lives in the solvable closure, the kernel
 * datum rides mass conservation, and the constant datum pins the sup gauge.
 */
inline ExperimentReport run_constant_norm(const ExperimentSpec& spec) {
    const Grid g = make_grid(spec.dim, spec.extent, spec.points);
    detail::check_spec_times(spec, g);
    if (spec.norms.empty()) throw invalid_input("experiment: empty norm list");
    std::string kind;
    const auto params = detail::recipe_params(spec.datum, kind);
    if (kind != "power" && kind != "kernel" && kind != "ones")
        throw invalid_input("constant-norm run needs a power, kernel, or ones datum");
    if (kind == "power") {
        const double alpha = detail::param_or(params, 0, 0.25);
        for (const MorreyParams& par : spec.norms) {
            if (par.is_sup()) continue;
            if (std::abs(par.ell / par.p - alpha) > 1e-12)
                throw invalid_input(
                    "constant-norm power datum must be homogeneous of degree -ell/p "
                    "for every requested scale gauge");
            if (!(par.ell < double(g.dim)))
                throw invalid_input("constant-norm power datum needs ell < N");
        }
    }

    Field u0 = make_datum(g, spec.datum, spec.mu, spec.seed);
    const FreePropagator prop = make_free_propagator(g, spec.mu);
    if (kind == "power") u0 = apply_free(prop, u0, 0.1);  // dotted-closure smoothing

    const BallFamily family = default_ball_family(g);
    const std::optional<Field> vfield = make_potential_field(g, spec.potential);
    ExperimentReport rep;
    rep.spec = spec;
    rep.window_ok = true;
    std::vector<NormTrajectory> per_norm(spec.norms.size());
    detail::sample_evolution(spec, g, u0, vfield, [&](double t, const Field& u) {
        for (std::size_t i = 0; i < spec.norms.size(); ++i)
            per_norm[i].emplace_back(t, morrey_norm(u, spec.norms[i], family));
    });
    for (std::size_t i = 0; i < spec.norms.size(); ++i)
        rep.tracks.push_back(detail::summarize_track(spec.norms[i], std::move(per_norm[i])));
    return rep;
}

/** Slow-decay family: half-decay times along spreading indicator data. */
struct SlowDecayReport {
    ExperimentSpec spec;
    std::vector<double> radii;
    std::vector<double> half_times;  // lower bound (last sample time) when not reached
    std::vector<bool> reached;
    std::vector<NormTrack> tracks;
    bool strictly_increasing = false;
};

/**
 * Evolves indicator data of growing radius and reports when each trajectory
 * first halves. Without a certified rate the half-decay times grow along the
 * family; a uniform exponential bound caps them all near ln2 / rate instead.
 */
inline SlowDecayReport run_slow_decay_family(const ExperimentSpec& spec) {
    const Grid g = make_grid(spec.dim, spec.extent, spec.points);
    detail::check_spec_times(spec, g);
    if (spec.family_radii.empty())
        throw invalid_input("slow-decay run needs at least one family radius");
    for (std::size_t i = 1; i < spec.family_radii.size(); ++i)
        if (!(spec.family_radii[i] > spec.family_radii[i - 1]))
            throw invalid_input("slow-decay radii must increase strictly");
    const MorreyParams par = spec.norms.empty() ? MorreyParams{kInfExponent, 0.0} : spec.norms[0];
    const BallFamily family = default_ball_family(g);
    const std::optional<Field> vfield = make_potential_field(g, spec.potential);

    SlowDecayReport rep;
    rep.spec = spec;
    rep.radii = spec.family_radii;
    for (double R : spec.family_radii) {
        const Field u0 = characteristic_ball(g, Point{0.0, 0.0}, R);
        NormTrajectory samples;
        detail::sample_evolution(spec, g, u0, vfield, [&](double t, const Field& u) {
            samples.emplace_back(t, morrey_norm(u, par, family));
        });
        rep.tracks.push_back(detail::summarize_track(par, samples));
        try {
            rep.half_times.push_back(half_decay_time(samples));
            rep.reached.push_back(true);
        } catch (const solver_failure&) {
            rep.half_times.push_back(samples.back().first);  // lower bound only
            rep.reached.push_back(false);
        }
    }
    rep.strictly_increasing = true;
    for (std::size_t i = 1; i < rep.half_times.size(); ++i)
        if (!(rep.half_times[i] > rep.half_times[i - 1])) rep.strictly_increasing = false;
    return rep;
}

/** Evaluate the spec's declared expectation against a finished report. */
inline bool expectation_met(const ExperimentReport& rep) {
    switch (rep.spec.expect) {
        case ExpectedBehavior::decays:
            for (const NormTrack& t : rep.tracks)
                if (t.drop_factor < 2.0) return false;
            return true;
        case ExpectedBehavior::constant_norm:
            for (const NormTrack& t : rep.tracks)
                if (t.flatness > 0.05) return false;
            return true;
        case ExpectedBehavior::no_uniform_rate:
            for (const NormTrack& t : rep.tracks)
                if (t.drop_factor > 2.0) return false;
            return true;
    }
    return false;
}

}  // namespace fraclab
