#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fraclab/perturbed.hpp"
#include "oracles.hpp"

using namespace fraclab;

namespace {

Field scaled_probe(const Grid& g, unsigned seed, double amp, bool nonneg = false) {
    Field f = oracles::smooth_probe(g, seed, nonneg);
    for (double& v : f.values) v *= amp;
    return f;
}

double max_diff(const Field& a, const Field& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

}  // namespace

TEST_CASE("potentials: construction, classes, sign hints", "[perturbed]") {
    const Grid g = make_grid(1, 8.0, 128);
    const Field bump = oracles::smooth_probe(g, 2, /*nonneg=*/true);

    const Potential pos = make_potential(bump, SignHint::nonnegative);
    CHECK(pos.bounded);
    CHECK(pos.sup_norm == Catch::Approx(bump.max_abs()));
    CHECK(pos.norm_neg == 0.0);
    CHECK(pos.kappa(0.5) == 0.0);

    Field neg = bump;
    for (double& v : neg.values) v = -v;
    CHECK_THROWS_AS(make_potential(neg, SignHint::nonnegative), invalid_input);
    CHECK_THROWS_AS(make_potential(bump, SignHint::nonpositive), invalid_input);

    const Potential mor = make_potential(bump, 2.0, 0.5, SignHint::nonnegative);
    CHECK_FALSE(mor.bounded);
    CHECK(mor.kappa(0.5) == Catch::Approx(0.5 / (2.0 * 0.5 * 2.0)));
    CHECK(mor.admissible(0.5));
    CHECK(mor.norm_pos > 0.0);
    CHECK(mor.norm_neg == 0.0);

    CHECK_THROWS_AS(make_potential(bump, 0.5, 0.5), invalid_input);
    CHECK_THROWS_AS(make_potential(bump, 2.0, 1.5), invalid_input);

    // kappa = 1 exactly is inadmissible and rejected at propagator assembly
    const Potential edge = make_potential(bump, 1.0, 1.0, SignHint::nonnegative);
    CHECK_FALSE(edge.admissible(0.5));
    CHECK_THROWS_AS(make_perturbed_propagator(g, 0.5, {edge},
                                              PerturbedPropagator::Scheme::picard_vcf, 1e-2),
                    invalid_input);
    CHECK_THROWS_AS(make_perturbed_propagator(g, 0.5, {mor},
                                              PerturbedPropagator::Scheme::strang, 1e-2),
                    invalid_input);
    CHECK_THROWS_AS(make_perturbed_propagator(g, 0.5, {}, PerturbedPropagator::Scheme::strang,
                                              1e-2),
                    invalid_input);
    CHECK_THROWS_AS(make_perturbed_propagator(g, 0.5, {pos},
                                              PerturbedPropagator::Scheme::strang, 0.0),
                    invalid_input);
}

TEST_CASE("fixed-point space exponents follow the two-branch rule", "[perturbed]") {
    // comfortable case: both conjugate reciprocals at least 1/p1
    const PicardExponents a = picard_space_exponents(2.0, 1.0, kInfExponent, 2.0);
    CHECK(a.theta == Catch::Approx(0.5));
    CHECK(a.w == 2.0);
    CHECK(a.kappa == 1.0);

    // strongly singular class: the space drops to (1/theta, ell theta)
    const PicardExponents b = picard_space_exponents(2.0, 1.0, kInfExponent, 4.0 / 3.0);
    CHECK(b.theta == Catch::Approx(0.25));
    CHECK(b.w == Catch::Approx(4.0));
    CHECK(b.kappa == Catch::Approx(0.25));
}

TEST_CASE("splitting: zero potential reduces to the free evolution", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 5);
    const Potential zero = make_potential(Field{g, std::vector<double>(g.size(), 0.0)});
    const auto prop = make_perturbed_propagator(g, 0.6, {zero},
                                                PerturbedPropagator::Scheme::strang, 0.25);
    const Trajectory traj = evolve(prop, u0, 1.0);
    REQUIRE(traj.size() == 5);
    CHECK(traj.front().first == 0.0);
    CHECK(traj.back().first == 1.0);
    const FreePropagator free_prop = make_free_propagator(g, 0.6);
    for (const auto& [t, u] : traj) {
        const Field ref = apply_free(free_prop, u0, t);
        CHECK(max_diff(u, ref) <= 1e-12 * u0.max_abs());
    }
}

TEST_CASE("splitting: constant potentials factor out exactly", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 8);
    const double c = 0.7;
    const Potential vc = make_potential(Field{g, std::vector<double>(g.size(), c)});
    const auto prop = make_perturbed_propagator(g, 0.5, {vc},
                                                PerturbedPropagator::Scheme::strang, 0.05);
    const Field ut = evolve(prop, u0, 1.0).back().second;
    const Field free_ut = apply_free(make_free_propagator(g, 0.5), u0, 1.0);
    double err = 0.0;
    for (std::size_t i = 0; i < ut.values.size(); ++i)
        err = std::max(err, std::abs(ut.values[i] - std::exp(c) * free_ut.values[i]));
    CHECK(err <= 1e-10 * std::exp(c) * u0.max_abs());
}

TEST_CASE("splitting: step-halving shows second order for strang", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 12);
    const Potential v = make_potential(scaled_probe(g, 3, 1.0));
    auto run = [&](double dt) {
        const auto prop =
            make_perturbed_propagator(g, 0.5, {v}, PerturbedPropagator::Scheme::strang, dt);
        return evolve(prop, u0, 0.5).back().second;
    };
    const Field a = run(0.02), b = run(0.01), c = run(0.005);
    const double order = std::log2(max_diff(a, b) / max_diff(b, c));
    CHECK(order >= 1.9);

    // lie splitting exists and converges to the same limit at first order
    const auto lie_prop =
        make_perturbed_propagator(g, 0.5, {v}, PerturbedPropagator::Scheme::lie, 0.005);
    const Field lie = evolve(lie_prop, u0, 0.5).back().second;
    CHECK(max_diff(lie, c) <= 0.05 * u0.max_abs());
}

TEST_CASE("splitting is linear and shifts exponentially", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 21);
    const Field v0 = oracles::smooth_probe(g, 22);
    const Potential v = make_potential(scaled_probe(g, 9, 0.8));
    const auto prop = make_perturbed_propagator(g, 0.75, {v},
                                                PerturbedPropagator::Scheme::strang, 0.02);

    Field combo = u0;
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = u0.values[i] + 2.0 * v0.values[i];
    const Field lhs = evolve(prop, combo, 0.6).back().second;
    const Field eu = evolve(prop, u0, 0.6).back().second;
    const Field ev = evolve(prop, v0, 0.6).back().second;
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < lhs.values.size(); ++i) {
        err = std::max(err, std::abs(lhs.values[i] - eu.values[i] - 2.0 * ev.values[i]));
        scale = std::max(scale, std::abs(lhs.values[i]));
    }
    CHECK(err <= 1e-10 * scale);

    // adding a constant multiplies the trajectory by e^{ct}
    const double c = 0.4;
    Field shifted_field = v.field;
    for (double& x : shifted_field.values) x += c;
    const auto prop_shift = make_perturbed_propagator(
        g, 0.75, {make_potential(shifted_field)}, PerturbedPropagator::Scheme::strang, 0.02);
    const Field us = evolve(prop_shift, u0, 0.6).back().second;
    double err_shift = 0.0;
    for (std::size_t i = 0; i < us.values.size(); ++i)
        err_shift = std::max(err_shift,
                             std::abs(us.values[i] - std::exp(c * 0.6) * eu.values[i]));
    CHECK(err_shift <= 1e-8 * std::exp(c * 0.6) * u0.max_abs());
}

TEST_CASE("order, domination, and potential monotonicity", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 256);
    const Field u0_pos = oracles::smooth_probe(g, 31, /*nonneg=*/true);
    const Field u0_mixed = oracles::smooth_probe(g, 32);

    Field vneg_field = oracles::smooth_probe(g, 33, /*nonneg=*/true);
    for (double& v : vneg_field.values) v = -v;
    const Potential vneg = make_potential(vneg_field, SignHint::nonpositive);
    const auto prop = make_perturbed_propagator(g, 0.5, {vneg},
                                                PerturbedPropagator::Scheme::strang, 0.01);

    // order preservation for nonnegative data
    const Field upos = evolve(prop, u0_pos, 1.0).back().second;
    CHECK(upos.min() >= -1e-10 * u0_pos.max_abs());

    // domination by the free evolution of |u0| for nonpositive potentials
    const Field uper = evolve(prop, u0_mixed, 1.0).back().second;
    Field absu = u0_mixed;
    for (double& v : absu.values) v = std::abs(v);
    const Field ufree = apply_free(make_free_propagator(g, 0.5), absu, 1.0);
    for (std::size_t i = 0; i < uper.values.size(); ++i)
        CHECK(std::abs(uper.values[i]) <= ufree.values[i] + 1e-8);

    // raising the potential raises the solution, for nonnegative data
    Field bump = oracles::smooth_probe(g, 34, /*nonneg=*/true);
    Field vhigher_field = vneg_field;
    for (std::size_t i = 0; i < vhigher_field.values.size(); ++i)
        vhigher_field.values[i] += 0.5 * bump.values[i];
    const auto prop_hi = make_perturbed_propagator(
        g, 0.5, {make_potential(vhigher_field)}, PerturbedPropagator::Scheme::strang, 0.01);
    const Field uhi = evolve(prop_hi, u0_pos, 1.0).back().second;
    for (std::size_t i = 0; i < uhi.values.size(); ++i)
        CHECK(upos.values[i] <= uhi.values[i] + 1e-8);
}

TEST_CASE("nonpositive potentials keep Morrey norms nonincreasing", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 256);
    const BallFamily fam = default_ball_family(g);
    const std::vector<MorreyParams> params{{1.0, 1.0}, {2.0, 0.5}, {kInfExponent, 1.0}};

    Field vneg_field = oracles::smooth_probe(g, 41, /*nonneg=*/true);
    for (double& v : vneg_field.values) v = -v;
    const auto prop = make_perturbed_propagator(
        g, 0.5, {make_potential(vneg_field, SignHint::nonpositive)},
        PerturbedPropagator::Scheme::strang, 0.02);
    const Trajectory traj = evolve(prop, oracles::smooth_probe(g, 42, /*nonneg=*/true), 1.0,
                                   /*record_stride=*/10);
    for (const MorreyParams& par : params) {
        double prev = morrey_norm(traj.front().second, par, fam);
        for (std::size_t k = 1; k < traj.size(); ++k) {
            const double cur = morrey_norm(traj[k].second, par, fam);
            CAPTURE(par.p, par.ell, traj[k].first);
            CHECK(cur <= prev * (1.0 + 1e-8));
            prev = cur;
        }
    }
}

TEST_CASE("blow-up guard aborts uncontrolled growth", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 64);
    const Potential vbig = make_potential(Field{g, std::vector<double>(g.size(), 40.0)});
    const auto prop = make_perturbed_propagator(g, 0.5, {vbig},
                                                PerturbedPropagator::Scheme::strang, 0.05);
    CHECK_THROWS_AS(evolve(prop, oracles::smooth_probe(g, 6), 1.0), solver_failure);
}

TEST_CASE("picard solver: constant potentials and the exponential factor", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 51);
    const double c = 0.8, T = 0.5;
    const Potential vc = make_potential(Field{g, std::vector<double>(g.size(), c)});
    PicardConfig cfg;
    cfg.window = 0.25;
    const auto prop = make_perturbed_propagator(g, 0.5, {vc},
                                                PerturbedPropagator::Scheme::picard_vcf, 1e-3,
                                                cfg);
    const Field ut = evolve_vcf_picard(prop, u0, T);
    const Field ref = apply_free(make_free_propagator(g, 0.5), u0, T);
    double err = 0.0;
    for (std::size_t i = 0; i < ut.values.size(); ++i)
        err = std::max(err, std::abs(ut.values[i] - std::exp(c * T) * ref.values[i]));
    CHECK(err <= 1e-6);

    // the configured constant shift produces the same e^{cT} factor (zero
    // potential plus shift c against the unshifted free evolution)
    const Potential zero = make_potential(Field{g, std::vector<double>(g.size(), 0.0)});
    PicardConfig cfg_shift = cfg;
    cfg_shift.shift_c = c;
    const auto prop_shift = make_perturbed_propagator(
        g, 0.5, {zero}, PerturbedPropagator::Scheme::picard_vcf, 1e-3, cfg_shift);
    const Field ushift = evolve_vcf_picard(prop_shift, u0, T);
    double err_shift = 0.0;
    for (std::size_t i = 0; i < ushift.values.size(); ++i)
        err_shift = std::max(err_shift,
                             std::abs(ushift.values[i] - std::exp(c * T) * ref.values[i]));
    CHECK(err_shift <= 1e-6);
}

TEST_CASE("picard solver: agreement with strang for bounded potentials", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 61);
    const Potential v = make_potential(scaled_probe(g, 62, 0.8));

    const auto strang_prop = make_perturbed_propagator(
        g, 0.5, {v}, PerturbedPropagator::Scheme::strang, 1e-3);
    const Field ref = evolve(strang_prop, u0, 1.0).back().second;

    const auto picard_prop = make_perturbed_propagator(
        g, 0.5, {v}, PerturbedPropagator::Scheme::picard_vcf, 1e-3);
    const Field fix = evolve_vcf_picard(picard_prop, u0, 1.0);
    CHECK(max_diff(fix, ref) <= 1e-4);

    // trajectory-producing entry point records window boundaries
    const Trajectory traj = evolve(picard_prop, u0, 0.5);
    CHECK(traj.front().first == 0.0);
    CHECK(traj.back().first == 0.5);
    CHECK(max_diff(traj.back().second, evolve_vcf_picard(picard_prop, u0, 0.5)) <= 1e-12);
}

TEST_CASE("picard solver: the five map forms agree", "[perturbed]") {
    const Grid g = make_grid(1, 16.0, 128);
    const Field u0 = oracles::smooth_probe(g, 71);
    const Potential v0 = make_potential(scaled_probe(g, 72, 0.5));
    const Potential v1 = make_potential(scaled_probe(g, 73, 0.4));
    const double T = 0.5, dt = 5e-4;

    auto with_form = [&](int form, std::vector<Potential> pots) {
        PicardConfig cfg;
        cfg.form = form;
        cfg.window = 0.25;
        return make_perturbed_propagator(g, 0.5, std::move(pots),
                                         PerturbedPropagator::Scheme::picard_vcf, dt, cfg);
    };

    const Field f1 = evolve_vcf_picard(with_form(1, {v0, v1}), u0, T);
    const Field f2 = evolve_vcf_picard(with_form(2, {v0, v1}), u0, T);
    const Field f3 = evolve_vcf_picard(with_form(3, {v0, v1}), u0, T);
    CHECK(max_diff(f2, f1) <= 1e-6);
    CHECK(max_diff(f3, f1) <= 1e-6);

    // forms 4 and 5: perturbing the two-potential base by an extra potential
    // lands on the three-potential evolution computed through form 1
    const Potential tilde = make_potential(scaled_probe(g, 74, 0.3));
    Field sum0 = v0.field;
    for (std::size_t i = 0; i < sum0.values.size(); ++i)
        sum0.values[i] += tilde.field.values[i];
    const Field f4 = evolve_vcf_picard(with_form(4, {v0, v1}), u0, T, tilde);
    const Field ref4 = evolve_vcf_picard(with_form(1, {make_potential(sum0), v1}), u0, T);
    CHECK(max_diff(f4, ref4) <= 1e-5);

    const Field f5 = evolve_vcf_picard(with_form(5, {v0, v1}), u0, T, tilde);
    CHECK(max_diff(f5, ref4) <= 1e-5);  // same combined potential either way

    CHECK_THROWS_AS(evolve_vcf_picard(with_form(4, {v0, v1}), u0, T), invalid_input);
    CHECK_THROWS_AS(evolve_vcf_picard(with_form(2, {v0}), u0, T), invalid_input);
}

TEST_CASE("picard solver: unbounded Morrey potential with smoothed comparison",
          "[perturbed]") {
    const Grid g = make_grid(1, 8.0, 256);
    Field vfield = power_law_field(g, 0.5);
    for (double& v : vfield.values) v = -v;  // attractive singular well
    const Potential vsing = make_potential(vfield, 1.0, 0.5, SignHint::nonpositive);
    REQUIRE(vsing.admissible(1.0));

    const Field u0 = oracles::smooth_probe(g, 81, /*nonneg=*/true);
    const auto prop = make_perturbed_propagator(g, 1.0, {vsing},
                                                PerturbedPropagator::Scheme::picard_vcf, 2e-3);
    const Field fix = evolve_vcf_picard(prop, u0, 0.5);

    // order preservation carries over to the singular class
    CHECK(fix.min() >= -1e-8 * u0.max_abs());

    // smoothed truncations approach the singular fixed point from the bounded side
    std::vector<double> gaps;
    for (int n : {4, 16, 64}) {
        const Potential vn = smooth_potential(vsing, n, 1.0);
        const auto bprop = make_perturbed_propagator(g, 1.0, {vn},
                                                     PerturbedPropagator::Scheme::strang, 1e-3);
        gaps.push_back(max_diff(evolve(bprop, u0, 0.5).back().second, fix));
    }
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[2] < gaps[1]);
    CHECK(gaps[2] <= 0.05 * u0.max_abs());
}

TEST_CASE("potential smoothing: convergence, order, and peak growth", "[perturbed]") {
    const Grid g = make_grid(1, 8.0, 512);

    // bounded potentials: the mollification converges back to the potential
    const Potential v = make_potential(oracles::smooth_probe(g, 91));
    std::vector<double> l2;
    for (int n : {4, 16, 64}) {
        const Potential vn = smooth_potential(v, n, 0.5);
        double acc = 0.0;
        for (std::size_t i = 0; i < vn.field.values.size(); ++i) {
            const double d = vn.field.values[i] - v.field.values[i];
            acc += d * d;
        }
        l2.push_back(std::sqrt(g.h * acc));
        CHECK(vn.bounded);
    }
    CHECK(l2[1] < l2[0]);
    CHECK(l2[2] < l2[1]);

    // nonnegative potentials stay nonnegative
    const Potential pos = make_potential(oracles::smooth_probe(g, 92, /*nonneg=*/true),
                                         SignHint::nonnegative);
    CHECK(smooth_potential(pos, 16, 0.5).field.min() >= 0.0);

    // |x|^{-1/2}: the smoothed peak grows like n^{1/4} under the heat flow
    const Potential sing = make_potential(power_law_field(g, 0.5), 1.0, 0.5,
                                          SignHint::nonnegative);
    std::vector<double> ln_n, ln_peak;
    for (int n : {4, 16, 64}) {
        ln_n.push_back(std::log(double(n)));
        ln_peak.push_back(std::log(smooth_potential(sing, n, 1.0).field.max()));
    }
    const LineFit fit = fit_line(ln_n, ln_peak);
    CHECK(fit.slope == Catch::Approx(0.25).epsilon(0.25));

    CHECK_THROWS_AS(smooth_potential(v, 0, 0.5), invalid_input);
}

TEST_CASE("potential truncation clips from below", "[perturbed]") {
    const Grid g = make_grid(1, 8.0, 128);

    const Potential mild = make_potential(scaled_probe(g, 95, 0.5));
    const Potential same = truncate_potential(mild, 10.0);
    for (std::size_t i = 0; i < same.field.values.size(); ++i)
        CHECK(same.field.values[i] == mild.field.values[i]);

    const Potential flat = make_potential(Field{g, std::vector<double>(g.size(), -20.0)},
                                          SignHint::nonpositive);
    const Potential clipped = truncate_potential(flat, 10.0);
    for (double val : clipped.field.values) CHECK(val == -10.0);

    Field well = power_law_field(g, 1.0);
    for (double& vv : well.values) vv = -vv;
    const Potential deep = make_potential(well, SignHint::nonpositive);
    const Potential cut = truncate_potential(deep, 10.0);
    int nclipped = 0;
    for (std::size_t i = 0; i < cut.field.values.size(); ++i) {
        CHECK(cut.field.values[i] == std::max(well.values[i], -10.0));
        if (well.values[i] < -10.0) ++nclipped;
    }
    CHECK(nclipped > 0);
    CHECK(cut.field.min() == -10.0);
    CHECK_THROWS_AS(truncate_potential(deep, 0.0), invalid_input);
}
