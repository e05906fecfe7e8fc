// fraclab command-line front end. Grids, data, and potentials come from small
// recipe strings or field sidecar files; results go to JSON reports plus CSV
// trajectories in the --out directory (reports are echoed to stdout). Every
// report embeds the resolved configuration under "config", so a report can be
// reproduced from its own contents. Exit codes: 0 success, 2 validation
// error, 3 solver failure; errors are emitted as JSON on stderr.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fraclab/analysis.hpp"
#include "fraclab/experiments.hpp"
#include "fraclab/io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace fraclab;

namespace {

std::vector<double> split_csv(const std::string& text, const char* what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw invalid_input(std::string(what) + ": cannot parse number '" + tok + "'");
        }
    }
    if (out.empty()) throw invalid_input(std::string(what) + ": empty list");
    return out;
}

Grid grid_from_text(const std::string& text) {
    const auto v = split_csv(text, "--grid");
    if (v.size() != 3) throw invalid_input("--grid expects d,L,n");
    return make_grid(int(v[0]), v[1], int(v[2]));
}

json grid_json(const Grid& g) {
    return {{"dim", g.dim}, {"extent", g.extent}, {"points_per_axis", g.n}};
}

BallFamily::Shape shape_from_text(const std::string& text) {
    if (text == "cube") return BallFamily::Shape::cube;
    if (text == "euclidean") return BallFamily::Shape::euclidean;
    throw invalid_input("unknown ball shape '" + text + "' (use cube or euclidean)");
}

struct NormSpec {
    MorreyParams par;
    BallFamily::Shape shape = BallFamily::Shape::cube;
};

// --norm takes "p,ell[,shape]" with p = inf allowed.
NormSpec parse_norm(const std::string& text) {
    std::vector<std::string> toks;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) toks.push_back(tok);
    if (toks.size() < 2 || toks.size() > 3)
        throw invalid_input("--norm expects p,ell[,shape], got '" + text + "'");
    NormSpec spec;
    try {
        spec.par.p = (toks[0] == "inf") ? kInfExponent : std::stod(toks[0]);
        spec.par.ell = std::stod(toks[1]);
    } catch (const std::exception&) {
        throw invalid_input("--norm: cannot parse '" + text + "'");
    }
    if (toks.size() == 3) spec.shape = shape_from_text(toks[2]);
    return spec;
}

std::vector<NormSpec> resolve_norms(const std::vector<std::string>& flags,
                                    const std::string& fallback) {
    std::vector<NormSpec> out;
    if (flags.empty()) {
        out.push_back(parse_norm(fallback));
        return out;
    }
    for (const std::string& f : flags) out.push_back(parse_norm(f));
    return out;
}

json norm_json(const NormSpec& spec) {
    json j = norm_to_json(spec.par);
    j["shape"] = spec.shape == BallFamily::Shape::cube ? "cube" : "euclidean";
    return j;
}

std::string csv_label(const MorreyParams& par) {
    if (par.is_sup()) return "sup";
    std::ostringstream s;
    s << "M(" << par.p << ";" << par.ell << ")";
    return s.str();
}

void emit_report(const fs::path& out_dir, const std::string& file_name, const json& rep) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / file_name, std::ios::trunc);
    if (!f) throw invalid_input("cannot write report " + (out_dir / file_name).string());
    f << rep.dump(2) << '\n';
    std::cout << rep.dump(2) << std::endl;
}

// Shared options; each subcommand registers only the flags it acts on.
struct CommonOpts {
    std::string grid_text = "1,16,128";
    double mu = 1.0;
    std::string scheme = "strang";
    std::vector<std::string> norm_flags;
    std::string out_dir = ".";
    unsigned seed = 0;
    double dt = 5e-3;
    std::string datum = "gaussian:1";
    std::string potential = "none";
    std::string potential_file;
    double t_final = 1.0;
};

void add_grid_flags(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--grid", o.grid_text, "grid as d,L,n")->capture_default_str();
    sub->add_option("--mu", o.mu, "fractional order in (0,1]")->capture_default_str();
    sub->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "seed for randomized recipes")->capture_default_str();
}

// Potential source: an explicit field file wins over the recipe string and
// pins the grid; a --grid flag that disagrees with the file is an error.
struct ResolvedPotential {
    Grid grid;
    std::optional<Field> field;
    json config;
};

ResolvedPotential resolve_potential(const CLI::App* sub, const CommonOpts& o) {
    ResolvedPotential r{grid_from_text(o.grid_text), std::nullopt, json::object()};
    if (!o.potential_file.empty()) {
        Field f = read_field(o.potential_file);
        if (sub->count("--grid") > 0 && !(f.grid == r.grid))
            throw invalid_input("--grid conflicts with the grid stored in " + o.potential_file);
        r.grid = f.grid;
        r.field = std::move(f);
        r.config["potential_file"] = o.potential_file;
    } else {
        r.field = make_potential_field(r.grid, o.potential);
        r.config["potential"] = o.potential;
    }
    return r;
}

Field require_potential(ResolvedPotential& r) {
    if (!r.field)
        throw invalid_input("this command needs a potential (--potential or --potential-file)");
    return *r.field;
}

std::vector<double> linspace(double a, double b, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i)
        out.push_back(a + (b - a) * double(i) / double(count - 1));
    return out;
}

json decay_report_json(const DecayReport& rep) {
    return {{"label", rep.label},
            {"omega_hat", rep.omega_hat},
            {"omega_effective", rep.omega_effective},
            {"residual", rep.residual},
            {"reliable", rep.reliable}};
}

// ---------------------------------------------------------------- kernel --

void run_kernel(const CommonOpts& o, double t) {
    const Grid g = grid_from_text(o.grid_text);
    const Field k = make_datum(g, "kernel:" + std::to_string(t), o.mu, o.seed);
    const fs::path out(o.out_dir);
    fs::create_directories(out);
    const fs::path sidecar = write_field(k, out / "kernel");
    json rep;
    rep["config"] = {{"subcommand", "kernel"}, {"grid", grid_json(g)}, {"mu", o.mu}, {"t", t}};
    rep["kernel"] = {{"mass", k.integral()},
                     {"sup", k.max()},
                     {"min", k.min()},
                     {"data", sidecar.string()}};
    emit_report(out, "kernel-report.json", rep);
}

// ---------------------------------------------------------------- evolve --

void run_evolve(const CLI::App* sub, const CommonOpts& o) {
    if (!(o.t_final > 0.0)) throw invalid_input("--t must be positive");
    ResolvedPotential pot = resolve_potential(sub, o);
    const Grid& g = pot.grid;
    const Field u0 = make_datum(g, o.datum, o.mu, o.seed);
    const std::vector<NormSpec> norms = resolve_norms(o.norm_flags, "inf,0");

    json rep;
    rep["config"] = {{"subcommand", "evolve"}, {"grid", grid_json(g)},   {"mu", o.mu},
                     {"datum", o.datum},       {"scheme", o.scheme},     {"dt", o.dt},
                     {"t", o.t_final},         {"seed", o.seed},         {"out", o.out_dir}};
    rep["config"].update(pot.config);
    rep["config"]["norms"] = json::array();
    for (const NormSpec& n : norms) rep["config"]["norms"].push_back(norm_json(n));

    rep["warnings"] = json::array();
    const double horizon = validity_horizon(g, o.mu);
    if (o.t_final > horizon + 1e-12) {
        std::ostringstream w;
        w << "final time " << o.t_final << " exceeds the box validity window " << horizon
          << "; late-time values include periodic wrap-around";
        rep["warnings"].push_back(w.str());
    }

    Trajectory traj;
    if (!pot.field) {
        const FreePropagator prop = make_free_propagator(g, o.mu);
        for (double t : linspace(0.0, o.t_final, 33)) traj.emplace_back(t, apply_free(prop, u0, t));
    } else {
        PerturbedPropagator::Scheme scheme;
        if (o.scheme == "strang")
            scheme = PerturbedPropagator::Scheme::strang;
        else if (o.scheme == "lie")
            scheme = PerturbedPropagator::Scheme::lie;
        else if (o.scheme == "picard")
            scheme = PerturbedPropagator::Scheme::picard_vcf;
        else
            throw invalid_input("unknown scheme '" + o.scheme + "' (use strang, lie, or picard)");
        const Potential p = make_potential(*pot.field);
        const PerturbedPropagator prop = make_perturbed_propagator(g, o.mu, {p}, scheme, o.dt);
        const int steps = int(std::ceil(o.t_final / o.dt));
        traj = evolve(prop, u0, o.t_final, std::max(1, steps / 200));
    }

    const BallFamily cube_family = default_ball_family(g, BallFamily::Shape::cube);
    const BallFamily disc_family = default_ball_family(g, BallFamily::Shape::euclidean);
    std::vector<std::string> labels;
    std::vector<NormTrajectory> tracks(norms.size());
    for (std::size_t k = 0; k < norms.size(); ++k) {
        labels.push_back(csv_label(norms[k].par));
        const BallFamily& fam =
            norms[k].shape == BallFamily::Shape::cube ? cube_family : disc_family;
        for (const auto& [t, u] : traj)
            tracks[k].emplace_back(t, morrey_norm(u, norms[k].par, fam));
    }

    const fs::path out(o.out_dir);
    fs::create_directories(out);
    const fs::path state_sidecar = write_field(traj.back().second, out / "state");
    write_trajectory_csv(out / "trajectory.csv", labels, tracks);
    rep["final"] = {{"t", traj.back().first}, {"data", state_sidecar.string()}};
    for (std::size_t k = 0; k < norms.size(); ++k)
        rep["final"]["norms"].push_back(
            {{"label", labels[k]}, {"value", tracks[k].back().second}});
    rep["artifacts"] = {{"state", state_sidecar.string()},
                        {"trajectory", (out / "trajectory.csv").string()}};
    emit_report(out, "evolve-report.json", rep);
}

// ----------------------------------------------------------- morrey-norm --

void run_morrey_norm(const CLI::App* sub, const CommonOpts& o, const std::string& field_path) {
    Field u = [&] {
        if (!field_path.empty()) {
            Field f = read_field(field_path);
            if (sub->count("--grid") > 0 && !(f.grid == grid_from_text(o.grid_text)))
                throw invalid_input("--grid conflicts with the grid stored in " + field_path);
            return f;
        }
        return make_datum(grid_from_text(o.grid_text), o.datum, o.mu, o.seed);
    }();
    const std::vector<NormSpec> norms = resolve_norms(o.norm_flags, "inf,0");

    json rep;
    rep["config"] = {{"subcommand", "morrey-norm"}, {"grid", grid_json(u.grid)}, {"seed", o.seed}};
    if (!field_path.empty())
        rep["config"]["field"] = field_path;
    else
        rep["config"]["datum"] = o.datum;
    rep["config"]["norms"] = json::array();
    rep["norms"] = json::array();
    for (const NormSpec& n : norms) {
        rep["config"]["norms"].push_back(norm_json(n));
        const BallFamily family = default_ball_family(u.grid, n.shape);
        const NormReport nr = morrey_norm_report(u, n.par, family);
        const Point c = u.grid.node(nr.argmax_center);
        json center = json::array({c[0]});
        if (u.grid.dim == 2) center.push_back(c[1]);
        rep["norms"].push_back({{"label", csv_label(n.par)},
                                {"value", nr.value},
                                {"argmax_radius", nr.argmax_radius},
                                {"argmax_center", center}});
    }
    emit_report(fs::path(o.out_dir), "morrey-norm-report.json", rep);
}

// -------------------------------------------------------------- ab-check --

void run_ab_check(const CLI::App* sub, const CommonOpts& o, const std::string& radii_text,
                  const std::string& shape_text) {
    ResolvedPotential pot = resolve_potential(sub, o);
    const Field V = require_potential(pot);
    // Default radii stop at L/4: a window of radius L/2 is the whole torus,
    // which would count any integrable well as negative. Smaller windows keep
    // room for centers far from a compact support, as on the full space.
    std::vector<double> radii;
    if (radii_text == "default") {
        for (double r : default_ball_family(V.grid).radii)
            if (r <= 0.25 * V.grid.extent * (1.0 + 1e-12)) radii.push_back(r);
    } else {
        radii = split_csv(radii_text, "--radii");
    }
    const ABReport ab = ab_check(V, radii, shape_from_text(shape_text));

    json rep;
    rep["config"] = {{"subcommand", "ab-check"},
                     {"grid", grid_json(V.grid)},
                     {"radii", radii},
                     {"shape", shape_text}};
    rep["config"].update(pot.config);
    rep["holds"] = ab.holds;
    rep["radii"] = ab.radii;
    rep["beta"] = ab.beta;
    if (ab.holds) {
        rep["witness_radius"] = ab.witness_radius;
        rep["witness_c"] = ab.witness_c;
    }
    emit_report(fs::path(o.out_dir), "ab-check-report.json", rep);
}

// --------------------------------------------------------------- certify --

void run_certify(const CLI::App* sub, const CommonOpts& o, const std::string& theta_text) {
    ResolvedPotential pot = resolve_potential(sub, o);
    const Field V = require_potential(pot);
    const std::vector<double> thetas =
        theta_text == "default" ? default_theta_grid() : split_csv(theta_text, "--theta-grid");
    const DecayCertificate cert = decay_certificate(o.mu, V, thetas);

    const fs::path out(o.out_dir);
    fs::create_directories(out);
    const fs::path psi_sidecar = write_field(cert.psi, out / "psi");
    json rep;
    rep["config"] = {{"subcommand", "certify"},
                     {"grid", grid_json(V.grid)},
                     {"mu", o.mu},
                     {"theta_grid", thetas}};
    rep["config"].update(pot.config);
    rep["certificate"] = {{"theta_star", cert.theta}, {"inf_psi", cert.inf_psi},
                          {"c_rate", cert.c_rate},   {"omega0", cert.omega0},
                          {"C0", cert.C0},           {"psi_data", psi_sidecar.string()}};
    emit_report(out, "certify-report.json", rep);
}

// ------------------------------------------------------------ decay-rate --

void run_decay_rate(const CLI::App* sub, const CommonOpts& o) {
    if (!(o.t_final > 0.0)) throw invalid_input("--t must be positive");
    ResolvedPotential pot = resolve_potential(sub, o);
    const Grid& g = pot.grid;
    const Field u0 = make_datum(g, o.datum, o.mu, o.seed);
    const std::vector<NormSpec> norms = resolve_norms(o.norm_flags, "inf,0");

    ExperimentSpec carrier;  // reuses the experiment sampler for the stepping
    carrier.mu = o.mu;
    carrier.dt = o.dt;
    carrier.times = linspace(0.0, o.t_final, 33);
    const BallFamily cube_family = default_ball_family(g, BallFamily::Shape::cube);
    const BallFamily disc_family = default_ball_family(g, BallFamily::Shape::euclidean);
    std::vector<NormTrajectory> tracks(norms.size());
    detail::sample_evolution(carrier, g, u0, pot.field, [&](double t, const Field& u) {
        for (std::size_t k = 0; k < norms.size(); ++k) {
            const BallFamily& fam =
                norms[k].shape == BallFamily::Shape::cube ? cube_family : disc_family;
            tracks[k].emplace_back(t, morrey_norm(u, norms[k].par, fam));
        }
    });

    json rep;
    rep["config"] = {{"subcommand", "decay-rate"}, {"grid", grid_json(g)}, {"mu", o.mu},
                     {"datum", o.datum},           {"dt", o.dt},           {"t", o.t_final},
                     {"seed", o.seed}};
    rep["config"].update(pot.config);
    rep["config"]["norms"] = json::array();
    rep["rates"] = json::array();
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < norms.size(); ++k) {
        rep["config"]["norms"].push_back(norm_json(norms[k]));
        labels.push_back(csv_label(norms[k].par));
        rep["rates"].push_back(
            decay_report_json(estimate_exponential_type(tracks[k], labels.back())));
    }
    rep["warnings"] = json::array();
    if (o.t_final > validity_horizon(g, o.mu) + 1e-12)
        rep["warnings"].push_back("fit window exceeds the box validity window");

    const fs::path out(o.out_dir);
    fs::create_directories(out);
    write_trajectory_csv(out / "decay-trajectory.csv", labels, tracks);
    rep["artifacts"] = {{"trajectory", (out / "decay-trajectory.csv").string()}};
    emit_report(out, "decay-rate-report.json", rep);
}

// ---------------------------------------------------------- bounds-check --

void run_bounds_check(const CLI::App* sub, const CommonOpts& o, double p, double ell) {
    if (!(o.t_final > 0.0)) throw invalid_input("--t must be positive");
    ResolvedPotential pot = resolve_potential(sub, o);
    const Grid& g = pot.grid;
    if (!pot.field) throw invalid_input("bounds-check needs a potential");
    const Field u0 = make_datum(g, "ones", o.mu, o.seed);
    const MorreyParams par{p, ell};
    if (!(p >= 1.0) || !(ell > 0.0) || ell > double(g.dim))
        throw invalid_input("bounds-check: need p >= 1 and 0 < ell <= dim");

    ExperimentSpec carrier;
    carrier.mu = o.mu;
    carrier.dt = o.dt;
    carrier.times = linspace(0.0, o.t_final, 33);
    const BallFamily family = default_ball_family(g);
    NormTrajectory sup_track, morrey_track;
    detail::sample_evolution(carrier, g, u0, pot.field, [&](double t, const Field& u) {
        sup_track.emplace_back(t, morrey_norm(u, MorreyParams{kInfExponent, 0.0}, family));
        morrey_track.emplace_back(t, morrey_norm(u, par, family));
    });
    const DecayReport sup_rate = estimate_exponential_type(sup_track, "sup");
    const DecayReport morrey_rate = estimate_exponential_type(morrey_track, csv_label(par));
    const SandwichVerdict verdict =
        sandwich_check(o.mu, sup_rate.omega_effective, morrey_rate.omega_effective, p, ell, g.dim);

    json rep;
    rep["config"] = {{"subcommand", "bounds-check"}, {"grid", grid_json(g)}, {"mu", o.mu},
                     {"p", p},                       {"ell", ell},           {"dt", o.dt},
                     {"t", o.t_final}};
    rep["config"].update(pot.config);
    rep["omega_inf"] = decay_report_json(sup_rate);
    rep["omega_norm"] = decay_report_json(morrey_rate);
    rep["verdict"] = {{"pass", verdict.pass},
                      {"lower", verdict.lower},
                      {"upper", verdict.upper},
                      {"vartheta", verdict.vartheta},
                      {"tolerance", verdict.tolerance}};
    emit_report(fs::path(o.out_dir), "bounds-check-report.json", rep);
}

// -------------------------------------------------------------- rayleigh --

void run_rayleigh(const CLI::App* sub, const CommonOpts& o) {
    ResolvedPotential pot = resolve_potential(sub, o);
    const Field V = require_potential(pot);
    const RayleighReport rr = rayleigh_omega2(o.mu, V);

    const fs::path out(o.out_dir);
    fs::create_directories(out);
    const fs::path min_sidecar = write_field(rr.minimizer, out / "rayleigh-minimizer");
    json rep;
    rep["config"] = {{"subcommand", "rayleigh"}, {"grid", grid_json(V.grid)}, {"mu", o.mu}};
    rep["config"].update(pot.config);
    rep["omega2"] = rr.omega2;
    rep["iterations"] = rr.iterations;
    rep["residual"] = rr.residual;
    rep["artifacts"] = {{"minimizer", min_sidecar.string()}};
    emit_report(out, "rayleigh-report.json", rep);
}

// ------------------------------------------------------------ experiment --

struct NamedExperiment {
    std::string kind;
    ExperimentSpec spec;
};

NamedExperiment builtin_experiment(const std::string& name) {
    NamedExperiment e;
    e.spec.name = name;
    if (name == "gaussian-decay") {
        e.kind = "decay";
        e.spec.extent = 32.0;
        e.spec.points = 256;
        e.spec.datum = "gaussian:1";
        e.spec.norms = {MorreyParams{2.0, 0.5}, MorreyParams{kInfExponent, 0.0}};
        e.spec.times = linspace(0.0, 8.0, 17);
        e.spec.expect = ExpectedBehavior::decays;
        return e;
    }
    if (name == "self-similar-flat") {
        e.kind = "constant";
        e.spec.extent = 64.0;
        e.spec.points = 512;
        e.spec.datum = "power:0.25";
        e.spec.norms = {MorreyParams{2.0, 0.5}};
        e.spec.times = linspace(0.0, 0.9, 10);
        e.spec.expect = ExpectedBehavior::constant_norm;
        return e;
    }
    if (name == "heat-family") {
        e.kind = "family";
        e.spec.extent = 64.0;
        e.spec.points = 512;
        e.spec.datum = "ball:1";
        e.spec.norms = {MorreyParams{kInfExponent, 0.0}};
        e.spec.times = linspace(0.0, 28.0, 281);
        e.spec.family_radii = {1.0, 2.0, 4.0};
        return e;
    }
    throw invalid_input("unknown experiment '" + name +
                        "' (builtins: gaussian-decay, self-similar-flat, heat-family; "
                        "or pass a JSON spec file)");
}

NamedExperiment load_experiment(const std::string& arg) {
    if (!fs::exists(arg)) return builtin_experiment(arg);
    std::ifstream in(arg);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw invalid_input("malformed experiment spec " + arg + ": " + e.what());
    }
    NamedExperiment e;
    e.kind = j.value("kind", std::string("decay"));
    e.spec = experiment_spec_from_json(j);
    return e;
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '-';
    return out.empty() ? std::string("run") : out;
}

json track_json(const NormTrack& tr) {
    json j = {{"label", tr.label},
              {"monotone_nonincreasing", tr.monotone_nonincreasing},
              {"drop_factor", tr.drop_factor},
              {"flatness", tr.flatness},
              {"loglog_slope", tr.loglog.slope}};
    j["samples"] = json::array();
    for (const auto& [t, v] : tr.samples) j["samples"].push_back({t, v});
    return j;
}

void write_track_csv(const fs::path& path, const std::vector<NormTrack>& tracks) {
    std::vector<std::string> labels;
    std::vector<NormTrajectory> trajs;
    for (const NormTrack& tr : tracks) {
        std::string label = tr.label;
        for (char& c : label)
            if (c == ',') c = ';';
        labels.push_back(label);
        trajs.push_back(tr.samples);
    }
    write_trajectory_csv(path, labels, trajs);
}

json run_one_experiment(const NamedExperiment& e, const fs::path& out_dir) {
    json rep;
    rep["config"] = experiment_spec_to_json(e.spec);
    rep["config"]["kind"] = e.kind;
    const std::string stem = sanitize(e.spec.name);
    if (e.kind == "decay" || e.kind == "constant") {
        const ExperimentReport r =
            e.kind == "decay" ? run_individual_decay(e.spec) : run_constant_norm(e.spec);
        rep["window_ok"] = r.window_ok;
        rep["expectation_met"] = expectation_met(r);
        rep["tracks"] = json::array();
        for (const NormTrack& tr : r.tracks) rep["tracks"].push_back(track_json(tr));
        write_track_csv(out_dir / (stem + ".trajectories.csv"), r.tracks);
        rep["artifacts"] = {{"trajectories", (out_dir / (stem + ".trajectories.csv")).string()}};
        return rep;
    }
    if (e.kind == "family") {
        const SlowDecayReport r = run_slow_decay_family(e.spec);
        rep["radii"] = r.radii;
        rep["half_times"] = r.half_times;
        rep["reached"] = r.reached;
        rep["strictly_increasing"] = r.strictly_increasing;
        rep["tracks"] = json::array();
        for (const NormTrack& tr : r.tracks) rep["tracks"].push_back(track_json(tr));
        return rep;
    }
    throw invalid_input("unknown experiment kind '" + e.kind +
                        "' (use decay, constant, or family)");
}

void run_experiment(const CommonOpts& o, const std::string& arg) {
    const NamedExperiment e = load_experiment(arg);
    const fs::path out(o.out_dir);
    fs::create_directories(out);
    const json rep = run_one_experiment(e, out);
    emit_report(out, sanitize(e.spec.name) + ".report.json", rep);
}

// ----------------------------------------------------------------- sweep --

void run_sweep(const CommonOpts& o, const std::string& file, unsigned workers) {
    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open sweep file " + file);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw invalid_input("malformed sweep file " + file + ": " + e.what());
    }
    const json runs_json = j.is_array() ? j : j.value("runs", json::array());
    if (!runs_json.is_array() || runs_json.empty())
        throw invalid_input("sweep file needs a nonempty \"runs\" array");

    std::vector<NamedExperiment> runs;
    for (const json& rj : runs_json) {
        NamedExperiment e;
        e.kind = rj.value("kind", std::string("decay"));
        e.spec = experiment_spec_from_json(rj);
        runs.push_back(std::move(e));
    }

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, unsigned(runs.size()));
    const fs::path out(o.out_dir);
    fs::create_directories(out);

    // independent jobs, disjoint result slots; workers pull the next index
    std::vector<json> results(runs.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < runs.size(); i = next.fetch_add(1)) {
                json entry = {{"name", runs[i].spec.name}, {"kind", runs[i].kind}};
                try {
                    const json rep = run_one_experiment(runs[i], out);
                    const std::string fname =
                        sanitize(runs[i].spec.name) + "-" + std::to_string(i) + ".report.json";
                    std::ofstream rf(out / fname, std::ios::trunc);
                    rf << rep.dump(2) << '\n';
                    entry["ok"] = true;
                    entry["report"] = fname;
                } catch (const invalid_input& e) {
                    entry["ok"] = false;
                    entry["error"] = {{"type", "validation"}, {"message", e.what()}};
                } catch (const solver_failure& e) {
                    entry["ok"] = false;
                    entry["error"] = {{"type", "solver"}, {"message", e.what()}};
                }
                results[i] = std::move(entry);
            }
        });
    for (std::thread& t : pool) t.join();

    json rep;
    rep["config"] = {{"subcommand", "sweep"},
                     {"file", file},
                     {"workers", workers},
                     {"out", o.out_dir}};
    rep["runs"] = results;
    emit_report(out, "sweep-report.json", rep);

    bool any_validation = false, any_solver = false;
    for (const json& r : results) {
        if (r.value("ok", false)) continue;
        const std::string type = r["error"]["type"].get<std::string>();
        (type == "validation" ? any_validation : any_solver) = true;
    }
    if (any_validation) throw invalid_input("sweep: at least one run failed validation");
    if (any_solver) throw solver_failure("sweep: at least one run failed to solve");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fractional evolution laboratory"};
    app.require_subcommand(1);

    auto opts = std::make_shared<CommonOpts>();

    // kernel
    auto kernel_t = std::make_shared<double>(1.0);
    CLI::App* kernel = app.add_subcommand("kernel", "tabulate the free kernel on the torus");
    add_grid_flags(kernel, *opts);
    kernel->add_option("--t", *kernel_t, "kernel time")->capture_default_str();
    kernel->callback([=] { run_kernel(*opts, *kernel_t); });

    // evolve
    CLI::App* evolve = app.add_subcommand("evolve", "evolve a datum and record norms");
    add_grid_flags(evolve, *opts);
    evolve->add_option("--datum", opts->datum, "initial datum recipe")->capture_default_str();
    evolve->add_option("--potential", opts->potential, "potential recipe")->capture_default_str();
    evolve->add_option("--potential-file", opts->potential_file, "potential field sidecar");
    evolve->add_option("--scheme", opts->scheme, "strang | lie | picard")->capture_default_str();
    evolve->add_option("--dt", opts->dt, "step width")->capture_default_str();
    evolve->add_option("--t", opts->t_final, "final time")->capture_default_str();
    evolve->add_option("--norm", opts->norm_flags, "norm gauge p,ell[,shape]; repeatable");
    evolve->callback([=] { run_evolve(evolve, *opts); });

    // morrey-norm
    auto field_path = std::make_shared<std::string>();
    CLI::App* mnorm = app.add_subcommand("morrey-norm", "norm report for a field");
    add_grid_flags(mnorm, *opts);
    mnorm->add_option("--field", *field_path, "field sidecar to load");
    mnorm->add_option("--datum", opts->datum, "datum recipe when no field file is given")
        ->capture_default_str();
    mnorm->add_option("--norm", opts->norm_flags, "norm gauge p,ell[,shape]; repeatable");
    mnorm->callback([=] { run_morrey_norm(mnorm, *opts, *field_path); });

    // ab-check
    auto radii_text = std::make_shared<std::string>("default");
    auto shape_text = std::make_shared<std::string>("cube");
    CLI::App* ab = app.add_subcommand("ab-check", "window-negativity test for a potential");
    add_grid_flags(ab, *opts);
    ab->add_option("--potential", opts->potential, "potential recipe")->capture_default_str();
    ab->add_option("--potential-file", opts->potential_file, "potential field sidecar");
    ab->add_option("--radii", *radii_text, "comma list of window radii, or 'default'")
        ->capture_default_str();
    ab->add_option("--shape", *shape_text, "cube | euclidean")->capture_default_str();
    ab->callback([=] { run_ab_check(ab, *opts, *radii_text, *shape_text); });

    // certify
    auto theta_text = std::make_shared<std::string>("default");
    CLI::App* certify = app.add_subcommand("certify", "decay certificate for a potential");
    add_grid_flags(certify, *opts);
    certify->add_option("--potential", opts->potential, "potential recipe")
        ->capture_default_str();
    certify->add_option("--potential-file", opts->potential_file, "potential field sidecar");
    certify->add_option("--theta-grid", *theta_text, "comma list of theta values, or 'default'")
        ->capture_default_str();
    certify->callback([=] { run_certify(certify, *opts, *theta_text); });

    // decay-rate
    CLI::App* rate = app.add_subcommand("decay-rate", "fit exponential rates along a run");
    add_grid_flags(rate, *opts);
    rate->add_option("--datum", opts->datum, "initial datum recipe")->capture_default_str();
    rate->add_option("--potential", opts->potential, "potential recipe")->capture_default_str();
    rate->add_option("--potential-file", opts->potential_file, "potential field sidecar");
    rate->add_option("--dt", opts->dt, "step width")->capture_default_str();
    rate->add_option("--t", opts->t_final, "fit window length")->capture_default_str();
    rate->add_option("--norm", opts->norm_flags, "norm gauge p,ell[,shape]; repeatable");
    rate->callback([=] { run_decay_rate(rate, *opts); });

    // bounds-check
    auto bc_p = std::make_shared<double>(2.0);
    auto bc_ell = std::make_shared<double>(1.0);
    CLI::App* bounds = app.add_subcommand("bounds-check", "two-sided rate comparison");
    add_grid_flags(bounds, *opts);
    bounds->add_option("--potential", opts->potential, "potential recipe")->capture_default_str();
    bounds->add_option("--potential-file", opts->potential_file, "potential field sidecar");
    bounds->add_option("--p", *bc_p, "norm exponent p")->capture_default_str();
    bounds->add_option("--ell", *bc_ell, "norm scale ell")->capture_default_str();
    bounds->add_option("--dt", opts->dt, "step width")->capture_default_str();
    bounds->add_option("--t", opts->t_final, "fit window length")->capture_default_str();
    bounds->callback([=] { run_bounds_check(bounds, *opts, *bc_p, *bc_ell); });

    // rayleigh
    CLI::App* rayleigh = app.add_subcommand("rayleigh", "quadratic-form ground rate");
    add_grid_flags(rayleigh, *opts);
    rayleigh->add_option("--potential", opts->potential, "potential recipe")
        ->capture_default_str();
    rayleigh->add_option("--potential-file", opts->potential_file, "potential field sidecar");
    rayleigh->callback([=] { run_rayleigh(rayleigh, *opts); });

    // experiment
    auto exp_arg = std::make_shared<std::string>();
    CLI::App* experiment = app.add_subcommand("experiment", "run a scripted experiment");
    experiment->add_option("spec", *exp_arg, "builtin name or JSON spec file")->required();
    experiment->add_option("--out", opts->out_dir, "output directory")->capture_default_str();
    experiment->callback([=] { run_experiment(*opts, *exp_arg); });

    // sweep
    auto sweep_file = std::make_shared<std::string>();
    auto workers = std::make_shared<unsigned>(0);
    CLI::App* sweep = app.add_subcommand("sweep", "run many experiments across workers");
    sweep->add_option("file", *sweep_file, "JSON file with a \"runs\" array")->required();
    sweep->add_option("--out", opts->out_dir, "output directory")->capture_default_str();
    sweep->add_option("--workers", *workers, "worker count (0 = hardware)")
        ->envname("FRACLAB_WORKERS")
        ->capture_default_str();
    sweep->callback([=] { run_sweep(*opts, *sweep_file, *workers); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 2;
    } catch (const invalid_input& e) {
        std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 2;
    } catch (const solver_failure& e) {
        std::cerr << json{{"error", {{"type", "solver"}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "internal"}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 3;
    }
    return 0;
}
