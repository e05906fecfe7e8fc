#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fraclab/experiments.hpp"
#include "fraclab/grid.hpp"

namespace fraclab {

namespace detail {

// Fields are stored little-endian on every platform; swap on big-endian hosts.
inline void to_little_endian(std::vector<double>& buf) {
    if constexpr (std::endian::native == std::endian::little) return;
    for (double& v : buf) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        bits = __builtin_bswap64(bits);
        std::memcpy(&v, &bits, sizeof bits);
    }
}

inline std::filesystem::path sidecar_path_for(const std::filesystem::path& given) {
    if (given.extension() == ".json") return given;
    std::filesystem::path p = given;
    if (p.extension() == ".f64") p.replace_extension();
    p += ".json";
    return p;
}

}  // namespace detail

/**
 * Write a field as raw little-endian 64-bit floats (row-major) next to a
 * JSON sidecar describing the grid. Returns the sidecar path; reading the
 * sidecar back yields a bitwise-identical field.
 */
inline std::filesystem::path write_field(const Field& f, const std::filesystem::path& stem) {
    check_finite(f, "field to serialize");
    std::filesystem::path data_path = stem;
    if (data_path.extension() != ".f64") data_path += ".f64";
    const std::filesystem::path sidecar = detail::sidecar_path_for(stem);

    std::vector<double> buf = f.values;
    detail::to_little_endian(buf);
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    if (!out) throw invalid_input("cannot open field data file for writing: " + data_path.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size() * sizeof(double)));
    if (!out) throw invalid_input("short write on field data file: " + data_path.string());
    out.close();

    const nlohmann::json side = {{"dim", f.grid.dim},
                                 {"extent", f.grid.extent},
                                 {"points_per_axis", f.grid.n},
                                 {"data", data_path.filename().string()},
                                 {"encoding", "float64-le"}};
    std::ofstream js(sidecar, std::ios::trunc);
    if (!js) throw invalid_input("cannot open field sidecar for writing: " + sidecar.string());
    js << side.dump(2) << '\n';
    return sidecar;
}

/** Load a field from its sidecar path (or the stem / .f64 path next to it). */
inline Field read_field(const std::filesystem::path& path) {
    const std::filesystem::path sidecar = detail::sidecar_path_for(path);
    std::ifstream js(sidecar);
    if (!js) throw invalid_input("cannot open field sidecar: " + sidecar.string());
    nlohmann::json side;
    try {
        js >> side;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_input("malformed field sidecar " + sidecar.string() + ": " + e.what());
    }
    for (const char* key : {"dim", "extent", "points_per_axis"})
        if (!side.contains(key))
            throw invalid_input("field sidecar missing key '" + std::string(key) + "'");
    if (side.value("encoding", "float64-le") != std::string("float64-le"))
        throw invalid_input("unsupported field encoding: " + side["encoding"].dump());

    const Grid g = make_grid(side["dim"].get<int>(), side["extent"].get<double>(),
                             side["points_per_axis"].get<int>());
    std::filesystem::path data_path = sidecar;
    data_path.replace_extension(".f64");
    if (side.contains("data"))
        data_path = sidecar.parent_path() / side["data"].get<std::string>();

    std::ifstream in(data_path, std::ios::binary | std::ios::ate);
    if (!in) throw invalid_input("cannot open field data file: " + data_path.string());
    const std::streamsize bytes = in.tellg();
    if (bytes != std::streamsize(g.size() * sizeof(double)))
        throw invalid_input("field data size mismatch in " + data_path.string() + ": expected " +
                            std::to_string(g.size() * sizeof(double)) + " bytes, found " +
                            std::to_string(bytes));
    in.seekg(0);
    std::vector<double> buf(g.size());
    in.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (!in) throw invalid_input("short read on field data file: " + data_path.string());
    detail::to_little_endian(buf);  // involution: the same swap restores host order
    Field f{g, std::move(buf)};
    check_finite(f, "field read from disk");
    return f;
}

/**
 * Write norm trajectories as CSV: one time column, one column per track.
 * All tracks must share the same sample times.
 */
inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<std::string>& labels,
                                 const std::vector<NormTrajectory>& tracks) {
    if (labels.size() != tracks.size() || tracks.empty())
        throw invalid_input("trajectory csv: need one label per track");
    for (const NormTrajectory& tr : tracks) {
        if (tr.size() != tracks.front().size())
            throw invalid_input("trajectory csv: tracks have mismatched lengths");
        for (std::size_t i = 0; i < tr.size(); ++i)
            if (tr[i].first != tracks.front()[i].first)
                throw invalid_input("trajectory csv: tracks have mismatched sample times");
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw invalid_input("cannot open trajectory csv for writing: " + path.string());
    out << "t";
    for (const std::string& label : labels) out << ',' << label;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < tracks.front().size(); ++i) {
        out << tracks.front()[i].first;
        for (const NormTrajectory& tr : tracks) out << ',' << tr[i].second;
        out << '\n';
    }
}

inline nlohmann::json norm_to_json(const MorreyParams& par) {
    nlohmann::json j;
    if (par.is_sup())
        j["p"] = "inf";
    else
        j["p"] = par.p;
    j["ell"] = par.ell;
    return j;
}

inline MorreyParams norm_from_json(const nlohmann::json& j) {
    MorreyParams par;
    if (!j.contains("p") || !j.contains("ell"))
        throw invalid_input("norm spec needs keys 'p' and 'ell'");
    if (j["p"].is_string()) {
        if (j["p"].get<std::string>() != "inf")
            throw invalid_input("norm spec: p must be a number or \"inf\"");
        par.p = kInfExponent;
    } else {
        par.p = j["p"].get<double>();
    }
    par.ell = j["ell"].get<double>();
    return par;
}

inline std::string behavior_name(ExpectedBehavior b) {
    switch (b) {
        case ExpectedBehavior::decays: return "decays";
        case ExpectedBehavior::constant_norm: return "constant_norm";
        case ExpectedBehavior::no_uniform_rate: return "no_uniform_rate";
    }
    return "decays";
}

inline ExpectedBehavior behavior_from_name(const std::string& name) {
    if (name == "decays") return ExpectedBehavior::decays;
    if (name == "constant_norm") return ExpectedBehavior::constant_norm;
    if (name == "no_uniform_rate") return ExpectedBehavior::no_uniform_rate;
    throw invalid_input("unknown expected behavior: " + name);
}

inline nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json j = {{"name", spec.name},
                        {"dim", spec.dim},
                        {"extent", spec.extent},
                        {"points_per_axis", spec.points},
                        {"mu", spec.mu},
                        {"datum", spec.datum},
                        {"potential", spec.potential},
                        {"times", spec.times},
                        {"dt", spec.dt},
                        {"seed", spec.seed},
                        {"expect", behavior_name(spec.expect)}};
    j["norms"] = nlohmann::json::array();
    for (const MorreyParams& par : spec.norms) j["norms"].push_back(norm_to_json(par));
    if (!spec.family_radii.empty()) j["family_radii"] = spec.family_radii;
    return j;
}

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    spec.name = j.value("name", std::string("unnamed"));
    spec.dim = j.value("dim", spec.dim);
    spec.extent = j.value("extent", spec.extent);
    spec.points = j.value("points_per_axis", spec.points);
    spec.mu = j.value("mu", spec.mu);
    spec.datum = j.value("datum", spec.datum);
    spec.potential = j.value("potential", spec.potential);
    spec.dt = j.value("dt", spec.dt);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("expect")) spec.expect = behavior_from_name(j["expect"].get<std::string>());
    if (j.contains("times")) spec.times = j["times"].get<std::vector<double>>();
    if (j.contains("family_radii"))
        spec.family_radii = j["family_radii"].get<std::vector<double>>();
    if (j.contains("norms"))
        for (const auto& nj : j["norms"]) spec.norms.push_back(norm_from_json(nj));
    return spec;
}

}  // namespace fraclab
