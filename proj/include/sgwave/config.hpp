#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgwave/coefficients.hpp"
#include "sgwave/diagnostics.hpp"
#include "sgwave/manifold.hpp"
#include "sgwave/noise.hpp"
#include "sgwave/solver.hpp"

namespace sgw {

using json = nlohmann::json;

/// Raised by configuration validation; the message names the offending key.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Everything a run needs, assembled from one JSON document. The manifold,
/// coefficient set and measure own their storage so the derived StepParams
/// stay valid for the lifetime of this object.
struct Experiment {
    json raw;
    Grid grid;
    std::shared_ptr<ManifoldSpec> manifold;
    std::shared_ptr<CoefficientSet> coeffs;
    std::shared_ptr<SpectralMeasure> measure;
    StepParams params;
    double horizon = 1.0;
    int recorder_stride = 1;
    int ensemble = 1;
    std::uint64_t seed = 0;
    std::string initial_preset = "great_circle";
    json initial_args;
    std::vector<json> diagnostics;

    std::size_t step_count() const {
        return static_cast<std::size_t>(std::llround(horizon / params.dt));
    }

    State make_initial(int member) const;
    Trajectory run_member(int member) const;
};

namespace detail {

template <typename T>
T get_key(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(path + "." + key + ": missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key + ": wrong type");
    }
}

inline std::string canonical_dump(const json& j) { return j.dump(); } // keys already sorted

} // namespace detail

/// FNV-1a hash of the canonicalized document: stable across runs, changes
/// exactly when a semantic key changes.
inline std::string config_hash(const json& j) {
    std::string s = detail::canonical_dump(j);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline SpectralMeasure measure_from_json(int dim, const json& j, const std::string& path) {
    if (j.contains("file")) {
        std::ifstream in(j.at("file").get<std::string>());
        if (!in) throw ConfigError(path + ".file: cannot open measure file");
        json atoms = json::parse(in);
        std::vector<std::pair<Vec, double>> list;
        for (const auto& a : atoms)
            list.emplace_back(a.at("xi").get<Vec>(), a.at("mass").get<double>());
        return validate_measure(dim, list);
    }
    std::string preset = detail::get_key<std::string>(j, path, "preset");
    if (preset == "zero_mode") {
        return validate_measure(dim, {{Vec(dim, 0.0), detail::get_or(j, "mass", 1.0)}});
    }
    if (preset == "single_pair") {
        Vec xi = detail::get_or(j, "xi", Vec(dim, 0.0));
        if (static_cast<int>(xi.size()) != dim)
            throw ConfigError(path + ".xi: dimension mismatch");
        bool zero = true;
        for (double v : xi) zero = zero && v == 0.0;
        if (zero) xi[0] = 6.283185307179586 / detail::get_or(j, "wavelength", 1.0);
        return validate_measure(dim, {{xi, detail::get_or(j, "mass", 1.0)}});
    }
    if (preset == "ring8") {
        if (dim != 2) throw ConfigError(path + ".preset: ring8 requires grid.dim = 2");
        double rho = detail::get_or(j, "radius", 6.283185307179586);
        double mass = detail::get_or(j, "mass", 1.0) / 8.0;
        std::vector<std::pair<Vec, double>> list;
        for (int k = 0; k < 8; ++k) {
            double a = 0.78539816339744830961 * k;
            list.push_back({Vec{rho * std::cos(a), rho * std::sin(a)}, mass});
        }
        return validate_measure(dim, list);
    }
    throw ConfigError(path + ".preset: unknown measure preset '" + preset + "'");
}

inline std::shared_ptr<ManifoldSpec> manifold_from_json(const json& j, const std::string& path) {
    if (j.contains("file")) {
        std::ifstream in(j.at("file").get<std::string>());
        if (!in) throw ConfigError(path + ".file: cannot open manifold file");
        json doc = json::parse(in);
        int n = doc.at("ambient_dim").get<int>();
        auto spec = std::make_shared<ManifoldSpec>(make_sphere(n));
        if (doc.contains("generators")) {
            spec->generators.clear();
            for (const auto& g : doc.at("generators")) {
                Mat m(n);
                auto rows = g.get<std::vector<double>>();
                if (static_cast<int>(rows.size()) != n * n)
                    throw ConfigError(path + ": generator matrix size mismatch");
                m.a = rows;
                spec->generators.push_back(std::move(m));
            }
            spec->is_sphere = false; // generic generators: use the frame projector
        }
        if (doc.contains("partition") && doc.at("partition").is_array()) {
            spec->kronecker_partition = false;
            spec->partition_table = doc.at("partition").get<std::vector<double>>();
            int N = spec->generator_count();
            if (static_cast<int>(spec->partition_table.size()) != N * N)
                throw ConfigError(path + ": partition table size mismatch");
        }
        if (doc.contains("cutoff_radii")) {
            auto r = doc.at("cutoff_radii").get<Vec>();
            spec->r_in = r.at(0);
            spec->r_out = r.at(1);
        }
        try {
            spec->check_limits();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string(path) + ": " + e.what());
        }
        return spec;
    }
    std::string preset = detail::get_key<std::string>(j, path, "preset");
    if (preset.rfind("sphere:", 0) == 0) {
        int n = std::stoi(preset.substr(7));
        return std::make_shared<ManifoldSpec>(make_sphere(n));
    }
    throw ConfigError(path + ".preset: unknown manifold preset '" + preset + "'");
}

inline LatticeFn lattice_from_json(const json& block, int dim, int comps,
                                   const std::string& path) {
    LatticeFn f;
    f.dim = dim;
    f.comps = comps;
    f.lo = detail::get_key<Vec>(block, path, "lo");
    f.hi = detail::get_key<Vec>(block, path, "hi");
    f.points = detail::get_key<std::vector<int>>(block, path, "points");
    f.values = detail::get_key<std::vector<double>>(block, path, "values");
    if (static_cast<int>(f.lo.size()) != dim || static_cast<int>(f.hi.size()) != dim ||
        static_cast<int>(f.points.size()) != dim)
        throw ConfigError(path + ": lattice box dimension mismatch");
    std::size_t expect = static_cast<std::size_t>(comps);
    for (int p : f.points) {
        if (p < 2) throw ConfigError(path + ".points: need at least 2 per axis");
        expect *= static_cast<std::size_t>(p);
    }
    if (f.values.size() != expect) throw ConfigError(path + ".values: size mismatch");
    return f;
}

/// Tabulated coefficient file: optional channels f0/g0 (scalar lattices)
/// and fd1/gd1 (vector lattices), evaluated by multilinear interpolation
/// and zero outside their boxes.
inline CoefficientSet coefficients_from_file(int ambient, int spatial, const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("coefficients.file: cannot open " + file);
    json doc = json::parse(in);
    CoefficientSet s = make_zero_coefficients(ambient, spatial);
    auto scalar_channel = [&](const char* key, ScalarFn& dst, double& sup) {
        if (!doc.contains(key)) return;
        auto f = std::make_shared<LatticeFn>(
            lattice_from_json(doc.at(key), ambient, 1, std::string("coefficients.") + key));
        sup = f->sup_norm();
        dst = [f](const double* p) {
            double v;
            f->eval(p, &v);
            return v;
        };
    };
    auto vector_channel = [&](const char* key, VectorFn& dst, double& sup) {
        if (!doc.contains(key)) return;
        auto f = std::make_shared<LatticeFn>(
            lattice_from_json(doc.at(key), ambient, ambient, std::string("coefficients.") + key));
        sup = f->sup_norm();
        dst = [f](const double* p, double* out) { f->eval(p, out); };
    };
    scalar_channel("f0", s.f0, s.f0_sup);
    scalar_channel("g0", s.g0, s.g0_sup);
    vector_channel("fd1", s.fd1, s.fd1_sup);
    vector_channel("gd1", s.gd1, s.gd1_sup);
    return s;
}

inline std::shared_ptr<CoefficientSet> coefficients_from_json(int ambient, int spatial,
                                                              const json& j,
                                                              const std::string& path) {
    auto build_one = [&](const json& block) -> CoefficientSet {
        if (block.contains("file"))
            return coefficients_from_file(ambient, spatial, block.at("file").get<std::string>());
        std::string preset = detail::get_key<std::string>(block, path, "preset");
        if (preset == "zero") return make_zero_coefficients(ambient, spatial);
        if (preset == "constant_field")
            return make_constant_field(ambient, spatial,
                                       detail::get_or(block, "value", Vec(ambient, 0.0)), false);
        if (preset == "additive_noise")
            return make_constant_field(ambient, spatial,
                                       detail::get_or(block, "value", Vec(ambient, 0.0)), true);
        if (preset == "linear_damping")
            return make_linear_damping(ambient, spatial, detail::get_or(block, "gamma", 0.1));
        if (preset == "multiplicative_noise")
            return make_multiplicative_noise(ambient, spatial, detail::get_or(block, "sigma", 0.1));
        throw ConfigError(path + ".preset: unknown coefficient preset '" + preset + "'");
    };
    CoefficientSet built;
    if (j.contains("parts")) {
        std::vector<CoefficientSet> parts;
        for (const auto& p : j.at("parts")) parts.push_back(build_one(p));
        built = merge_coefficients(parts);
    } else {
        built = build_one(j);
    }
    int level = detail::get_or(j, "mollify", 0);
    if (level > 0) built = mollify(built, level);
    return std::make_shared<CoefficientSet>(built);
}

/// Parse and validate a full experiment document.
inline Experiment parse_experiment(const json& doc) {
    Experiment ex;
    ex.raw = doc;

    const json& jg = doc.contains("grid") ? doc.at("grid") : throw ConfigError("grid: missing");
    int dim = detail::get_key<int>(jg, "grid", "dim");
    int points = detail::get_key<int>(jg, "grid", "points");
    double length = detail::get_key<double>(jg, "grid", "length");
    try {
        ex.grid = Grid(dim, points, length);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    ex.manifold = manifold_from_json(
        doc.contains("manifold") ? doc.at("manifold") : json{{"preset", "sphere:3"}}, "manifold");

    int ambient = ex.manifold->ambient_dim;
    ex.coeffs = coefficients_from_json(
        ambient, dim, doc.contains("coefficients") ? doc.at("coefficients") : json{{"preset", "zero"}},
        "coefficients");

    if (doc.contains("noise"))
        ex.measure = std::make_shared<SpectralMeasure>(
            measure_from_json(dim, doc.at("noise"), "noise"));

    const json& jt = doc.contains("time") ? doc.at("time") : throw ConfigError("time: missing");
    ex.params.dt = detail::get_key<double>(jt, "time", "dt");
    ex.horizon = detail::get_key<double>(jt, "time", "horizon");
    ex.recorder_stride = detail::get_or(jt, "recorder_stride", 1);
    if (ex.horizon <= 0.0) throw ConfigError("time.horizon: must be positive");

    const json& js = doc.contains("scheme") ? doc.at("scheme") : json{{"type", "penalized"}};
    std::string sch = detail::get_or<std::string>(js, "type", "penalized");
    if (sch == "penalized") {
        ex.params.scheme = Scheme::penalized;
        ex.params.penalty = detail::get_or(js, "m", 0.0);
    } else if (sch == "projected") {
        ex.params.scheme = Scheme::projected;
    } else {
        throw ConfigError("scheme.type: must be 'penalized' or 'projected'");
    }

    ex.params.manifold = ex.manifold.get();
    ex.params.coeffs = ex.coeffs.get();
    ex.params.measure = ex.measure.get();
    ex.seed = detail::get_or<std::uint64_t>(doc, "seed", 0);
    ex.params.seed = ex.seed;
    ex.ensemble = detail::get_or(doc, "ensemble", 1);
    if (ex.ensemble < 1) throw ConfigError("ensemble: must be >= 1");

    const json& ji = doc.contains("initial") ? doc.at("initial") : json{{"preset", "great_circle"}};
    ex.initial_preset = detail::get_or<std::string>(ji, "preset", "great_circle");
    ex.initial_args = ji;

    if (doc.contains("diagnostics"))
        for (const auto& d : doc.at("diagnostics")) ex.diagnostics.push_back(d);

    try {
        ex.params.validate(ex.grid);
    } catch (const NumericalError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    // finite-propagation compatibility: the box must outrun the light cone
    if (detail::get_or(doc, "check_propagation", false)) {
        double support = detail::get_or(ji, "width", 0.5);
        if (ex.grid.length < 2.0 * (support + ex.horizon))
            throw ConfigError("grid.length: must be at least 2 (support + horizon) "
                              "when propagation checks are enabled");
    }
    return ex;
}

/// Shipped experiment presets, addressable by name wherever a config file
/// path is accepted.
inline json builtin_config(const std::string& name) {
    if (name == "geodesic-s2") {
        return json{{"grid", {{"dim", 1}, {"points", 32}, {"length", 4.0}}},
                    {"manifold", {{"preset", "sphere:3"}}},
                    {"coefficients", {{"preset", "zero"}}},
                    {"scheme", {{"type", "projected"}}},
                    {"time", {{"dt", 0.005}, {"horizon", 2.0}, {"recorder_stride", 10}}},
                    {"initial", {{"preset", "great_circle"}, {"omega", 1.0}}},
                    {"diagnostics", json::array({{{"name", "momentum"}, {"generator", 0}},
                                                 {{"name", "constraint"}}})},
                    {"seed", 1},
                    {"ensemble", 1}};
    }
    if (name == "standing-wave") {
        return json{{"grid", {{"dim", 1}, {"points", 64}, {"length", 1.0}}},
                    {"manifold", {{"preset", "sphere:3"}}},
                    {"coefficients", {{"preset", "zero"}}},
                    {"scheme", {{"type", "penalized"}, {"m", 0.0}}},
                    {"time", {{"dt", 1.0 / 256}, {"horizon", 1.0}, {"recorder_stride", 16}}},
                    {"initial", {{"preset", "standing_mode"}, {"mode", 1}, {"amplitude", 1.0}}},
                    {"diagnostics", json::array({{{"name", "energy"}, {"horizon", 2.0}}})},
                    {"seed", 1},
                    {"ensemble", 1}};
    }
    if (name == "decay-study") {
        return json{{"grid", {{"dim", 1}, {"points", 64}, {"length", 4.0}}},
                    {"manifold", {{"preset", "sphere:3"}}},
                    {"coefficients",
                     {{"parts", json::array({{{"preset", "additive_noise"},
                                              {"value", Vec{0.0, 0.0, 0.4}}}})}}},
                    {"noise", {{"preset", "single_pair"}, {"xi", Vec{3.141592653589793}}}},
                    {"scheme", {{"type", "penalized"}, {"m", 1e4}}},
                    {"time", {{"dt", 0.3 / std::sqrt(8.0e4)}, {"horizon", 0.5},
                              {"recorder_stride", 8}}},
                    {"initial",
                     {{"preset", "tangent_pulse"}, {"pos_amp", 0.5}, {"vel_amp", 1.0},
                      {"width", 0.5}}},
                    {"diagnostics", json::array({{{"name", "constraint"}}})},
                    {"seed", 4242},
                    {"ensemble", 4}};
    }
    throw ConfigError("config: unknown builtin preset '" + name + "'");
}

inline Experiment parse_experiment_file(const std::string& file) {
    std::ifstream in(file);
    json doc;
    if (in) {
        doc = json::parse(in);
    } else {
        try {
            doc = builtin_config(file);
        } catch (const ConfigError&) {
            throw ConfigError("config: cannot open " + file);
        }
    }
    return parse_experiment(doc);
}

inline State Experiment::make_initial(int member) const {
    if (initial_preset == "great_circle") {
        double omega = detail::get_or(initial_args, "omega", 1.0);
        return make_great_circle(grid, *manifold, omega);
    }
    if (initial_preset == "tangent_pulse") {
        return make_tangent_pulse(grid, *manifold, detail::get_or(initial_args, "pos_amp", 0.5),
                                  detail::get_or(initial_args, "vel_amp", 1.0),
                                  detail::get_or(initial_args, "width", 0.5));
    }
    if (initial_preset == "standing_mode") {
        return make_standing_mode(grid, manifold->ambient_dim,
                                  detail::get_or(initial_args, "mode", 1),
                                  detail::get_or(initial_args, "amplitude", 1.0));
    }
    if (initial_preset == "random_tangent") {
        return make_random_tangent(grid, *manifold, detail::get_or(initial_args, "pos_amp", 0.3),
                                   detail::get_or(initial_args, "vel_amp", 0.5),
                                   detail::get_or(initial_args, "modes", 4),
                                   seed ^ (0x51ed2701ULL * (member + 1)));
    }
    throw ConfigError("initial.preset: unknown preset '" + initial_preset + "'");
}

inline Trajectory Experiment::run_member(int member) const {
    StepParams p = params;
    p.trajectory = static_cast<std::uint64_t>(member);
    State init = make_initial(member);
    init.t = 0.0;
    return simulate(grid, init, p, step_count(), recorder_stride);
}

} // namespace sgw
