#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "sgwave/config.hpp"

namespace sgw {

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Run fn(i) for i in [0, count) on a small worker pool. Results must be
/// written into per-index slots; the call order is unspecified but every
/// index runs exactly once, so output is thread-count independent.
inline void parallel_for(int count, unsigned threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    unsigned use = std::min<unsigned>(threads, static_cast<unsigned>(count));
    std::vector<std::exception_ptr> errors(use);
    for (unsigned t = 0; t < use; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Time-series sink: one CSV per recorder, deterministic formatting.
struct CsvWriter {
    std::ofstream out;
    explicit CsvWriter(const std::filesystem::path& p, const std::vector<std::string>& cols)
        : out(p) {
        for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
        out << "\n";
    }
    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            out << (i ? "," : "") << detail::fmt_g17(vals[i]);
        out << "\n";
    }
};

/// Execute one configured experiment and write the artifact directory:
/// the canonical config echo, its hash, per-diagnostic CSV series and a
/// summary JSON. Returns the diagnostics summary.
inline json run_experiment(const Experiment& ex, const std::filesystem::path& out_dir,
                           unsigned threads = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string hash = config_hash(ex.raw);
    {
        std::ofstream echo(out_dir / "config.json");
        echo << ex.raw.dump(2) << "\n";
        std::ofstream h(out_dir / "config.hash");
        h << hash << "\n";
    }

    std::vector<Trajectory> members(ex.ensemble);
    parallel_for(ex.ensemble, threads, [&](int m) { members[m] = ex.run_member(m); });

    json summary;
    summary["config_hash"] = hash;
    summary["members"] = ex.ensemble;
    summary["coefficient_extension"] = "nearest_point_radial_cutoff";
    double s2 = s_squared(*ex.coeffs);
    summary["s_squared"] = s2;

    const Trajectory& lead = members.front();
    for (const json& d : ex.diagnostics) {
        std::string name = d.at("name").get<std::string>();
        if (name == "momentum") {
            int gen = detail::get_or(d, "generator", 0);
            CsvWriter csv(out_dir / ("momentum_" + std::to_string(gen) + ".csv"),
                          {"time", "total_momentum"});
            double m0 = 0.0, drift = 0.0;
            for (std::size_t k = 0; k < lead.states.size(); ++k) {
                double m = total_momentum(lead.grid, lead.states[k], *ex.manifold, gen);
                if (k == 0) m0 = m;
                drift = std::max(drift, std::abs(m - m0));
                csv.row({lead.times[k], m});
            }
            summary["momentum_drift_rel"] =
                std::abs(m0) > 0 ? drift / std::abs(m0) : drift;
        } else if (name == "energy") {
            EnergyWindow win;
            win.center = detail::get_or(d, "center", Vec(ex.grid.dim, 0.5 * ex.grid.length));
            win.horizon = detail::get_or(d, "horizon", ex.horizon * 2.0);
            win.include_penalty = detail::get_or(d, "include_penalty", false);
            win.penalty_strength = ex.params.penalty;
            CsvWriter csv(out_dir / "energy.csv", {"time", "mean_local_energy"});
            for (std::size_t k = 0; k < lead.times.size(); ++k) {
                std::vector<double> es(members.size());
                for (std::size_t m = 0; m < members.size(); ++m)
                    es[m] = local_energy(ex.grid, members[m].states[k], win, s2,
                                         ex.manifold.get());
                csv.row({lead.times[k], pairwise_sum(es) / static_cast<double>(es.size())});
            }
            // constant-term bookkeeping: the covered-volume integral actually
            // used, next to the half-horizon variant, for comparison
            summary["s2_term_volume_integral"] = s2 * covered_volume(ex.grid, win.center,
                                                                     win.horizon);
            summary["s2_term_half_horizon"] = 0.5 * win.horizon * s2;
        } else if (name == "energy_inequality") {
            EnergyWindow win;
            win.center = detail::get_or(d, "center", Vec(ex.grid.dim, 0.5 * ex.grid.length));
            win.horizon = detail::get_or(d, "horizon", ex.horizon * 2.0);
            LFunction l = detail::get_or<std::string>(d, "L", "identity") == "sqrt" ? l_sqrt()
                                                                                    : l_identity();
            double delta = detail::get_or(d, "event_threshold",
                                          std::numeric_limits<double>::infinity());
            std::vector<std::vector<double>> series;
            std::vector<char> mask;
            for (const auto& t : members) {
                std::vector<double> es;
                for (const State& st : t.states) es.push_back(local_energy(ex.grid, st, win, s2));
                series.push_back(std::move(es));
                double norm0 = std::sqrt(
                    h_norm_sq_ball(ex.grid, t.states.front(), win.center, win.horizon));
                mask.push_back(norm0 <= delta ? 1 : 0);
            }
            auto rep = energy_inequality_mc(series, lead.times, l, mask, ex.seed ^ 0xb0070ULL);
            summary["energy_inequality"] = {{"L", l.name},
                                            {"estimate", rep.fitted_C},
                                            {"ci", {rep.ci_low, rep.ci_high}},
                                            {"members", rep.members}};
        } else if (name == "constraint") {
            CsvWriter csv(out_dir / "constraint.csv",
                          {"time", "l2_distance", "penalty_mass"});
            double supd = 0.0;
            for (std::size_t k = 0; k < lead.states.size(); ++k) {
                double dist = constraint_distance_l2(lead.grid, lead.states[k].U);
                double pm = penalty_mass(lead.grid, lead.states[k].U, *ex.manifold,
                                         std::max(ex.params.penalty, 1.0));
                supd = std::max(supd, dist);
                csv.row({lead.times[k], dist, pm});
            }
            summary["sup_constraint_distance"] = supd;
        } else {
            throw ConfigError("diagnostics: unknown diagnostic '" + name + "'");
        }
    }
    std::ofstream js(out_dir / "diagnostics.json");
    js << summary.dump(2) << "\n";
    return summary;
}

// ---------------------------------------------------------------------------
// Convergence studies

struct RateTable {
    std::vector<double> levels; // the swept quantity (dt, h or m)
    std::vector<double> errors; // error or distance per level
    double order = 0.0;         // fitted -d log(err) / d log(level)
};

inline void write_rate_table(const RateTable& t, const std::filesystem::path& file,
                             const std::string& level_name) {
    CsvWriter csv(file, {level_name, "error"});
    for (std::size_t i = 0; i < t.levels.size(); ++i) csv.row({t.levels[i], t.errors[i]});
}

inline void check_geometric(const std::vector<double>& levels) {
    if (levels.size() < 3)
        throw std::invalid_argument("convergence: need at least 3 geometric levels");
    for (std::size_t i = 2; i < levels.size(); ++i) {
        double r1 = levels[i] / levels[i - 1], r0 = levels[i - 1] / levels[i - 2];
        if (std::abs(r1 - r0) > 1e-9 * std::abs(r0))
            throw std::invalid_argument("convergence: levels must be geometric");
    }
}

/// Fit err ~ C * level^order.
inline double fitted_order(const std::vector<double>& levels, const std::vector<double>& errors) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        lx.push_back(std::log(levels[i]));
        ly.push_back(std::log(std::max(errors[i], 1e-300)));
    }
    return fit_slope(lx, ly);
}

/// Refinement study along one axis of a configured experiment:
///   dt — halve the step, error against a much finer reference run;
///   h  — stencil defect on the box eigenmode under mesh refinement;
///   m  — penalty sweep, distance-to-manifold envelope and its slope.
/// The returned table carries the fitted order (slope sign convention:
/// err ~ level^order for dt/h, distance ~ m^order for m).
inline RateTable convergence_study(const json& doc, const std::string& axis, int levels) {
    Experiment base = parse_experiment(doc);
    RateTable table;

    if (axis == "dt") {
        double dt0 = base.params.dt;
        std::vector<double> lv;
        for (int l = 0; l < levels; ++l) lv.push_back(dt0 / (1 << l));
        check_geometric(lv);
        std::vector<Trajectory> runs;
        for (int l = 0; l < levels; ++l) {
            json d = doc;
            d["time"]["dt"] = lv[l];
            runs.push_back(parse_experiment(d).run_member(0));
        }
        json dref = doc;
        dref["time"]["dt"] = dt0 / (1 << (levels + 1));
        Trajectory ref = parse_experiment(dref).run_member(0);
        for (int l = 0; l < levels; ++l) {
            const State& fin = runs[l].final();
            double err = 0.0;
            for (std::size_t k = 0; k < fin.U.data.size(); ++k)
                err += std::pow(fin.U.data[k] - ref.final().U.data[k], 2);
            table.levels.push_back(lv[l]);
            table.errors.push_back(std::sqrt(err * cell_volume(base.grid)));
        }
        table.order = fitted_order(table.levels, table.errors);
        return table;
    }
    if (axis == "h") {
        for (int l = 0; l < levels; ++l) {
            Grid g(base.grid.dim, base.grid.points * (1 << l), base.grid.length);
            Field u(g, 1);
            double k0 = 2.0 * 3.141592653589793 / g.length;
            double x[3];
            for (std::size_t id = 0; id < u.nodes(); ++id) {
                g.coords(id, x);
                u(id, 0) = std::sin(k0 * x[0]);
            }
            Field lap = laplacian(g, u);
            double err = 0.0;
            for (std::size_t id = 0; id < u.nodes(); ++id)
                err = std::max(err, std::abs(lap(id, 0) + k0 * k0 * u(id, 0)));
            table.levels.push_back(g.spacing());
            table.errors.push_back(err);
        }
        table.order = fitted_order(table.levels, table.errors);
        return table;
    }
    if (axis == "m") {
        std::vector<double> m_list;
        double m0 = std::max(base.params.penalty, 100.0);
        for (int l = 0; l < levels; ++l) m_list.push_back(m0 * std::pow(10.0, l));
        auto run = [&](double m, int member) {
            json d = doc;
            d["scheme"]["m"] = m;
            d["time"]["dt"] = 0.3 / std::sqrt(8.0 * m);
            return parse_experiment(d).run_member(member);
        };
        auto res = penalty_decay_study(run, m_list, std::max(base.ensemble, 4), *base.manifold);
        table.levels = res.penalties;
        table.errors = res.sup_distance;
        table.order = res.distance_slope;
        return table;
    }
    throw ConfigError("convergence: axis must be dt, h or m");
}

} // namespace sgw
