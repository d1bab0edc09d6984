#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgwave/residuals.hpp"
#include "sgwave/solver.hpp"

namespace sgw {

/// Constant folded into the local energy density, from the recorded sup
/// norms of the constant drift/diffusion channels:
/// max{ ||f_{d+1}||_inf, ||f_{d+1}||_inf^2 + ||g_{d+1}||_inf^2 }.
inline double s_squared(const CoefficientSet& set) {
    return std::max(set.fd1_sup, set.fd1_sup * set.fd1_sup + set.gd1_sup * set.gd1_sup);
}

// ---------------------------------------------------------------------------
// Admissible growth functions

/// Scalar gauge L applied to the local energy, with derivatives and its
/// admissibility constant. Admissible means
///   t L'(t) + max{0, t^2 L''(t)} <= c L(t) for t > 0.
struct LFunction {
    std::string name;
    std::function<double(double)> value, d1, d2;
    double c = 1.0;
};

inline LFunction l_identity() {
    return {"identity", [](double t) { return t; }, [](double) { return 1.0; },
            [](double) { return 0.0; }, 1.0};
}

inline LFunction l_sqrt() {
    return {"sqrt", [](double t) { return std::sqrt(t); },
            [](double t) { return 0.5 / std::sqrt(t); },
            [](double t) { return -0.25 / (t * std::sqrt(t)); }, 0.5};
}

/// Check the growth condition on a log-spaced sample of (0, inf).
inline bool check_L_admissible(const LFunction& l, double c, int samples = 1000,
                               double t_lo = 1e-6, double t_hi = 1e6) {
    double prev = -1.0;
    for (int i = 0; i < samples; ++i) {
        double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / (samples - 1));
        double lv = l.value(t);
        if (!(lv >= 0.0)) return false;
        if (prev > lv * (1.0 + 1e-12)) return false; // must be nondecreasing
        prev = lv;
        double lhs = t * l.d1(t) + std::max(0.0, t * t * l.d2(t));
        if (lhs > c * lv * (1.0 + 1e-12)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Local energies on shrinking balls

/// Ball observation window: at time t the energy integrates over the torus
/// ball B(center, horizon - t).
struct EnergyWindow {
    Vec center;
    double horizon = 1.0;
    bool include_penalty = false;
    double penalty_strength = 0.0;
};

namespace detail {

inline double grad_energy_density(const Field& u, const std::vector<Field>& grads,
                                  std::size_t id) {
    double s = 0.0;
    for (const auto& g : grads) s += dot(u.comps, g.at(id), g.at(id));
    return s;
}

} // namespace detail

/// e(t) = sum over covered cells of {1/2|u|^2 + 1/2|grad u|^2 + 1/2|v|^2
/// [+ m F(u)] + s^2} h^d. A cell is covered iff its center lies in the
/// shrinking ball. Throws if the ball covers no cell.
inline double local_energy(const Grid& grid, const State& st, const EnergyWindow& win,
                           double s_sq, const ManifoldSpec* spec = nullptr) {
    double radius = win.horizon - st.t;
    if (!(radius > 0.0)) throw std::invalid_argument("local_energy: state time past the horizon");
    auto nodes = ball_nodes(grid, win.center.data(), radius);
    if (nodes.empty()) throw std::invalid_argument("local_energy: ball covers no grid cell");
    if (win.include_penalty && spec == nullptr)
        throw std::invalid_argument("local_energy: penalty term requested without a manifold");

    const int n = st.U.comps;
    std::vector<Field> grads(grid.dim, Field(grid, n));
    for (int ax = 0; ax < grid.dim; ++ax) gradient_axis_into(grid, st.U, ax, grads[ax]);

    double acc = 0.0;
    for (std::size_t id : nodes) {
        double cell = 0.5 * dot(n, st.U.at(id), st.U.at(id));
        cell += 0.5 * detail::grad_energy_density(st.U, grads, id);
        cell += 0.5 * dot(n, st.V.at(id), st.V.at(id));
        if (win.include_penalty) cell += win.penalty_strength * spec->penalty_fn(st.U.at(id));
        cell += s_sq;
        acc += cell;
    }
    return acc * cell_volume(grid);
}

/// Sobolev-type squared norm of (u, v) over the covered ball, summed
/// independently of local_energy (used to cross-check the energy as
/// 1/2 ||z||^2 + s^2 * covered volume).
inline double h_norm_sq_ball(const Grid& grid, const State& st, const Vec& center, double radius) {
    auto nodes = ball_nodes(grid, center.data(), radius);
    if (nodes.empty()) throw std::invalid_argument("h_norm_sq_ball: ball covers no grid cell");
    const int n = st.U.comps;
    std::vector<Field> grads(grid.dim, Field(grid, n));
    for (int ax = 0; ax < grid.dim; ++ax) gradient_axis_into(grid, st.U, ax, grads[ax]);
    double acc = 0.0;
    for (std::size_t id : nodes) {
        acc += dot(n, st.U.at(id), st.U.at(id));
        acc += detail::grad_energy_density(st.U, grads, id);
        acc += dot(n, st.V.at(id), st.V.at(id));
    }
    return acc * cell_volume(grid);
}

inline double covered_volume(const Grid& grid, const Vec& center, double radius) {
    return static_cast<double>(ball_nodes(grid, center.data(), radius).size()) *
           cell_volume(grid);
}

// ---------------------------------------------------------------------------
// Momentum densities and velocity reconstruction

/// Pointwise momentum density M^i = <V, A^i U>.
inline Field momentum_density(const Grid& grid, const State& st, const ManifoldSpec& spec,
                              int generator) {
    if (generator < 0 || generator >= spec.generator_count())
        throw std::invalid_argument("momentum_density: invalid generator index");
    const int n = st.U.comps;
    Field out(grid, 1);
    double ap[kMaxAmbient];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        spec.generators[generator].apply(st.U.at(id), ap);
        out(id, 0) = dot(n, st.V.at(id), ap);
    }
    return out;
}

inline double total_momentum(const Grid& grid, const State& st, const ManifoldSpec& spec,
                             int generator) {
    Field m = momentum_density(grid, st, spec, generator);
    return pairwise_sum(m.data) * cell_volume(grid);
}

/// Time series of one momentum density along a recorded trajectory.
struct MomentumSeries {
    int generator = 0;
    std::vector<double> times;
    std::vector<Field> densities;
    std::vector<double> totals;
};

inline MomentumSeries momentum_series(const Trajectory& traj, const ManifoldSpec& spec,
                                      int generator) {
    MomentumSeries s;
    s.generator = generator;
    s.times = traj.times;
    for (const State& st : traj.states) {
        s.densities.push_back(momentum_density(traj.grid, st, spec, generator));
        s.totals.push_back(pairwise_sum(s.densities.back().data) * cell_volume(traj.grid));
    }
    return s;
}

struct ReconstructionReport {
    Field velocity;              // reconstructed from the momentum densities
    double max_error = 0.0;      // against the recorded velocity
    double max_tangency = 0.0;   // retraction-derivative defect of the output
};

/// Rebuild the velocity from the momentum densities,
/// v = sum_ij h_ij(u) M^i A^j u, nodewise. Exact for tangent data.
inline ReconstructionReport reconstruct_velocity(const Grid& grid, const State& st,
                                                 const ManifoldSpec& spec) {
    const int n = st.U.comps;
    ReconstructionReport rep;
    rep.velocity = Field(grid, n);
    double m[kMaxGenerators], back[kMaxAmbient], hw[kMaxAmbient];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        const double* u = st.U.at(id);
        if (!spec.on_manifold(u))
            throw std::domain_error("reconstruct_velocity: off-manifold position at node " +
                                    std::to_string(id));
        momenta_of(spec, u, st.V.at(id), m);
        reconstruct_tangent(spec, u, m, back);
        double* out = rep.velocity.at(id);
        for (int c = 0; c < n; ++c) out[c] = back[c];
        double err = 0.0;
        for (int c = 0; c < n; ++c) err = std::max(err, std::abs(back[c] - st.V(id, c)));
        rep.max_error = std::max(rep.max_error, err);
        retraction_jacobian_apply(spec, u, back, hw);
        double tang = 0.0;
        for (int c = 0; c < n; ++c) tang = std::max(tang, std::abs(hw[c] - back[c]));
        rep.max_tangency = std::max(rep.max_tangency, tang);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Constraint diagnostics

/// L^2 distance of the position field to the unit sphere.
inline double constraint_distance_l2(const Grid& grid, const Field& u) {
    double acc = 0.0;
    for (std::size_t id = 0; id < u.nodes(); ++id) {
        double d = norm2(u.comps, u.at(id)) - 1.0;
        acc += d * d;
    }
    return std::sqrt(acc * cell_volume(grid));
}

/// m * integral of F(u) over the torus.
inline double penalty_mass(const Grid& grid, const Field& u, const ManifoldSpec& spec, double m) {
    double acc = 0.0;
    for (std::size_t id = 0; id < u.nodes(); ++id) acc += spec.penalty_fn(u.at(id));
    return m * acc * cell_volume(grid);
}

// ---------------------------------------------------------------------------
// Ensemble energy inequality

struct EnergyInequalityReport {
    std::vector<double> times;
    std::vector<double> lhs;      // E[1_A sup_{s<=t} L(e(s))]
    double rhs_base = 0.0;        // E[1_A L(e(0))]
    double fitted_C = 0.0;        // smallest C >= 0 with lhs <= 4 e^{Ct} rhs
    double ci_low = 0.0, ci_high = 0.0;
    int members = 0;
};

namespace detail {

inline double fit_exponent(const std::vector<double>& times, const std::vector<double>& lhs,
                           double rhs) {
    double c = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] <= 0.0) continue;
        double ratio = lhs[i] / (4.0 * rhs);
        if (ratio > 1.0) c = std::max(c, std::log(ratio) / times[i]);
    }
    return c;
}

} // namespace detail

/// Monte-Carlo check of the pathwise energy bound
///   E[1_A sup_{s<=t} L(e(s))] <= 4 e^{Ct} E[1_A L(e(0))]
/// over an ensemble of recorded energy series. event_mask selects paths;
/// the report carries the smallest admissible C with a bootstrap interval.
inline EnergyInequalityReport energy_inequality_mc(
    const std::vector<std::vector<double>>& energy_series, const std::vector<double>& times,
    const LFunction& l, const std::vector<char>& event_mask, std::uint64_t bootstrap_seed = 99,
    int bootstrap_rounds = 200) {
    const int paths = static_cast<int>(energy_series.size());
    if (paths < 32)
        throw std::invalid_argument(
            "energy_inequality_mc: need at least 32 ensemble members for statistical power");
    if (static_cast<int>(event_mask.size()) != paths)
        throw std::invalid_argument("energy_inequality_mc: event mask size mismatch");

    const std::size_t nt = times.size();
    // running sup of L(e) per path
    std::vector<std::vector<double>> sup_l(paths, std::vector<double>(nt));
    std::vector<double> l0(paths);
    for (int p = 0; p < paths; ++p) {
        if (energy_series[p].size() != nt)
            throw std::invalid_argument("energy_inequality_mc: ragged energy series");
        double running = -1.0;
        for (std::size_t i = 0; i < nt; ++i) {
            running = std::max(running, l.value(energy_series[p][i]));
            sup_l[p][i] = running;
        }
        l0[p] = l.value(energy_series[p][0]);
    }

    auto estimate = [&](const std::vector<int>& idx) {
        EnergyInequalityReport r;
        r.times = times;
        r.lhs.assign(nt, 0.0);
        double rhs = 0.0;
        int used = 0;
        for (int p : idx) {
            if (!event_mask[p]) continue;
            ++used;
            rhs += l0[p];
            for (std::size_t i = 0; i < nt; ++i) r.lhs[i] += sup_l[p][i];
        }
        if (used == 0) {
            r.fitted_C = 0.0;
            return r;
        }
        rhs /= used;
        for (auto& v : r.lhs) v /= used;
        r.rhs_base = rhs;
        r.members = used;
        r.fitted_C = rhs > 0.0 ? detail::fit_exponent(times, r.lhs, rhs)
                               : (*std::max_element(r.lhs.begin(), r.lhs.end()) > 0.0
                                      ? std::numeric_limits<double>::infinity()
                                      : 0.0);
        return r;
    };

    std::vector<int> all(paths);
    for (int i = 0; i < paths; ++i) all[i] = i;
    EnergyInequalityReport rep = estimate(all);

    std::vector<double> cs(bootstrap_rounds);
    RngStream rng(stream_key(bootstrap_seed, 3, 0));
    std::vector<int> idx(paths);
    for (int b = 0; b < bootstrap_rounds; ++b) {
        for (int i = 0; i < paths; ++i)
            idx[i] = static_cast<int>(rng.next_uniform() * paths) % paths;
        cs[b] = estimate(idx).fitted_C;
    }
    std::sort(cs.begin(), cs.end());
    rep.ci_low = cs[static_cast<std::size_t>(0.025 * bootstrap_rounds)];
    rep.ci_high = cs[static_cast<std::size_t>(0.975 * bootstrap_rounds)];
    return rep;
}

// ---------------------------------------------------------------------------
// Penalty decay study

struct DecayStudyResult {
    std::vector<double> penalties;        // swept spring strengths
    std::vector<double> sup_distance;     // ensemble mean of sup_t L2 distance to M
    std::vector<double> sup_penalty_mass; // ensemble mean of sup_t m * int F
    double distance_slope = 0.0;          // log-log slope of distance vs m
    double mass_ratio = 0.0;              // max/min of sup penalty mass
};

/// Sweep the penalty strength and record how hard the flow is pressed onto
/// the manifold: the distance envelope should shrink like a power of m
/// while m * int F stays of one size. The runner callback produces one
/// simulated trajectory per (m, member).
inline DecayStudyResult penalty_decay_study(
    const std::function<Trajectory(double m, int member)>& run, const std::vector<double>& m_list,
    int ensemble_size, const ManifoldSpec& spec) {
    if (m_list.size() < 4)
        throw std::invalid_argument("penalty_decay_study: need at least 4 penalty levels");
    for (std::size_t i = 2; i < m_list.size(); ++i) {
        double r1 = m_list[i] / m_list[i - 1], r0 = m_list[i - 1] / m_list[i - 2];
        if (std::abs(r1 - r0) > 1e-9 * r0)
            throw std::invalid_argument("penalty_decay_study: levels must be geometric");
    }
    DecayStudyResult res;
    res.penalties = m_list;
    for (double m : m_list) {
        std::vector<double> dists(ensemble_size), masses(ensemble_size);
        for (int e = 0; e < ensemble_size; ++e) {
            Trajectory traj = run(m, e);
            double sup_d = 0.0, sup_m = 0.0;
            for (const State& st : traj.states) {
                sup_d = std::max(sup_d, constraint_distance_l2(traj.grid, st.U));
                sup_m = std::max(sup_m, penalty_mass(traj.grid, st.U, spec, m));
            }
            dists[e] = sup_d;
            masses[e] = sup_m;
        }
        res.sup_distance.push_back(pairwise_sum(dists) / ensemble_size);
        res.sup_penalty_mass.push_back(pairwise_sum(masses) / ensemble_size);
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < m_list.size(); ++i) {
        lx.push_back(std::log(m_list[i]));
        ly.push_back(std::log(std::max(res.sup_distance[i], 1e-300)));
    }
    res.distance_slope = fit_slope(lx, ly);
    double lo = *std::min_element(res.sup_penalty_mass.begin(), res.sup_penalty_mass.end());
    double hi = *std::max_element(res.sup_penalty_mass.begin(), res.sup_penalty_mass.end());
    res.mass_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    return res;
}

} // namespace sgw
