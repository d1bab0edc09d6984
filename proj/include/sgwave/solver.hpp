#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgwave/coefficients.hpp"
#include "sgwave/grid.hpp"
#include "sgwave/manifold.hpp"
#include "sgwave/noise.hpp"

namespace sgw {

/// Thrown when a run goes numerically bad (NaN, blow-up, stiffness).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

enum class Scheme { penalized, projected };

/// Position/velocity pair sampled on the grid.
struct State {
    Field U, V;
    double t = 0.0;

    State() = default;
    State(const Grid& g, int ambient) : U(g, ambient), V(g, ambient) {}
};

struct StepParams {
    double dt = 0.0;
    double penalty = 0.0; // spring strength m; 0 disables the penalty force
    Scheme scheme = Scheme::penalized;
    const ManifoldSpec* manifold = nullptr;   // required when penalty > 0 or projecting
    const CoefficientSet* coeffs = nullptr;   // may be null (free wave)
    const SpectralMeasure* measure = nullptr; // may be null (deterministic)
    std::uint64_t seed = 0;
    std::uint64_t trajectory = 0;

    /// Explicit-scheme stability: wave CFL and the penalty spring
    /// frequency sqrt(8 m) resolved by dt.
    void validate(const Grid& grid) const {
        double limit = grid.spacing() / std::sqrt(static_cast<double>(grid.dim));
        if (!(dt > 0.0)) throw std::invalid_argument("time.dt: must be positive");
        if (dt > limit * (1.0 + 1e-12))
            throw std::invalid_argument("time.dt: violates the CFL bound h/sqrt(d) = " +
                                        std::to_string(limit));
        if (penalty > 0.0 && dt * std::sqrt(8.0 * penalty) > 1.0)
            throw NumericalError(
                "time.dt: penalty spring is too stiff for the explicit step; "
                "need dt * sqrt(8 m) <= 1, reduce dt or the penalty strength");
        if ((penalty > 0.0 || scheme == Scheme::projected) && manifold == nullptr)
            throw std::invalid_argument("scheme: manifold required for penalized/projected runs");
    }
};

namespace detail {

struct StepScratch {
    Field lap;
    std::vector<Field> grad;
};

inline void ensure_scratch(const Grid& g, int ambient, int dim, StepScratch& s) {
    if (s.lap.data.size() != g.node_count() * static_cast<std::size_t>(ambient)) {
        s.lap = Field(g, ambient);
        s.grad.assign(dim, Field(g, ambient));
    }
}

// Drift force lap U - m grad F(U) + f(U, V, grad U) at every node.
inline void force_field_into(const Grid& grid, const State& in, const StepParams& p,
                             StepScratch& scratch, Field& out) {
    const int n = in.U.comps;
    ensure_scratch(grid, n, grid.dim, scratch);
    laplacian_into(grid, in.U, scratch.lap);
    if (p.coeffs)
        for (int ax = 0; ax < grid.dim; ++ax) gradient_axis_into(grid, in.U, ax, scratch.grad[ax]);

    const std::size_t nn = in.U.nodes();
    double gf[kMaxAmbient];
    const double* gptr[3] = {nullptr, nullptr, nullptr};
    for (std::size_t id = 0; id < nn; ++id) {
        const double* u = in.U.at(id);
        const double* lap = scratch.lap.at(id);
        double* o = out.at(id);
        for (int c = 0; c < n; ++c) o[c] = lap[c];
        if (p.penalty > 0.0) {
            p.manifold->penalty_grad_fn(u, gf);
            axpy(n, -p.penalty, gf, o);
        }
        if (p.coeffs) {
            for (int ax = 0; ax < grid.dim; ++ax) gptr[ax] = scratch.grad[ax].at(id);
            assemble_drift(*p.coeffs, u, in.V.at(id), gptr, gf);
            axpy(n, 1.0, gf, o);
        }
    }
}

// One explicit position-velocity sweep:
//   V+ = V + dt [lap U - m grad F(U) + f(U,V,grad U)] + g(U,V,grad U) dW
//   U+ = U + dt V+
inline void raw_step(const Grid& grid, const State& in, const StepParams& p,
                     const NoiseIncrement* inc, StepScratch& scratch, State& out) {
    const int n = in.U.comps;
    ensure_scratch(grid, n, grid.dim, scratch);
    laplacian_into(grid, in.U, scratch.lap);
    const bool need_grad =
        p.coeffs && (p.coeffs->has_fk() || p.coeffs->has_gk() || p.coeffs->f0 || p.coeffs->g0 ||
                     p.coeffs->fd1 || p.coeffs->gd1);
    if (need_grad)
        for (int ax = 0; ax < grid.dim; ++ax) gradient_axis_into(grid, in.U, ax, scratch.grad[ax]);

    const std::size_t nn = in.U.nodes();
    double force[kMaxAmbient], gf[kMaxAmbient], diff[kMaxAmbient];
    const double* gptr[3] = {nullptr, nullptr, nullptr};

    for (std::size_t id = 0; id < nn; ++id) {
        const double* u = in.U.at(id);
        const double* v = in.V.at(id);
        const double* lap = scratch.lap.at(id);
        for (int c = 0; c < n; ++c) force[c] = lap[c];
        if (p.penalty > 0.0) {
            p.manifold->penalty_grad_fn(u, gf);
            axpy(n, -p.penalty, gf, force);
        }
        if (p.coeffs) {
            for (int ax = 0; ax < grid.dim; ++ax) gptr[ax] = scratch.grad[ax].at(id);
            assemble_drift(*p.coeffs, u, v, gptr, gf);
            axpy(n, 1.0, gf, force);
        }
        double* vo = out.V.at(id);
        for (int c = 0; c < n; ++c) vo[c] = v[c] + p.dt * force[c];
        if (inc && p.coeffs) {
            assemble_diffusion(*p.coeffs, u, v, gptr, diff);
            axpy(n, inc->values(id, 0), diff, vo);
        }
        double* uo = out.U.at(id);
        for (int c = 0; c < n; ++c) uo[c] = u[c] + p.dt * vo[c];
    }
    out.t = in.t + p.dt;
}

} // namespace detail

/// Penalized explicit step. The deterministic free part (no coefficients,
/// no penalty) is the symplectic position-velocity leapfrog.
inline State step(const Grid& grid, const State& in, const StepParams& params,
                  const NoiseIncrement* inc = nullptr) {
    params.validate(grid);
    if (inc && std::abs(inc->dt - params.dt) > 1e-15 * params.dt)
        throw std::invalid_argument("step: increment dt does not match params.dt");
    State out(grid, in.U.comps);
    detail::StepScratch scratch;
    detail::raw_step(grid, in, params, inc, scratch, out);
    return out;
}

/// Free step followed by nodewise renormalization of the position and a
/// norm-preserving tangent projection of the velocity. Keeping the speed
/// under projection is what makes the scheme second order along geodesics;
/// the plain projection damps |V| by cos of the step angle every step.
inline State step_projected(const Grid& grid, const State& in, const StepParams& params,
                            const NoiseIncrement* inc = nullptr) {
    StepParams p = params;
    p.penalty = 0.0;
    p.validate(grid);
    if (params.manifold == nullptr || !params.manifold->is_sphere)
        throw std::invalid_argument("step_projected: sphere target required");
    State out(grid, in.U.comps);
    detail::StepScratch scratch;
    detail::raw_step(grid, in, p, inc, scratch, out);

    const int n = in.U.comps;
    const std::size_t nn = in.U.nodes();
    for (std::size_t id = 0; id < nn; ++id) {
        double* u = out.U.at(id);
        double r = norm2(n, u);
        if (r < 0.5)
            throw NumericalError("step_projected: |U| < 0.5 at node " + std::to_string(id));
        scale(n, 1.0 / r, u);
        double* v = out.V.at(id);
        double speed = norm2(n, v);
        double c = dot(n, v, u);
        for (int k = 0; k < n; ++k) v[k] -= c * u[k];
        double pr = norm2(n, v);
        if (pr > 1e-14 * std::max(1.0, speed)) scale(n, speed / pr, v);
    }
    out.t = in.t + params.dt;
    return out;
}

/// Recorded run: states at every recording stride plus the per-step mode
/// draws, which is everything needed to rebuild the stochastic integrals.
struct Trajectory {
    Grid grid;
    StepParams params;
    int record_stride = 1;
    std::vector<double> times;
    std::vector<State> states;
    std::vector<std::vector<double>> draws; // one entry per step

    const State& initial() const { return states.front(); }
    const State& final() const { return states.back(); }
    std::size_t steps() const { return draws.size(); }
};

using StateObserver = std::function<void(std::size_t step, const State&)>;

/// Advance n_steps from the initial state. Fully reproducible from
/// (seed, trajectory index, config); aborts with the failing step index if
/// the state stops being finite.
///
/// The stepping kernel stores velocities on the staggered half-step grid,
/// so the supplied whole-step velocity is shifted by a backward half kick
/// before the loop. That keeps the position sequence second-order accurate
/// at every horizon.
inline Trajectory simulate(const Grid& grid, const State& initial, const StepParams& params,
                           std::size_t n_steps, int record_stride = 1,
                           const StateObserver& observer = {}) {
    params.validate(grid);
    if (record_stride < 1) throw std::invalid_argument("recorder stride must be >= 1");
    if (!initial.U.finite() || !initial.V.finite())
        throw NumericalError("simulate: initial state contains non-finite values");

    State start = initial;
    if (n_steps > 0) {
        detail::StepScratch half;
        Field force(grid, initial.U.comps);
        StepParams fp = params;
        if (fp.scheme == Scheme::projected) fp.penalty = 0.0;
        detail::force_field_into(grid, initial, fp, half, force);
        for (std::size_t k = 0; k < start.V.data.size(); ++k)
            start.V.data[k] -= 0.5 * params.dt * force.data[k];
        if (params.scheme == Scheme::projected) {
            // the shifted velocity must stay in the tangent bundle
            const int n = start.U.comps;
            for (std::size_t id = 0; id < start.U.nodes(); ++id) {
                const double* u = start.U.at(id);
                double* v = start.V.at(id);
                double c = dot(n, v, u) / dot(n, u, u);
                for (int k = 0; k < n; ++k) v[k] -= c * u[k];
            }
        }
    }

    Trajectory traj;
    traj.grid = grid;
    traj.params = params;
    traj.record_stride = record_stride;
    traj.times.push_back(start.t);
    traj.states.push_back(start);
    if (observer) observer(0, start);

    State cur = start;
    State next(grid, initial.U.comps);
    detail::StepScratch scratch;
    const bool stochastic = params.measure != nullptr && params.coeffs != nullptr &&
                            (params.coeffs->g0 || params.coeffs->has_gk() || params.coeffs->gd1);

    for (std::size_t s = 0; s < n_steps; ++s) {
        NoiseIncrement inc;
        const NoiseIncrement* incp = nullptr;
        if (stochastic) {
            inc = sample_increment(*params.measure, grid, params.dt, params.seed,
                                   params.trajectory, s);
            incp = &inc;
            traj.draws.push_back(inc.draws);
        } else {
            traj.draws.emplace_back();
        }
        if (params.scheme == Scheme::projected)
            next = step_projected(grid, cur, params, incp);
        else
            detail::raw_step(grid, cur, params, incp, scratch, next);

        if (!next.U.finite() || !next.V.finite())
            throw NumericalError("simulate: non-finite state at step " + std::to_string(s + 1));
        std::swap(cur, next);
        if ((s + 1) % static_cast<std::size_t>(record_stride) == 0 || s + 1 == n_steps) {
            traj.times.push_back(cur.t);
            traj.states.push_back(cur);
        }
        if (observer) observer(s + 1, cur);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Initial data

/// Compactly supported smooth bump, peak 1 at 0, zero for |s| >= 1.
inline double bump1(double s) {
    double r2 = s * s;
    if (r2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r2));
}

/// Space-constant great circle: U = p0, V = omega * A p0 for the rotation
/// generator in the (axis_a, axis_b) coordinate plane. The exact solution
/// rotates p0 at angular speed omega.
inline State make_great_circle(const Grid& grid, const ManifoldSpec& spec, double omega,
                               int axis_a = 0, int axis_b = 1) {
    const int n = spec.ambient_dim;
    State st(grid, n);
    Vec p0(n, 0.0);
    p0[axis_a] = 1.0;
    Vec v0(n, 0.0);
    v0[axis_b] = omega;
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        for (int c = 0; c < n; ++c) {
            st.U(id, c) = p0[c];
            st.V(id, c) = v0[c];
        }
    }
    return st;
}

/// Localized tangent disturbance on the sphere: the position is rotated by
/// a bump profile inside radius `width` around `center`, the velocity is a
/// bump along a generator orbit. Data lies exactly in the tangent bundle.
inline State make_tangent_pulse(const Grid& grid, const ManifoldSpec& spec, double pos_amp,
                                double vel_amp, double width, double center = -1.0) {
    const int n = spec.ambient_dim;
    if (n < 3) throw std::invalid_argument("tangent_pulse: ambient dimension >= 3 required");
    State st(grid, n);
    double c0 = center < 0.0 ? 0.5 * grid.length : center;
    double x[3], cx[3] = {c0, c0, c0};
    double ap[kMaxAmbient];
    const Mat& kick = spec.generators[sphere_generator_index(n, 1, 2)];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        double s = grid.torus_distance(x, cx) / width;
        double theta = pos_amp * bump1(s);
        double* u = st.U.at(id);
        for (int c = 0; c < n; ++c) u[c] = 0.0;
        u[0] = std::cos(theta);
        u[1] = std::sin(theta);
        kick.apply(u, ap); // tangent at u
        double* v = st.V.at(id);
        for (int c = 0; c < n; ++c) v[c] = vel_amp * bump1(s) * ap[c];
    }
    return st;
}

/// Eigenmode data for unconstrained (penalty-free) wave runs: the first
/// component carries cos(2 pi k x / L), everything else is zero.
inline State make_standing_mode(const Grid& grid, int ambient, int mode, double amplitude) {
    State st(grid, ambient);
    double x[3];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        st.U(id, 0) =
            amplitude * std::cos(2.0 * 3.141592653589793 * mode * x[0] / grid.length);
    }
    return st;
}

/// Smooth random field in the tangent bundle: low-mode Fourier noise
/// projected pointwise. Deterministic in the seed.
inline State make_random_tangent(const Grid& grid, const ManifoldSpec& spec, double pos_amp,
                                 double vel_amp, int modes, std::uint64_t seed) {
    const int n = spec.ambient_dim;
    State st(grid, n);
    RngStream rng(stream_key(seed, 7, 0));
    struct Mode {
        double k[3];
        double phase, amp;
        int comp;
    };
    std::vector<Mode> pos_modes, vel_modes;
    auto draw_modes = [&](std::vector<Mode>& out, double amp) {
        for (int m = 0; m < modes; ++m) {
            Mode md{};
            for (int ax = 0; ax < grid.dim; ++ax) {
                int kk = 1 + static_cast<int>(rng.next_uniform() * 3.0);
                md.k[ax] = 2.0 * 3.14159265358979323846 * kk / grid.length;
            }
            md.phase = rng.next_uniform() * 6.283185307179586;
            md.amp = amp * rng.next_gauss() / modes;
            md.comp = static_cast<int>(rng.next_uniform() * n) % n;
            out.push_back(md);
        }
    };
    draw_modes(pos_modes, pos_amp);
    draw_modes(vel_modes, vel_amp);

    double x[3], w[kMaxAmbient], v[kMaxAmbient];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        for (int c = 0; c < n; ++c) {
            w[c] = c == 0 ? 1.0 : 0.0;
            v[c] = 0.0;
        }
        for (const auto& md : pos_modes) {
            double phase = md.phase;
            for (int ax = 0; ax < grid.dim; ++ax) phase += md.k[ax] * x[ax];
            w[md.comp] += md.amp * std::cos(phase);
        }
        for (const auto& md : vel_modes) {
            double phase = md.phase;
            for (int ax = 0; ax < grid.dim; ++ax) phase += md.k[ax] * x[ax];
            v[md.comp] += md.amp * std::cos(phase);
        }
        double r = norm2(n, w);
        double* u = st.U.at(id);
        for (int c = 0; c < n; ++c) u[c] = w[c] / r;
        double* vv = st.V.at(id);
        tangent_project(spec, u, v, vv);
    }
    return st;
}

// ---------------------------------------------------------------------------
// Conserved quantities of the discrete scheme

/// The discrete wave energy exactly conserved by the free leapfrog across
/// a step pair (U_j, .) -> (U_{j+1}, V_{j+1}):
///   1/2 ||V_{j+1}||^2 - 1/2 <lap U_j, U_{j+1}>, summed over the grid.
/// With a manifold and spring strength the midpoint penalty term is added;
/// the total then holds to a bounded second-order wobble instead of
/// round-off.
inline double staggered_energy(const Grid& grid, const State& prev, const State& next,
                               const ManifoldSpec* spec = nullptr, double penalty = 0.0) {
    const int n = prev.U.comps;
    double hd = cell_volume(grid);
    double e = 0.0;
    Field lap = laplacian(grid, prev.U);
    for (std::size_t id = 0; id < next.V.nodes(); ++id) {
        e += 0.5 * dot(n, next.V.at(id), next.V.at(id));
        e -= 0.5 * dot(n, lap.at(id), next.U.at(id));
        if (spec && penalty > 0.0)
            e += 0.5 * penalty *
                 (spec->penalty_fn(prev.U.at(id)) + spec->penalty_fn(next.U.at(id)));
    }
    return e * hd;
}

} // namespace sgw
