#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sgwave/solver.hpp"

namespace sgw {

/// Smooth map Y: R^n -> R^n with its derivative, used by the integral
/// identity checks. The jacobian callback applies dY(u) to a direction.
struct SmoothMap {
    std::function<void(const double*, double*)> value;
    std::function<void(const double*, const double*, double*)> jacobian;
};

inline SmoothMap linear_map(const Mat& a) {
    return SmoothMap{
        [a](const double* u, double* out) { a.apply(u, out); },
        [a](const double*, const double* xi, double* out) { a.apply(xi, out); },
    };
}

inline SmoothMap constant_map(const Vec& c) {
    int n = static_cast<int>(c.size());
    return SmoothMap{
        [c, n](const double*, double* out) {
            for (int k = 0; k < n; ++k) out[k] = c[k];
        },
        [n](const double*, const double*, double* out) {
            for (int k = 0; k < n; ++k) out[k] = 0.0;
        },
    };
}

namespace detail {

// <a, b> phi summed over the grid with the cell weight.
inline double trilinear(const Grid& grid, const Field& a, const Field& b, const Field& phi) {
    double s = 0.0;
    const int n = a.comps;
    for (std::size_t id = 0; id < a.nodes(); ++id)
        s += dot(n, a.at(id), b.at(id)) * phi(id, 0);
    return s * cell_volume(grid);
}

// Drift field of the recorded run at one snapshot:
// lap U - m grad F(U) + f(U, V, grad U).
inline Field drift_field(const Trajectory& traj, std::size_t k) {
    const Grid& grid = traj.grid;
    const State& st = traj.states[k];
    const int n = st.U.comps;
    Field out = laplacian(grid, st.U);
    std::vector<Field> grads;
    const CoefficientSet* cs = traj.params.coeffs;
    if (cs) {
        grads.assign(grid.dim, Field(grid, n));
        for (int ax = 0; ax < grid.dim; ++ax) gradient_axis_into(grid, st.U, ax, grads[ax]);
    }
    double gf[kMaxAmbient];
    const double* gptr[3] = {nullptr, nullptr, nullptr};
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        double* o = out.at(id);
        if (traj.params.penalty > 0.0) {
            traj.params.manifold->penalty_grad_fn(st.U.at(id), gf);
            axpy(n, -traj.params.penalty, gf, o);
        }
        if (cs) {
            for (int ax = 0; ax < grid.dim; ++ax) gptr[ax] = grads[ax].at(id);
            assemble_drift(*cs, st.U.at(id), st.V.at(id), gptr, gf);
            axpy(n, 1.0, gf, o);
        }
    }
    return out;
}

inline Field diffusion_field(const Trajectory& traj, std::size_t k) {
    const Grid& grid = traj.grid;
    const State& st = traj.states[k];
    const int n = st.U.comps;
    Field out(grid, n);
    const CoefficientSet* cs = traj.params.coeffs;
    if (!cs) return out;
    std::vector<Field> grads(grid.dim, Field(grid, n));
    for (int ax = 0; ax < grid.dim; ++ax) gradient_axis_into(grid, st.U, ax, grads[ax]);
    double gf[kMaxAmbient];
    const double* gptr[3] = {nullptr, nullptr, nullptr};
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        for (int ax = 0; ax < grid.dim; ++ax) gptr[ax] = grads[ax].at(id);
        assemble_diffusion(*cs, st.U.at(id), st.V.at(id), gptr, gf);
        double* o = out.at(id);
        for (int c = 0; c < n; ++c) o[c] = gf[c];
    }
    return out;
}

inline void map_field(const SmoothMap& y, const Field& u, Field& out) {
    for (std::size_t id = 0; id < u.nodes(); ++id) y.value(u.at(id), out.at(id));
}

inline void check_residual_pre(const Trajectory& traj, const Field& phi, std::size_t t_steps,
                               int stride) {
    if (traj.record_stride != 1)
        throw std::invalid_argument("residual: trajectory must be recorded at stride 1");
    if (stride < 1) throw std::invalid_argument("residual: quadrature stride must be >= 1");
    if (t_steps > traj.steps() || t_steps % static_cast<std::size_t>(stride) != 0)
        throw std::invalid_argument("residual: t must be a stride multiple within the record");
    if (phi.comps != 1 || phi.nodes() != traj.grid.node_count())
        throw std::invalid_argument("residual: test function does not match the grid");
}

// Aggregated Wiener increment over steps [first, first+count).
inline Field aggregate_increment(const Trajectory& traj, std::size_t first, std::size_t count) {
    Field acc(traj.grid, 1);
    const SpectralMeasure* mu = traj.params.measure;
    for (std::size_t j = first; j < first + count; ++j) {
        if (traj.draws[j].empty()) continue;
        Field w = synthesize_increment(*mu, traj.grid, traj.params.dt, traj.draws[j]);
        for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += w.data[k];
    }
    return acc;
}

} // namespace detail

/// Defect of the pathwise integral identity for b(V(t), Y(U(t)), phi)
/// evaluated on a recorded trajectory. Time integrals use the trapezoid
/// rule on the observation grid of spacing stride * dt; the stochastic
/// integral is rebuilt from the recorded mode draws with left-point
/// evaluation at the observation resolution. For linear Y = A this is the
/// momentum identity; stride > 1 measures the identity at a coarser
/// observation scale than the stepping scale.
inline double ito_residual(const Trajectory& traj, const SmoothMap& y, const Field& phi,
                           std::size_t t_steps, int stride = 1) {
    if (!y.value || !y.jacobian)
        throw std::invalid_argument("ito_residual: map needs a value and a derivative");
    detail::check_residual_pre(traj, phi, t_steps, stride);
    const Grid& grid = traj.grid;
    const int n = traj.states[0].U.comps;

    Field yu(grid, n), yv(grid, n);
    detail::map_field(y, traj.states[t_steps].U, yu);
    double lhs = detail::trilinear(grid, traj.states[t_steps].V, yu, phi);
    detail::map_field(y, traj.states[0].U, yu);
    lhs -= detail::trilinear(grid, traj.states[0].V, yu, phi);

    const double coarse_dt = traj.params.dt * stride;
    const std::size_t levels = t_steps / static_cast<std::size_t>(stride);

    double rhs = 0.0;
    double prev_integrand = 0.0;
    bool stochastic = false;
    for (const auto& d : traj.draws)
        stochastic = stochastic || !d.empty();

    for (std::size_t k = 0; k <= levels; ++k) {
        std::size_t j = k * static_cast<std::size_t>(stride);
        const State& st = traj.states[j];
        detail::map_field(y, st.U, yu);

        Field h0 = detail::drift_field(traj, j);
        double integrand = detail::trilinear(grid, h0, yu, phi);
        // derivative coupling <V, Y'(U) V>
        for (std::size_t id = 0; id < st.U.nodes(); ++id)
            y.jacobian(st.U.at(id), st.V.at(id), yv.at(id));
        integrand += detail::trilinear(grid, st.V, yv, phi);

        if (k > 0) rhs += 0.5 * coarse_dt * (prev_integrand + integrand);
        prev_integrand = integrand;

        if (stochastic && k < levels) {
            Field dw = detail::aggregate_increment(traj, j, stride);
            Field gf = detail::diffusion_field(traj, j);
            for (std::size_t id = 0; id < gf.nodes(); ++id) {
                double w = dw(id, 0);
                double* g = gf.at(id);
                for (int c = 0; c < n; ++c) g[c] *= w;
            }
            rhs += detail::trilinear(grid, gf, yu, phi);
        }
    }
    return std::abs(lhs - rhs);
}

/// Same defect for the momentum density <V, A^i U>. Shares the evaluation
/// path with ito_residual so the two agree bit for bit on linear maps.
inline double momentum_weak_residual(const Trajectory& traj, const ManifoldSpec& spec,
                                     int generator, const Field& phi, std::size_t t_steps,
                                     int stride = 1) {
    if (generator < 0 || generator >= spec.generator_count())
        throw std::invalid_argument("momentum_weak_residual: invalid generator index");
    return ito_residual(traj, linear_map(spec.generators[generator]), phi, t_steps, stride);
}

struct WeakResiduals {
    double u_residual = 0.0;
    double v_residual = 0.0;
};

/// Defects of the two weak identities of the recorded pair (U, V) against a
/// test function: the position equation pairs U with phi, the velocity
/// equation pairs the drift and the rebuilt stochastic integral with phi.
inline WeakResiduals weak_form_residual(const Trajectory& traj, const Field& phi,
                                        std::size_t t_steps, int stride = 1) {
    detail::check_residual_pre(traj, phi, t_steps, stride);
    const Grid& grid = traj.grid;
    const int n = traj.states[0].U.comps;
    const double hd = cell_volume(grid);
    const double coarse_dt = traj.params.dt * stride;
    const std::size_t levels = t_steps / static_cast<std::size_t>(stride);

    auto pair_phi = [&](const Field& f, double* out) {
        for (int c = 0; c < n; ++c) out[c] = 0.0;
        for (std::size_t id = 0; id < f.nodes(); ++id) {
            const double w = phi(id, 0);
            const double* v = f.at(id);
            for (int c = 0; c < n; ++c) out[c] += v[c] * w;
        }
        for (int c = 0; c < n; ++c) out[c] *= hd;
    };

    double ru[kMaxAmbient], rv[kMaxAmbient], tmp[kMaxAmbient];
    double prev_u[kMaxAmbient], prev_v[kMaxAmbient];

    pair_phi(traj.states[t_steps].U, ru);
    pair_phi(traj.states[0].U, tmp);
    for (int c = 0; c < n; ++c) ru[c] -= tmp[c];
    pair_phi(traj.states[t_steps].V, rv);
    pair_phi(traj.states[0].V, tmp);
    for (int c = 0; c < n; ++c) rv[c] -= tmp[c];

    bool stochastic = false;
    for (const auto& d : traj.draws)
        stochastic = stochastic || !d.empty();

    for (std::size_t k = 0; k <= levels; ++k) {
        std::size_t j = k * static_cast<std::size_t>(stride);
        double iu[kMaxAmbient], iv[kMaxAmbient];
        pair_phi(traj.states[j].V, iu);
        Field h0 = detail::drift_field(traj, j);
        pair_phi(h0, iv);
        if (k > 0)
            for (int c = 0; c < n; ++c) {
                ru[c] -= 0.5 * coarse_dt * (prev_u[c] + iu[c]);
                rv[c] -= 0.5 * coarse_dt * (prev_v[c] + iv[c]);
            }
        for (int c = 0; c < n; ++c) {
            prev_u[c] = iu[c];
            prev_v[c] = iv[c];
        }
        if (stochastic && k < levels) {
            Field dw = detail::aggregate_increment(traj, j, stride);
            Field gf = detail::diffusion_field(traj, j);
            for (std::size_t id = 0; id < gf.nodes(); ++id) {
                double w = dw(id, 0);
                double* g = gf.at(id);
                for (int c = 0; c < n; ++c) g[c] *= w;
            }
            pair_phi(gf, tmp);
            for (int c = 0; c < n; ++c) rv[c] -= tmp[c];
        }
    }

    WeakResiduals res;
    for (int c = 0; c < n; ++c) {
        res.u_residual = std::max(res.u_residual, std::abs(ru[c]));
        res.v_residual = std::max(res.v_residual, std::abs(rv[c]));
    }
    return res;
}

/// Projection of the vector residual of the velocity identity onto a fixed
/// direction; the constant-map specialization of the integral identity.
inline double weak_form_residual_dir(const Trajectory& traj, const Field& phi, const Vec& dir,
                                     std::size_t t_steps, int stride = 1) {
    return ito_residual(traj, constant_map(dir), phi, t_steps, stride);
}

} // namespace sgw
