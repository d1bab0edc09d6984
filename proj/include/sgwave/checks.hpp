#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "sgwave/diagnostics.hpp"
#include "sgwave/residuals.hpp"
#include "sgwave/runner.hpp"

namespace sgw {

/// One verification criterion outcome, printable as a single line.
struct CheckResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string details;
};

namespace checks {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline Field bump_test_field(const Grid& g, double center_frac = 0.5, double radius_frac = 0.3) {
    Field phi(g, 1);
    double c[3] = {center_frac * g.length, center_frac * g.length, center_frac * g.length};
    double x[3];
    for (std::size_t id = 0; id < phi.nodes(); ++id) {
        g.coords(id, x);
        phi(id, 0) = bump1(g.torus_distance(x, c) / (radius_frac * g.length));
    }
    return phi;
}

inline Field ones_field(const Grid& g) {
    Field phi(g, 1);
    phi.fill(1.0);
    return phi;
}

// --- 1. geometry identities -------------------------------------------------

inline CheckResult geometry_identities(int samples = 1000) {
    CheckResult r{1, "geometry identities (orbit orthogonality, reconstruction, curvature)", false, ""};
    double worst = 0.0;
    for (int n : {2, 3, 5}) {
        ManifoldSpec spec = make_sphere(n);
        AxiomReport rep = validate_axioms(spec, samples, 1234 + n);
        worst = std::max(worst, rep.max_skew);
        worst = std::max(worst, rep.max_grad_orbit);
        worst = std::max(worst, rep.max_reconstruction);

        // curvature form against the sphere closed form -|xi|^2 p
        std::uint64_t key = 777 + n;
        RngStream rng(stream_key(key, 1, 0));
        double p[kMaxAmbient], w[kMaxAmbient], xi[kMaxAmbient], s[kMaxAmbient];
        for (int it = 0; it < samples; ++it) {
            spec.point_sampler(key, p);
            for (int c = 0; c < n; ++c) w[c] = rng.next_gauss();
            tangent_project(spec, p, w, xi);
            double x2 = dot(n, xi, xi);
            if (x2 < 1e-12) continue;
            second_fundamental_form(spec, p, xi, s);
            double dev = 0.0;
            for (int c = 0; c < n; ++c) dev = std::max(dev, std::abs(s[c] + x2 * p[c]));
            worst = std::max(worst, dev / x2);
        }
    }
    r.pass = worst < 1e-12;
    r.details = "max relative violation " + num(worst) + " (tol 1e-12)";
    return r;
}

// --- 2. noise law -----------------------------------------------------------

inline bool covariance_matches(const SpectralMeasure& mu, const Grid& grid, double dt, int draws,
                               int pairs, std::uint64_t seed, double& worst_sigmas) {
    RngStream pick(stream_key(seed, 11, 0));
    std::vector<std::pair<std::size_t, std::size_t>> pts;
    for (int i = 0; i < pairs; ++i)
        pts.emplace_back(static_cast<std::size_t>(pick.next_uniform() * grid.node_count()),
                         static_cast<std::size_t>(pick.next_uniform() * grid.node_count()));
    std::vector<double> acc(pts.size(), 0.0);
    for (int k = 0; k < draws; ++k) {
        NoiseIncrement inc = sample_increment(mu, grid, dt, seed, 0, static_cast<std::uint64_t>(k));
        for (std::size_t i = 0; i < pts.size(); ++i)
            acc[i] += inc.values(pts[i].first, 0) * inc.values(pts[i].second, 0);
    }
    double g0 = mu.total_mass;
    bool ok = true;
    worst_sigmas = 0.0;
    double xa[3], xb[3], d[3];
    for (std::size_t i = 0; i < pts.size(); ++i) {
        grid.coords(pts[i].first, xa);
        grid.coords(pts[i].second, xb);
        for (int k = 0; k < grid.dim; ++k) d[k] = xa[k] - xb[k];
        double expect = dt * covariance_kernel(mu, d);
        double se = dt * std::sqrt((g0 * g0 + std::pow(covariance_kernel(mu, d), 2)) / draws);
        double sig = std::abs(acc[i] / draws - expect) / se;
        worst_sigmas = std::max(worst_sigmas, sig);
        ok = ok && sig <= 4.0;
    }
    return ok;
}

inline CheckResult noise_law(int draws = 10000) {
    CheckResult r{2, "noise law (empirical covariance, multiplier norm)", false, ""};
    bool ok = true;
    double worst = 0.0, s;

    Grid g1(1, 64, 1.0);
    auto zero_mode = validate_measure(1, {{Vec{0.0}, 1.5}});
    ok = ok && covariance_matches(zero_mode, g1, 0.01, draws, 20, 21, s);
    worst = std::max(worst, s);
    auto pair1 = validate_measure(1, {{Vec{6.283185307179586}, 1.0}});
    ok = ok && covariance_matches(pair1, g1, 0.01, draws, 20, 22, s);
    worst = std::max(worst, s);
    Grid g2(2, 16, 1.0);
    std::vector<std::pair<Vec, double>> ring;
    for (int k = 0; k < 8; ++k) {
        double a = 0.78539816339744830961 * k;
        ring.push_back({Vec{6.283185307179586 * std::cos(a), 6.283185307179586 * std::sin(a)},
                        0.25});
    }
    auto ring8 = validate_measure(2, ring);
    ok = ok && covariance_matches(ring8, g2, 0.01, draws, 20, 23, s);
    worst = std::max(worst, s);

    // multiplier norm identity
    double worst_hs = 0.0;
    RngStream rng(stream_key(5, 5, 5));
    for (int it = 0; it < 10; ++it) {
        Field gfield(g1, 2);
        for (double& v : gfield.data) v = rng.next_gauss();
        double direct = hs_multiplier_norm_sq(pair1, g1, gfield);
        double l2 = 0.0;
        for (std::size_t id = 0; id < gfield.nodes(); ++id)
            l2 += dot(2, gfield.at(id), gfield.at(id));
        l2 *= cell_volume(g1);
        worst_hs = std::max(worst_hs,
                            std::abs(direct - pair1.total_mass * l2) / (pair1.total_mass * l2));
    }
    ok = ok && worst_hs < 1e-12;
    r.pass = ok;
    r.details = "worst covariance deviation " + num(worst) + " sigma (limit 4); multiplier-norm rel err " +
                num(worst_hs) + " (tol 1e-12)";
    return r;
}

// --- 3. scheme order ---------------------------------------------------------

inline double standing_wave_error(int points, double cfl_frac) {
    Grid grid(1, points, 1.0);
    double h = grid.spacing();
    double dt = cfl_frac * h;
    // generic horizon (not a special phase), integer steps at every level
    std::size_t steps = static_cast<std::size_t>(std::llround(0.4375 / dt));
    State st(grid, 1);
    double x[1];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        st.U(id, 0) = std::cos(6.283185307179586 * x[0]);
    }
    StepParams p;
    p.dt = dt;
    Trajectory traj = simulate(grid, st, p, steps, static_cast<int>(steps));
    double t = traj.final().t;
    double err = 0.0;
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        double exact = std::cos(6.283185307179586 * t) * std::cos(6.283185307179586 * x[0]);
        err = std::max(err, std::abs(traj.final().U(id, 0) - exact));
    }
    return err;
}

inline double geodesic_error(double dt) {
    Grid grid(1, 8, 1.0);
    ManifoldSpec spec = make_sphere(3);
    State st = make_great_circle(grid, spec, 1.0);
    StepParams p;
    p.dt = dt;
    p.scheme = Scheme::projected;
    p.manifold = &spec;
    std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / dt));
    Trajectory traj = simulate(grid, st, p, steps, static_cast<int>(steps));
    double t = traj.final().t;
    double exact[3] = {std::cos(t), std::sin(t), 0.0};
    double err = 0.0;
    for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(traj.final().U(0, c) - exact[c]));
    return err;
}

inline CheckResult scheme_order() {
    CheckResult r{3, "scheme order (standing wave, geodesic)", false, ""};
    std::vector<double> hs, errs;
    for (int pts : {32, 64, 128}) {
        hs.push_back(1.0 / pts);
        errs.push_back(standing_wave_error(pts, 0.25));
    }
    double wave_order = fitted_order(hs, errs);
    std::vector<double> dts, gerrs;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
        dts.push_back(dt);
        gerrs.push_back(geodesic_error(dt));
    }
    double geo_order = fitted_order(dts, gerrs);
    r.pass = wave_order >= 1.9 && geo_order >= 1.9;
    r.details = "standing-wave order " + num(wave_order) + ", geodesic order " + num(geo_order) +
                " (both must be >= 1.9)";
    return r;
}

// --- 4. finite propagation speed ---------------------------------------------

inline CheckResult finite_propagation() {
    CheckResult r{4, "finite propagation speed (pulse stays in the cone)", false, ""};
    Grid grid(1, 256, 4.0);
    double h = grid.spacing();
    double dt = h; // transport-exact step in one dimension
    double r0 = 0.5, horizon = 2.0;
    State st(grid, 1);
    double c[3] = {2.0, 0, 0}, x[3];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        st.U(id, 0) = bump1(grid.torus_distance(x, c) / r0);
    }
    StepParams p;
    p.dt = dt;
    std::size_t steps = static_cast<std::size_t>(std::llround(0.5 * horizon / dt));
    double worst = 0.0;
    State cur = st;
    for (std::size_t s = 1; s <= steps; ++s) {
        cur = step(grid, cur, p);
        double t = cur.t;
        for (std::size_t id = 0; id < cur.U.nodes(); ++id) {
            grid.coords(id, x);
            if (grid.torus_distance(x, c) > r0 + t + 2.0 * h)
                worst = std::max(worst, std::abs(cur.U(id, 0)));
        }
    }
    r.pass = worst < 1e-12;
    r.details = "max field outside the cone " + num(worst) + " (tol 1e-12)";
    return r;
}

// --- 5. constraint decay -----------------------------------------------------

inline CheckResult constraint_decay(int ensemble = 8) {
    CheckResult r{5, "constraint decay under the penalty sweep", false, ""};
    Grid grid(1, 64, 4.0);
    ManifoldSpec spec = make_sphere(3);
    // the constant diffusion channel is deliberately non-tangent: its normal
    // part feeds the penalty well at a strength independent of m
    auto noise_set = make_constant_field(3, 1, Vec{0.5, 0.0, 0.0}, true);
    SpectralMeasure mu = validate_measure(1, {{Vec{3.141592653589793}, 1.0}});
    std::vector<double> m_list = {1e2, 1e3, 1e4, 1e5};

    auto run = [&](double m, int member) {
        StepParams p;
        p.penalty = m;
        p.dt = 0.3 / std::sqrt(8.0 * m);
        p.manifold = &spec;
        p.coeffs = &noise_set;
        p.measure = &mu;
        p.seed = 4242;
        p.trajectory = static_cast<std::uint64_t>(member);
        State init = make_tangent_pulse(grid, spec, 0.3, 0.5, 0.5);
        std::size_t steps = static_cast<std::size_t>(std::llround(0.5 / p.dt));
        int stride = std::max<int>(1, static_cast<int>(steps / 64));
        return simulate(grid, init, p, steps, stride);
    };
    DecayStudyResult res = penalty_decay_study(run, m_list, ensemble, spec);
    bool slope_ok = res.distance_slope >= -0.65 && res.distance_slope <= -0.35;
    bool mass_ok = res.mass_ratio < 5.0;
    r.pass = slope_ok && mass_ok;
    r.details = "distance slope " + num(res.distance_slope) +
                " (window [-0.65, -0.35]); penalty-mass max/min " + num(res.mass_ratio) +
                " (limit 5)";
    return r;
}

// --- 6. energy inequality ----------------------------------------------------

struct EnergyRun {
    std::vector<std::vector<double>> series;
    std::vector<double> times;
    std::vector<char> mask;
};

inline EnergyRun energy_ensemble(int members, double gamma, double sigma, std::uint64_t seed,
                                 int steps = 80, double win_horizon = 1.6) {
    Grid grid(1, 64, 4.0);
    ManifoldSpec spec = make_sphere(3);
    CoefficientSet set = make_zero_coefficients(3, 1);
    if (gamma != 0.0 || sigma != 0.0)
        set = merge_coefficients(
            {make_linear_damping(3, 1, gamma), make_multiplicative_noise(3, 1, sigma)});
    SpectralMeasure mu = validate_measure(1, {{Vec{3.141592653589793}, 1.0}});
    double s2 = s_squared(set);

    EnergyWindow win;
    win.center = Vec{2.0};
    win.horizon = win_horizon;

    EnergyRun run;
    run.mask.assign(members, 1);
    for (int m = 0; m < members; ++m) {
        StepParams p;
        p.dt = 0.01;
        p.manifold = &spec;
        p.coeffs = &set;
        p.measure = sigma != 0.0 ? &mu : nullptr;
        p.seed = seed;
        p.trajectory = static_cast<std::uint64_t>(m);
        State init = make_random_tangent(grid, spec, 0.4, 0.8, 4,
                                         seed ^ (0x9d2c5680ULL * (m + 1)));
        Trajectory traj = simulate(grid, init, p, steps, 4);
        std::vector<double> es;
        for (const State& st : traj.states) es.push_back(local_energy(grid, st, win, s2));
        if (m == 0) run.times = traj.times;
        run.series.push_back(std::move(es));
    }
    return run;
}

inline CheckResult energy_inequality() {
    CheckResult r{6, "pathwise energy bound (free and damped/noisy ensembles)", false, ""};
    EnergyRun free_run = energy_ensemble(32, 0.0, 0.0, 606);
    auto rep_id = energy_inequality_mc(free_run.series, free_run.times, l_identity(), free_run.mask);
    auto rep_sq = energy_inequality_mc(free_run.series, free_run.times, l_sqrt(), free_run.mask);
    bool free_ok = rep_id.fitted_C <= 0.05 && rep_sq.fitted_C <= 0.05;

    EnergyRun d64 = energy_ensemble(64, 0.3, 1.2, 707);
    EnergyRun d128 = energy_ensemble(128, 0.3, 1.2, 707);
    double worst_rel = 0.0, c_id = 0.0, c_sq = 0.0;
    bool noisy_ok = true;
    for (const LFunction& l : {l_identity(), l_sqrt()}) {
        auto c64 = energy_inequality_mc(d64.series, d64.times, l, d64.mask);
        auto c128 = energy_inequality_mc(d128.series, d128.times, l, d128.mask);
        (l.name == "identity" ? c_id : c_sq) = c128.fitted_C;
        bool finite = std::isfinite(c64.fitted_C) && std::isfinite(c128.fitted_C);
        double rel = std::abs(c64.fitted_C - c128.fitted_C) /
                     std::max({c64.fitted_C, c128.fitted_C, 0.05});
        worst_rel = std::max(worst_rel, rel);
        noisy_ok = noisy_ok && finite && rel <= 0.2;
    }
    r.pass = free_ok && noisy_ok;
    r.details = "free-run fitted C " + num(rep_id.fitted_C) + "/" + num(rep_sq.fitted_C) +
                " (slack 0.05); noisy-run C " + num(c_id) + "/" + num(c_sq) +
                ", doubling stability " + num(worst_rel) + " (limit 0.2)";
    return r;
}

// --- shared scaling harness ---------------------------------------------------

inline Trajectory scaling_run(double dt, std::size_t steps, int member, std::uint64_t seed) {
    Grid grid(1, 32, 4.0);
    static ManifoldSpec spec = make_sphere(3);
    static CoefficientSet set = make_multiplicative_noise(3, 1, 0.8);
    static SpectralMeasure mu = validate_measure(1, {{Vec{3.141592653589793}, 1.0}});
    StepParams p;
    p.dt = dt;
    p.manifold = &spec;
    p.coeffs = &set;
    p.measure = &mu;
    p.seed = seed;
    p.trajectory = static_cast<std::uint64_t>(member);
    State init = make_tangent_pulse(grid, spec, 0.5, 1.0, 0.6);
    return simulate(grid, init, p, steps, 1);
}

/// Mean residual at two stepping resolutions with a stride-2 observation
/// grid; the identity defect at observation scale 2*dt scales like the
/// square root of the step.
inline double residual_scaling_ratio(
    const std::function<double(const Trajectory&, std::size_t)>& resid, int paths,
    double dt0 = 4e-4, std::size_t steps0 = 512, std::uint64_t seed = 31337) {
    double coarse = 0.0, fine = 0.0;
    for (int m = 0; m < paths; ++m) {
        Trajectory tc = scaling_run(dt0, steps0, m, seed);
        coarse += resid(tc, steps0);
        Trajectory tf = scaling_run(0.5 * dt0, 2 * steps0, m, seed + 1);
        fine += resid(tf, 2 * steps0);
    }
    return fine / coarse;
}

// --- 7. momentum identity ------------------------------------------------------

inline CheckResult momentum_identity(int paths = 64) {
    CheckResult r{7, "momentum identity (conservation and weak residual scaling)", false, ""};
    // free run: total momentum is a discrete invariant
    Grid grid(1, 64, 4.0);
    ManifoldSpec spec = make_sphere(3);
    StepParams p;
    p.dt = grid.spacing() / 4.0;
    p.manifold = &spec;
    State init = make_tangent_pulse(grid, spec, 0.5, 1.0, 0.5);
    Trajectory traj = simulate(grid, init, p, 1000, 50);
    int gen = sphere_generator_index(3, 1, 2);
    double m0 = total_momentum(grid, traj.states.front(), spec, gen);
    double drift = 0.0;
    for (const State& st : traj.states)
        drift = std::max(drift, std::abs(total_momentum(grid, st, spec, gen) - m0));
    double rel_drift = drift / std::abs(m0);

    Grid sgrid(1, 32, 4.0);
    Field phi = bump_test_field(sgrid);
    double ratio = residual_scaling_ratio(
        [&](const Trajectory& t, std::size_t steps) {
            return momentum_weak_residual(t, spec, gen, phi, steps, 2);
        },
        paths);
    bool scale_ok = ratio >= 0.7071 * 0.7 && ratio <= 0.7071 * 1.3;
    r.pass = rel_drift < 1e-6 && scale_ok;
    r.details = "free-run relative drift " + num(rel_drift) +
                " (tol 1e-6); dt-halving residual ratio " + num(ratio) +
                " (window [0.495, 0.919])";
    return r;
}

// --- 8. velocity reconstruction -------------------------------------------------

inline CheckResult reconstruction(int) {
    CheckResult r{8, "velocity reconstruction from momentum densities", false, ""};
    Grid grid(1, 32, 4.0);
    ManifoldSpec spec = make_sphere(3);
    double worst = 0.0;
    for (int which = 0; which < 2; ++which) {
        StepParams p;
        p.dt = 0.01;
        p.scheme = Scheme::projected;
        p.manifold = &spec;
        State init = which == 0 ? make_great_circle(grid, spec, 1.0)
                                : make_random_tangent(grid, spec, 0.4, 0.8, 4, 5150);
        Trajectory traj = simulate(grid, init, p, 200, 10);
        for (const State& st : traj.states) {
            auto rep = reconstruct_velocity(grid, st, spec);
            worst = std::max(worst, rep.max_error);
        }
    }
    r.pass = worst < 1e-10;
    r.details = "max round-trip error " + num(worst) + " (tol 1e-10)";
    return r;
}

// --- 9. integral identity for smooth maps ---------------------------------------

inline SmoothMap gaussian_radial_map(int n) {
    return SmoothMap{
        [n](const double* y, double* out) {
            double e = std::exp(-dot(n, y, y));
            for (int c = 0; c < n; ++c) out[c] = y[c] * e;
        },
        [n](const double* y, const double* xi, double* out) {
            double e = std::exp(-dot(n, y, y));
            double c2 = 2.0 * dot(n, y, xi);
            for (int c = 0; c < n; ++c) out[c] = e * (xi[c] - c2 * y[c]);
        },
    };
}

inline CheckResult ito_identity(int paths = 64) {
    CheckResult r{9, "integral identity residual (linear and smooth maps)", false, ""};
    ManifoldSpec spec = make_sphere(3);
    Grid sgrid(1, 32, 4.0);
    Field phi = bump_test_field(sgrid);
    int gen = sphere_generator_index(3, 0, 1);

    // linear map: must agree with the momentum residual bit for bit
    Trajectory probe = scaling_run(4e-4, 256, 0, 808);
    bool bit_ok = true;
    for (int stride : {1, 2, 4}) {
        double a = momentum_weak_residual(probe, spec, gen, phi, 256, stride);
        double b = ito_residual(probe, linear_map(spec.generators[gen]), phi, 256, stride);
        bit_ok = bit_ok && a == b;
    }

    SmoothMap y = gaussian_radial_map(3);
    double ratio = residual_scaling_ratio(
        [&](const Trajectory& t, std::size_t steps) {
            return ito_residual(t, y, phi, steps, 2);
        },
        paths);
    bool scale_ok = ratio >= 0.7071 * 0.7 && ratio <= 0.7071 * 1.3;
    r.pass = bit_ok && scale_ok;
    r.details = std::string("linear-map agreement ") + (bit_ok ? "bitwise" : "BROKEN") +
                "; dt-halving residual ratio " + num(ratio) + " (window [0.495, 0.919])";
    return r;
}

} // namespace checks

inline std::vector<CheckResult> run_all_checks() {
    return {
        checks::geometry_identities(), checks::noise_law(),       checks::scheme_order(),
        checks::finite_propagation(),  checks::constraint_decay(), checks::energy_inequality(),
        checks::momentum_identity(),   checks::reconstruction(0),  checks::ito_identity(),
    };
}

} // namespace sgw
