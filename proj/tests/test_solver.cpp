#include <catch2/catch_amalgamated.hpp>

#include "sgwave/checks.hpp"
#include "sgwave/solver.hpp"

using namespace sgw;

TEST_CASE("stencil Laplacian: kernel, eigenmode order, linearity") {
    Grid grid(1, 64, 1.0);
    Field c(grid, 2);
    c.fill(3.25);
    Field lc = laplacian(grid, c);
    for (double v : lc.data) CHECK(v == 0.0);

    // eigenmode convergence at second order
    std::vector<double> hs, errs;
    for (int pts : {32, 64, 128, 256}) {
        Grid g(1, pts, 1.0);
        Field u(g, 1);
        double k0 = 2.0 * 3.141592653589793;
        double x[1];
        for (std::size_t id = 0; id < u.nodes(); ++id) {
            g.coords(id, x);
            u(id, 0) = std::sin(k0 * x[0]);
        }
        Field lap = laplacian(g, u);
        double err = 0.0;
        for (std::size_t id = 0; id < u.nodes(); ++id)
            err = std::max(err, std::abs(lap(id, 0) + k0 * k0 * u(id, 0)));
        hs.push_back(std::log(g.spacing()));
        errs.push_back(std::log(err));
    }
    CHECK(fit_slope(hs, errs) >= 1.9);

    // linearity to round-off
    RngStream rng(stream_key(42, 0, 0));
    Field a(grid, 2), b(grid, 2);
    for (double& v : a.data) v = rng.next_gauss();
    for (double& v : b.data) v = rng.next_gauss();
    Field combo(grid, 2);
    for (std::size_t k = 0; k < combo.data.size(); ++k) combo.data[k] = 2.5 * a.data[k] + b.data[k];
    Field l1 = laplacian(grid, combo);
    Field la = laplacian(grid, a), lb = laplacian(grid, b);
    for (std::size_t k = 0; k < l1.data.size(); ++k)
        CHECK(l1.data[k] == Catch::Approx(2.5 * la.data[k] + lb.data[k]).margin(1e-9));
}

TEST_CASE("higher-dimensional stencils keep their eigenmodes") {
    // d = 2: product mode of the box
    Grid g2(2, 16, 1.0);
    Field u2(g2, 1);
    double k0 = 2.0 * 3.141592653589793;
    double x[3];
    for (std::size_t id = 0; id < u2.nodes(); ++id) {
        g2.coords(id, x);
        u2(id, 0) = std::sin(k0 * x[0]) * std::cos(k0 * x[1]);
    }
    Field l2f = laplacian(g2, u2);
    double worst = 0.0;
    for (std::size_t id = 0; id < u2.nodes(); ++id)
        worst = std::max(worst, std::abs(l2f(id, 0) + 2.0 * k0 * k0 * u2(id, 0)));
    CHECK(worst < 2.0 * k0 * k0 * (k0 / 16) * (k0 / 16) / 6.0); // second-order bound

    // d = 3: discrete symmetry of the 7-point stencil
    Grid g3(3, 8, 1.0);
    Field u3(g3, 2);
    RngStream rng(stream_key(33, 0, 0));
    for (double& v : u3.data) v = rng.next_gauss();
    Field l3 = laplacian(g3, u3);
    double sum = 0.0;
    for (double v : l3.data) sum += v;
    CHECK(std::abs(sum) < 1e-9); // stencil rows sum to zero on the torus
}

TEST_CASE("two-dimensional sphere runs conserve energy and momentum") {
    Grid grid(2, 16, 2.0);
    ManifoldSpec spec = make_sphere(3);
    State init = make_random_tangent(grid, spec, 0.3, 0.6, 3, 2211);
    StepParams p;
    p.penalty = 100.0;
    p.dt = 0.3 / std::sqrt(8.0 * p.penalty); // resolve the spring period
    p.manifold = &spec;
    Trajectory traj = simulate(grid, init, p, 180, 1);
    int gen = sphere_generator_index(3, 0, 1);
    double m0 = total_momentum(grid, traj.states.front(), spec, gen);
    for (const State& st : traj.states) {
        CHECK(st.U.finite());
        CHECK(std::abs(total_momentum(grid, st, spec, gen) - m0) <= 1e-12);
    }
    double e0 = staggered_energy(grid, traj.states[0], traj.states[1], &spec, p.penalty);
    for (std::size_t k = 1; k + 1 < traj.states.size(); ++k) {
        double e = staggered_energy(grid, traj.states[k], traj.states[k + 1], &spec, p.penalty);
        CHECK(std::abs(e - e0) / e0 < 2e-2);
    }
}

TEST_CASE("zero state with zero data is a fixed point") {
    Grid grid(1, 16, 1.0);
    State zero(grid, 3);
    StepParams p;
    p.dt = 0.01;
    State next = step(grid, zero, p);
    for (double v : next.U.data) CHECK(v == 0.0);
    for (double v : next.V.data) CHECK(v == 0.0);
}

TEST_CASE("standing wave converges at second order under joint refinement") {
    std::vector<double> hs, errs;
    for (int pts : {32, 64, 128}) {
        hs.push_back(1.0 / pts);
        errs.push_back(sgw::checks::standing_wave_error(pts, 0.25));
    }
    double order = fitted_order(hs, errs);
    CHECK(order >= 1.9);
}

TEST_CASE("projected scheme follows the great circle at second order in dt") {
    std::vector<double> dts, errs;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
        dts.push_back(dt);
        errs.push_back(sgw::checks::geodesic_error(dt));
    }
    CHECK(fitted_order(dts, errs) >= 1.9);
}

TEST_CASE("projected scheme pins the state to the tangent bundle") {
    Grid grid(1, 32, 4.0);
    ManifoldSpec spec = make_sphere(3);
    State st = make_random_tangent(grid, spec, 0.4, 0.8, 4, 314);
    StepParams p;
    p.dt = 0.02;
    p.scheme = Scheme::projected;
    p.manifold = &spec;
    State cur = st;
    for (int k = 0; k < 100; ++k) {
        cur = step_projected(grid, cur, p);
        for (std::size_t id = 0; id < cur.U.nodes(); ++id) {
            CHECK(std::abs(norm2(3, cur.U.at(id)) - 1.0) <= 1e-12);
            CHECK(std::abs(dot(3, cur.U.at(id), cur.V.at(id))) <= 1e-12);
        }
    }
}

TEST_CASE("penalized runs approach the projected run as the spring stiffens") {
    Grid grid(1, 32, 4.0);
    ManifoldSpec spec = make_sphere(3);
    State init = make_tangent_pulse(grid, spec, 0.4, 0.8, 0.6);
    const double horizon = 1.0;

    StepParams proj;
    proj.dt = 1e-3;
    proj.scheme = Scheme::projected;
    proj.manifold = &spec;
    Trajectory ref = simulate(grid, init, proj, 1000, 1000);

    std::vector<double> ms = {1e2, 1e3, 1e4};
    std::vector<double> diffs;
    for (double m : ms) {
        StepParams p;
        p.penalty = m;
        p.manifold = &spec;
        p.dt = horizon / std::ceil(horizon / (0.25 / std::sqrt(8.0 * m)));
        std::size_t steps = static_cast<std::size_t>(std::llround(horizon / p.dt));
        Trajectory traj = simulate(grid, init, p, steps, static_cast<int>(steps));
        double err = 0.0;
        for (std::size_t k = 0; k < ref.final().U.data.size(); ++k)
            err += std::pow(traj.final().U.data[k] - ref.final().U.data[k], 2);
        diffs.push_back(std::sqrt(err * cell_volume(grid)));
    }
    // differences shrink with m, consistent with an inverse-power envelope
    CHECK(diffs[1] < diffs[0]);
    CHECK(diffs[2] < diffs[1]);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        lx.push_back(std::log(ms[i]));
        ly.push_back(std::log(diffs[i]));
    }
    CHECK(fit_slope(lx, ly) <= -0.3);
}

TEST_CASE("simulate honors the contracts of its edges") {
    Grid grid(1, 16, 1.0);
    ManifoldSpec spec = make_sphere(3);
    State init = make_great_circle(grid, spec, 1.0);
    StepParams p;
    p.dt = 0.01;
    p.manifold = &spec;

    Trajectory none = simulate(grid, init, p, 0);
    CHECK(none.states.size() == 1);
    CHECK(none.final().t == init.t);

    // same seed twice: identical records
    CoefficientSet noise = make_multiplicative_noise(3, 1, 0.4);
    SpectralMeasure mu = validate_measure(1, {{Vec{6.283185307179586}, 1.0}});
    p.coeffs = &noise;
    p.measure = &mu;
    p.seed = 99;
    Trajectory t1 = simulate(grid, init, p, 50);
    Trajectory t2 = simulate(grid, init, p, 50);
    REQUIRE(t1.states.size() == t2.states.size());
    for (std::size_t k = 0; k < t1.states.size(); ++k) {
        CHECK(t1.states[k].U.data == t2.states[k].U.data);
        CHECK(t1.states[k].V.data == t2.states[k].V.data);
    }

    // NaN data aborts with the failing step index
    State bad = init;
    bad.U(0, 0) = std::nan("");
    CHECK_THROWS_AS(simulate(grid, bad, p, 10), NumericalError);

    // CFL and stiffness guards
    StepParams fast;
    fast.dt = 1.0; // far beyond h/sqrt(d)
    CHECK_THROWS_AS(fast.validate(grid), std::invalid_argument);
    StepParams stiff;
    stiff.dt = 0.01;
    stiff.penalty = 1e6;
    stiff.manifold = &spec;
    CHECK_THROWS_AS(stiff.validate(grid), NumericalError);
}

TEST_CASE("free leapfrog conserves the staggered energy to round-off") {
    Grid grid(1, 64, 1.0);
    State st(grid, 1);
    double x[1];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        st.U(id, 0) = std::cos(2.0 * 3.141592653589793 * x[0]);
        st.V(id, 0) = 0.5 * std::sin(4.0 * 3.141592653589793 * x[0]);
    }
    StepParams p;
    p.dt = grid.spacing() / 4.0;
    Trajectory traj = simulate(grid, st, p, 1000, 1);
    double e0 = staggered_energy(grid, traj.states[0], traj.states[1]);
    double drift = 0.0;
    for (std::size_t k = 1; k + 1 < traj.states.size(); ++k)
        drift = std::max(drift,
                         std::abs(staggered_energy(grid, traj.states[k], traj.states[k + 1]) - e0));
    CHECK(drift / std::abs(e0) < 1e-6);
}

namespace {

double max_energy_gain_per_step(double dt, const Grid& grid, const ManifoldSpec& spec,
                                double m, double& e0) {
    StepParams p;
    p.dt = dt;
    p.penalty = m;
    p.manifold = &spec;
    State init = make_tangent_pulse(grid, spec, 0.4, 0.8, 0.6);
    std::size_t steps = static_cast<std::size_t>(std::llround(0.5 / dt));
    Trajectory traj = simulate(grid, init, p, steps, 1);
    double worst = 0.0;
    double prev = staggered_energy(grid, traj.states[0], traj.states[1], &spec, m);
    e0 = prev;
    for (std::size_t k = 1; k + 1 < traj.states.size(); ++k) {
        double e = staggered_energy(grid, traj.states[k], traj.states[k + 1], &spec, m);
        worst = std::max(worst, e - prev);
        prev = e;
    }
    return worst;
}

} // namespace

TEST_CASE("penalized free energy is non-increasing up to a second-order wobble") {
    Grid grid(1, 32, 4.0);
    ManifoldSpec spec = make_sphere(3);
    const double m = 400.0;
    double e0a = 0.0, e0b = 0.0;
    double gain_coarse = max_energy_gain_per_step(5e-3, grid, spec, m, e0a);
    double gain_fine = max_energy_gain_per_step(2.5e-3, grid, spec, m, e0b);
    // the per-step gain is a wobble of (at least) quadratic size in dt
    CHECK(gain_coarse / e0a < 1e-4);
    CHECK(gain_fine <= gain_coarse / 3.0);
}

TEST_CASE("compact pulses stay inside the propagation cone") {
    // transport-exact step: the cone bound holds to round-off
    CheckResult r = sgw::checks::finite_propagation();
    CHECK(r.pass);
}

TEST_CASE("projected scheme rejects collapsing positions") {
    Grid grid(1, 16, 1.0);
    ManifoldSpec spec = make_sphere(3);
    State st = make_great_circle(grid, spec, 0.0);
    // a huge inward velocity drives |U| toward zero in one step
    for (std::size_t id = 0; id < st.V.nodes(); ++id) st.V(id, 0) = -100.0;
    StepParams p;
    p.dt = 0.01;
    p.scheme = Scheme::projected;
    p.manifold = &spec;
    CHECK_THROWS_AS(step_projected(grid, st, p), NumericalError);
}
