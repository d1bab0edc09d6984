#include <catch2/catch_amalgamated.hpp>

#include "sgwave/checks.hpp"
#include "sgwave/residuals.hpp"

using namespace sgw;

namespace {

Trajectory standing_wave_traj(int points, double cfl_frac, double horizon) {
    Grid grid(1, points, 1.0);
    double dt = cfl_frac * grid.spacing();
    std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
    State st(grid, 1);
    double x[1];
    for (std::size_t id = 0; id < st.U.nodes(); ++id) {
        grid.coords(id, x);
        st.U(id, 0) = std::cos(6.283185307179586 * x[0]);
    }
    StepParams p;
    p.dt = dt;
    return simulate(grid, st, p, steps, 1);
}

} // namespace

TEST_CASE("residuals vanish identically on the zero trajectory") {
    Grid grid(1, 16, 1.0);
    State zero(grid, 3);
    StepParams p;
    p.dt = 0.01;
    Trajectory traj = simulate(grid, zero, p, 20, 1);
    Field phi = checks::bump_test_field(grid);
    WeakResiduals r = weak_form_residual(traj, phi, 20);
    CHECK(r.u_residual == 0.0);
    CHECK(r.v_residual == 0.0);

    ManifoldSpec spec = make_sphere(3);
    CHECK(momentum_weak_residual(traj, spec, 0, phi, 20) == 0.0);
}

TEST_CASE("deterministic standing wave: tiny position defect at a full period") {
    Trajectory traj = standing_wave_traj(1024, 0.25, 1.0);
    Field phi = checks::bump_test_field(traj.grid);
    WeakResiduals r = weak_form_residual(traj, phi, traj.steps());
    CHECK(r.u_residual < 1e-8);
}

TEST_CASE("deterministic velocity defect scales linearly in dt") {
    // generic horizon: the trapezoid defect is first order in the step
    Trajectory coarse = standing_wave_traj(64, 0.25, 0.3125);
    Trajectory fine = standing_wave_traj(64, 0.125, 0.3125);
    Field phi = checks::bump_test_field(coarse.grid);
    double rc = weak_form_residual(coarse, phi, coarse.steps()).v_residual;
    double rf = weak_form_residual(fine, phi, fine.steps()).v_residual;
    double ratio = rc / rf;
    CHECK(ratio > 1.5);
    CHECK(ratio < 3.0);
    CHECK(rc < 0.1);
}

TEST_CASE("free periodic run conserves total momentum") {
    Grid grid(1, 64, 4.0);
    ManifoldSpec spec = make_sphere(3);
    State init = make_tangent_pulse(grid, spec, 0.5, 1.0, 0.5);
    StepParams p;
    p.dt = grid.spacing() / 4.0;
    p.manifold = &spec;
    Trajectory traj = simulate(grid, init, p, 1000, 100);
    int gen = sphere_generator_index(3, 1, 2);
    double m0 = total_momentum(grid, traj.states.front(), spec, gen);
    REQUIRE(std::abs(m0) > 0.01);
    for (const State& st : traj.states)
        CHECK(std::abs(total_momentum(grid, st, spec, gen) - m0) / std::abs(m0) < 1e-6);

    // the same invariance holds with the penalty spring on
    StepParams pen = p;
    pen.penalty = 400.0;
    pen.dt = 0.01;
    Trajectory tp = simulate(grid, init, pen, 500, 100);
    double q0 = total_momentum(grid, tp.states.front(), spec, gen);
    for (const State& st : tp.states)
        CHECK(std::abs(total_momentum(grid, st, spec, gen) - q0) / std::abs(q0) < 1e-6);
}

TEST_CASE("momentum residual reduces to conservation for the unit test function") {
    Grid grid(1, 32, 4.0);
    ManifoldSpec spec = make_sphere(3);
    State init = make_tangent_pulse(grid, spec, 0.5, 1.0, 0.6);
    StepParams p;
    p.dt = 0.01;
    p.manifold = &spec;
    Trajectory traj = simulate(grid, init, p, 200, 1);
    Field ones = checks::ones_field(grid);
    int gen = sphere_generator_index(3, 1, 2);
    double resid = momentum_weak_residual(traj, spec, gen, ones, 200);
    double m0 = total_momentum(grid, traj.states.front(), spec, gen);
    double mT = total_momentum(grid, traj.states.back(), spec, gen);
    // for phi = 1 the gradient pairing drops and the drift pairing is zero
    CHECK(resid == Catch::Approx(std::abs(mT - m0)).margin(1e-12));
    CHECK(resid < 1e-10);
}

TEST_CASE("linear maps give the momentum residual bit for bit") {
    Trajectory traj = checks::scaling_run(5e-4, 128, 0, 1717);
    ManifoldSpec spec = make_sphere(3);
    Field phi = checks::bump_test_field(traj.grid);
    for (int gen = 0; gen < spec.generator_count(); ++gen)
        for (int stride : {1, 2, 4}) {
            double a = momentum_weak_residual(traj, spec, gen, phi, 128, stride);
            double b = ito_residual(traj, linear_map(spec.generators[gen]), phi, 128, stride);
            CHECK(a == b);
        }
}

TEST_CASE("constant maps reduce to the directional velocity defect") {
    Trajectory traj = checks::scaling_run(5e-4, 128, 1, 2121);
    Field phi = checks::bump_test_field(traj.grid);
    Vec dir = {0.0, 1.0, 0.0};
    double from_ito = ito_residual(traj, constant_map(dir), phi, 128);
    double via_dir = weak_form_residual_dir(traj, phi, dir, 128);
    CHECK(from_ito == via_dir);

    // cross-check against the componentwise velocity defect
    WeakResiduals wr = weak_form_residual(traj, phi, 128);
    CHECK(from_ito <= wr.v_residual * (1.0 + 1e-9) + 1e-15);
}

TEST_CASE("stochastic residuals shrink like the square root of the step") {
    ManifoldSpec spec = make_sphere(3);
    Grid sgrid(1, 32, 4.0);
    Field phi = checks::bump_test_field(sgrid);
    int gen = sphere_generator_index(3, 0, 1);
    double ratio = checks::residual_scaling_ratio(
        [&](const Trajectory& t, std::size_t steps) {
            return momentum_weak_residual(t, spec, gen, phi, steps, 2);
        },
        32, 4e-4, 512, 555);
    CHECK(ratio > 0.7071 * 0.65);
    CHECK(ratio < 0.7071 * 1.35);

    // the velocity-equation defect scales the same way
    double vratio = checks::residual_scaling_ratio(
        [&](const Trajectory& t, std::size_t steps) {
            return weak_form_residual(t, phi, steps, 2).v_residual;
        },
        32, 4e-4, 512, 777);
    CHECK(vratio > 0.7071 * 0.65);
    CHECK(vratio < 0.7071 * 1.35);
}

TEST_CASE("residual preconditions are enforced") {
    Grid grid(1, 16, 1.0);
    State zero(grid, 3);
    StepParams p;
    p.dt = 0.01;
    Trajectory strided = simulate(grid, zero, p, 20, 2);
    Field phi = checks::ones_field(grid);
    CHECK_THROWS_AS(weak_form_residual(strided, phi, 20), std::invalid_argument);

    Trajectory full = simulate(grid, zero, p, 20, 1);
    CHECK_THROWS_AS(weak_form_residual(full, phi, 21), std::invalid_argument);
    CHECK_THROWS_AS(weak_form_residual(full, phi, 15, 2), std::invalid_argument);
    ManifoldSpec spec = make_sphere(3);
    CHECK_THROWS_AS(momentum_weak_residual(full, spec, 99, phi, 20), std::invalid_argument);

    SmoothMap no_jac;
    no_jac.value = [](const double*, double* o) { o[0] = o[1] = o[2] = 0.0; };
    CHECK_THROWS_AS(ito_residual(full, no_jac, phi, 20), std::invalid_argument);

    Grid other(1, 32, 1.0);
    Field wrong = checks::ones_field(other);
    CHECK_THROWS_AS(weak_form_residual(full, wrong, 20), std::invalid_argument);
}
