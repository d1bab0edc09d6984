#include <catch2/catch_amalgamated.hpp>

#include "sgwave/noise.hpp"

using namespace sgw;

TEST_CASE("measure validation symmetrizes and rejects bad input") {
    auto mu = validate_measure(1, {{Vec{2.0}, 1.0}});
    REQUIRE(mu.pairs.size() == 1);
    CHECK(mu.pairs[0].mass == 0.5); // split between +xi and -xi
    CHECK(mu.total_mass == 1.0);

    auto zero = validate_measure(2, {{Vec{0.0, 0.0}, 2.0}});
    CHECK(zero.pairs.empty());
    CHECK(zero.zero_mass == 2.0);
    CHECK(zero.total_mass == 2.0);

    // mirrored inputs with unequal masses are averaged
    auto avg = validate_measure(1, {{Vec{3.0}, 1.0}, {Vec{-3.0}, 3.0}});
    REQUIRE(avg.pairs.size() == 1);
    CHECK(avg.pairs[0].mass == 2.0);
    CHECK(avg.total_mass == 4.0);

    CHECK_THROWS_AS(validate_measure(1, {}), std::invalid_argument);
    CHECK_THROWS_AS(validate_measure(1, {{Vec{1.0}, -1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(validate_measure(1, {{Vec{1.0}, std::nan("")}}), std::invalid_argument);
}

TEST_CASE("covariance kernel closed form") {
    auto mu = validate_measure(1, {{Vec{2.0}, 1.0}}); // half mass at each of +-2
    Vec zero = {0.0};
    CHECK(covariance_kernel(mu, zero) == Catch::Approx(1.0).epsilon(1e-15));

    Vec half_period = {3.14159265358979323846 / 2.0}; // <xi, x> = pi
    CHECK(covariance_kernel(mu, half_period) == Catch::Approx(-1.0).epsilon(1e-12));

    RngStream rng(stream_key(3, 0, 0));
    auto mu2 = validate_measure(2, {{Vec{1.0, 2.0}, 0.7}, {Vec{0.0, 0.0}, 0.3}});
    for (int it = 0; it < 100; ++it) {
        Vec x = {rng.next_gauss(), rng.next_gauss()};
        Vec mx = {-x[0], -x[1]};
        CHECK(covariance_kernel(mu2, x) == Catch::Approx(covariance_kernel(mu2, mx)).margin(1e-15));
    }
}

TEST_CASE("zero-mode noise is spatially constant with the right variance") {
    Grid grid(1, 16, 1.0);
    auto mu = validate_measure(1, {{Vec{0.0}, 0.8}});
    const double dt = 0.02;
    double sum = 0.0, sum2 = 0.0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
        auto inc = sample_increment(mu, grid, dt, 42, 0, k);
        for (std::size_t id = 1; id < inc.values.nodes(); ++id)
            REQUIRE(inc.values(id, 0) == inc.values(0, 0));
        sum += inc.values(0, 0);
        sum2 += inc.values(0, 0) * inc.values(0, 0);
    }
    double var = sum2 / draws - (sum / draws) * (sum / draws);
    double expect = 0.8 * dt;
    // 4 standard errors of the variance estimate
    CHECK(std::abs(var - expect) < 4.0 * expect * std::sqrt(2.0 / draws));
}

TEST_CASE("single-pair empirical covariance matches the kernel") {
    Grid grid(1, 64, 1.0);
    auto mu = validate_measure(1, {{Vec{6.283185307179586}, 1.0}});
    const double dt = 0.01;
    const int draws = 10000;
    std::vector<std::size_t> probes = {0, 7, 16, 21, 32, 40, 55};
    std::vector<double> acc(probes.size(), 0.0);
    for (int k = 0; k < draws; ++k) {
        auto inc = sample_increment(mu, grid, dt, 7, 0, k);
        for (std::size_t i = 0; i < probes.size(); ++i)
            acc[i] += inc.values(probes[i], 0) * inc.values(0, 0);
    }
    double g0 = mu.total_mass;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        double x[1];
        grid.coords(probes[i], x);
        double expect = dt * covariance_kernel(mu, x);
        double se = dt * std::sqrt((g0 * g0 + std::pow(covariance_kernel(mu, x), 2)) / draws);
        CHECK(std::abs(acc[i] / draws - expect) <= 4.0 * se);
    }
}

TEST_CASE("increments are reproducible and seed-sensitive") {
    Grid grid(1, 32, 2.0);
    auto mu = validate_measure(1, {{Vec{3.0}, 0.5}, {Vec{0.0}, 0.25}});
    auto a = sample_increment(mu, grid, 0.1, 1001, 3, 17);
    auto b = sample_increment(mu, grid, 0.1, 1001, 3, 17);
    CHECK(a.values.data == b.values.data);
    CHECK(a.draws == b.draws);

    auto c = sample_increment(mu, grid, 0.1, 1002, 3, 17);
    CHECK(a.values.data != c.values.data);

    for (double v : a.values.data) CHECK(std::isfinite(v));
}

TEST_CASE("two half-step increments match one double step in law") {
    Grid grid(1, 16, 1.0);
    auto mu = validate_measure(1, {{Vec{6.283185307179586}, 1.0}});
    const double dt = 0.05;
    const int draws = 10000;
    double var_sum = 0.0, var_double = 0.0, mean_sum = 0.0, mean_double = 0.0;
    for (int k = 0; k < draws; ++k) {
        auto a = sample_increment(mu, grid, dt, 5, 0, 2 * k);
        auto b = sample_increment(mu, grid, dt, 5, 0, 2 * k + 1);
        double s = a.values(3, 0) + b.values(3, 0);
        mean_sum += s;
        var_sum += s * s;
        auto c = sample_increment(mu, grid, 2.0 * dt, 6, 0, k);
        double d = c.values(3, 0);
        mean_double += d;
        var_double += d * d;
    }
    mean_sum /= draws;
    mean_double /= draws;
    var_sum = var_sum / draws - mean_sum * mean_sum;
    var_double = var_double / draws - mean_double * mean_double;
    double expect = 2.0 * dt * mu.total_mass;
    double se = expect * std::sqrt(2.0 / draws);
    CHECK(std::abs(var_sum - expect) < 4.0 * se);
    CHECK(std::abs(var_double - expect) < 4.0 * se);
    CHECK(std::abs(mean_sum) < 4.0 * std::sqrt(expect / draws));
    CHECK(std::abs(mean_double) < 4.0 * std::sqrt(expect / draws));
}

TEST_CASE("multiplier norm identity for atomic measures") {
    Grid grid(1, 64, 2.0);
    auto mu = validate_measure(1, {{Vec{3.141592653589793}, 0.6}, {Vec{0.0}, 0.4}});

    Field zero(grid, 3);
    CHECK(hs_multiplier_norm_sq(mu, grid, zero) == 0.0);

    Field ones(grid, 1);
    ones.fill(1.0);
    double box = 2.0; // measure of the whole torus
    CHECK(hs_multiplier_norm_sq(mu, grid, ones) ==
          Catch::Approx(mu.total_mass * box).epsilon(1e-12));

    RngStream rng(stream_key(77, 0, 0));
    for (int it = 0; it < 10; ++it) {
        Field g(grid, 2);
        for (double& v : g.data) v = rng.next_gauss();
        double l2 = 0.0;
        for (std::size_t id = 0; id < g.nodes(); ++id) l2 += dot(2, g.at(id), g.at(id));
        l2 *= cell_volume(grid);
        double direct = hs_multiplier_norm_sq(mu, grid, g);
        CHECK(direct == Catch::Approx(mu.total_mass * l2).epsilon(1e-12));

        // quadratic homogeneity
        Field g2 = g;
        for (double& v : g2.data) v *= 2.0;
        CHECK(hs_multiplier_norm_sq(mu, grid, g2) == Catch::Approx(4.0 * direct).epsilon(1e-12));
    }

    std::vector<std::size_t> empty;
    Field f(grid, 1);
    CHECK_THROWS_AS(hs_multiplier_norm_sq(mu, grid, f, empty), std::invalid_argument);
}
