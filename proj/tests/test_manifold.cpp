#include <catch2/catch_amalgamated.hpp>

#include "sgwave/manifold.hpp"

using namespace sgw;

namespace {

// Independent central-difference gradient of the penalty.
Vec fd_penalty_grad(const ManifoldSpec& spec, const Vec& x, double h) {
    Vec g(x.size());
    Vec xp = x, xm = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        xp[k] += h;
        xm[k] -= h;
        g[k] = (spec.penalty_fn(xp.data()) - spec.penalty_fn(xm.data())) / (2.0 * h);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    return g;
}

Vec random_unit(RngStream& rng, int n) {
    Vec p(n);
    double r = 0.0;
    while (r < 1e-8) {
        for (int k = 0; k < n; ++k) p[k] = rng.next_gauss();
        r = norm2(n, p.data());
    }
    scale(n, 1.0 / r, p.data());
    return p;
}

} // namespace

TEST_CASE("sphere generators are the rotation pair matrices") {
    auto g2 = sphere_generators(2);
    REQUIRE(g2.size() == 1);
    CHECK(g2[0](0, 1) == 1.0);
    CHECK(g2[0](1, 0) == -1.0);
    CHECK(g2[0](0, 0) == 0.0);
    CHECK(g2[0](1, 1) == 0.0);

    CHECK_THROWS_AS(sphere_generators(1), std::invalid_argument);

    auto g3 = sphere_generators(3);
    REQUIRE(g3.size() == 3);
    // exact skew symmetry with integer entries
    for (const Mat& a : g3) CHECK(a.max_abs_symmetric_part() == 0.0);

    Vec p = {0.0, 1.0, 0.0};
    Vec out(3);
    g3[sphere_generator_index(3, 0, 1)].apply(p.data(), out.data());
    CHECK(out == Vec{1.0, 0.0, 0.0});
    g3[sphere_generator_index(3, 0, 2)].apply(p.data(), out.data());
    CHECK(out == Vec{0.0, 0.0, 0.0});
    g3[sphere_generator_index(3, 1, 2)].apply(p.data(), out.data());
    CHECK(out == Vec{0.0, 0.0, -1.0});
}

TEST_CASE("relabeled 3d generators act as cross products") {
    auto g3 = sphere_generators(3);
    // A_k = (-1)^{i+j+1} A^{ij} with {i,j,k} = {1,2,3} gives A_k p = p x e_k
    struct Relabel {
        int gen;
        double sign;
    };
    Relabel map[3] = {{sphere_generator_index(3, 1, 2), 1.0},
                      {sphere_generator_index(3, 0, 2), -1.0},
                      {sphere_generator_index(3, 0, 1), 1.0}};
    RngStream rng(stream_key(99, 0, 0));
    for (int it = 0; it < 100; ++it) {
        Vec p = {rng.next_gauss(), rng.next_gauss(), rng.next_gauss()};
        for (int k = 0; k < 3; ++k) {
            Vec e(3, 0.0);
            e[k] = 1.0;
            Vec expect = cross3(p, e);
            Vec got(3);
            g3[map[k].gen].apply(p.data(), got.data());
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(map[k].sign * got[c] - expect[c]) < 1e-15);
        }
    }
}

TEST_CASE("penalty vanishes on the sphere and matches the quadratic well") {
    ManifoldSpec spec = make_sphere(3);

    Vec on = {1.0, 0.0, 0.0};
    CHECK(penalty(spec, on) == 0.0);

    Vec origin = {0.0, 0.0, 0.0};
    CHECK(penalty(spec, origin) == 1.0); // constant plateau inside
    Vec far = {3.0, 0.0, 0.0};
    CHECK(penalty(spec, far) == 1.0); // constant plateau outside

    // active shell: phi(t) = (t-1)^2 exactly
    Vec x = {1.1, 0.0, 0.0};
    double t = 1.1 * 1.1;
    CHECK(penalty(spec, x) == Catch::Approx((t - 1.0) * (t - 1.0)).epsilon(1e-12));
    CHECK(penalty(spec, x) == Catch::Approx(0.0441).epsilon(1e-12));

    RngStream rng(stream_key(7, 0, 0));
    for (int it = 0; it < 100; ++it) {
        Vec p = random_unit(rng, 3);
        CHECK(penalty(spec, p) < 1e-25);
        Vec g = penalty_grad(spec, p);
        CHECK(norm2(3, g.data()) < 1e-12);
    }
}

TEST_CASE("penalty gradient: closed form, finite differences, orbit orthogonality") {
    ManifoldSpec spec = make_sphere(3);

    // chain rule on the active shell: grad F = 2 (|x|^2 - 1) * 2x
    Vec x = {1.1, 0.0, 0.0};
    Vec g = penalty_grad(spec, x);
    double expect = 2.0 * (1.1 * 1.1 - 1.0) * 2.0 * 1.1;
    CHECK(g[0] == Catch::Approx(expect).epsilon(1e-12));
    CHECK(g[0] == Catch::Approx(0.924).epsilon(1e-12));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);

    // finite-difference oracle with observed second-order convergence
    RngStream rng(stream_key(13, 0, 0));
    Vec base = {0.9, 0.35, -0.2};
    Vec exact = penalty_grad(spec, base);
    std::vector<double> hs, errs;
    for (double h : {1e-3, 3.16e-4, 1e-4, 3.16e-5, 1e-5}) {
        Vec fd = fd_penalty_grad(spec, base, h);
        double e = 0.0;
        for (int k = 0; k < 3; ++k) e = std::max(e, std::abs(fd[k] - exact[k]));
        hs.push_back(std::log(h));
        errs.push_back(std::log(e));
    }
    CHECK(fit_slope(hs, errs) >= 1.9);

    // <grad F(x), A^i x> = 0 for any x
    for (int it = 0; it < 1000; ++it) {
        Vec y(3);
        for (auto& v : y) v = 2.5 * rng.next_gauss();
        Vec gy = penalty_grad(spec, y);
        Vec ay(3);
        for (const Mat& a : spec.generators) {
            a.apply(y.data(), ay.data());
            double denom = std::max(1.0, norm2(3, gy.data()) * norm2(3, ay.data()));
            CHECK(std::abs(dot(3, gy.data(), ay.data())) / denom < 1e-12);
        }
    }
}

TEST_CASE("tangent projection on the sphere") {
    ManifoldSpec spec = make_sphere(3);
    Vec e1 = {1, 0, 0}, e2 = {0, 1, 0};
    Vec out(3);

    tangent_project(spec, e1.data(), e1.data(), out.data());
    CHECK(norm2(3, out.data()) == 0.0);
    tangent_project(spec, e1.data(), e2.data(), out.data());
    CHECK(out == e2);

    double s = 1.0 / std::sqrt(2.0);
    Vec p = {s, s, 0.0};
    Vec w = {1.0, 0.0, 0.0};
    tangent_project(spec, p.data(), w.data(), out.data());
    CHECK(out[0] == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(out[1] == Catch::Approx(-0.5).epsilon(1e-12));
    CHECK(out[2] == 0.0);

    // idempotent and orthogonal to p
    Vec out2(3);
    tangent_project(spec, p.data(), out.data(), out2.data());
    for (int k = 0; k < 3; ++k) CHECK(out2[k] == Catch::Approx(out[k]).margin(1e-15));
    CHECK(std::abs(dot(3, out.data(), p.data())) < 1e-15);

    Vec off = {1.1, 0.0, 0.0};
    CHECK_THROWS_AS(tangent_project(spec, off.data(), w.data(), out.data()), std::domain_error);
}

TEST_CASE("second fundamental form matches the sphere closed form") {
    ManifoldSpec circle = make_sphere(2);
    Vec p = {1.0, 0.0}, xi = {0.0, 1.0};
    Vec s = second_fundamental_form(circle, p, xi);
    CHECK(s[0] == Catch::Approx(-1.0).epsilon(1e-14));
    CHECK(s[1] == Catch::Approx(0.0).margin(1e-14));

    ManifoldSpec sphere = make_sphere(3);
    Vec p3 = {0.0, 0.0, 1.0}, xi3 = {2.0, 0.0, 0.0};
    Vec s3 = second_fundamental_form(sphere, p3, xi3);
    CHECK(s3[0] == Catch::Approx(0.0).margin(1e-14));
    CHECK(s3[1] == Catch::Approx(0.0).margin(1e-14));
    CHECK(s3[2] == Catch::Approx(-4.0).epsilon(1e-14));

    Vec zero = {0.0, 0.0, 0.0};
    Vec sz = second_fundamental_form(sphere, p3, zero);
    CHECK(norm2(3, sz.data()) == 0.0);

    // property: S_p(xi, xi) = -|xi|^2 p for random tangent data
    RngStream rng(stream_key(17, 0, 0));
    for (int it = 0; it < 1000; ++it) {
        Vec q = random_unit(rng, 3);
        Vec w = {rng.next_gauss(), rng.next_gauss(), rng.next_gauss()};
        Vec t(3);
        tangent_project(sphere, q.data(), w.data(), t.data());
        double t2 = dot(3, t.data(), t.data());
        if (t2 < 1e-12) continue;
        Vec sq(3);
        second_fundamental_form(sphere, q.data(), t.data(), sq.data());
        for (int k = 0; k < 3; ++k) CHECK(std::abs(sq[k] + t2 * q[k]) / t2 < 1e-12);
    }

    // non-tangent input is rejected
    Vec bad = {1.0, 0.0, 0.5};
    Vec out(3);
    CHECK_THROWS_AS(second_fundamental_form(sphere, p3.data(), bad.data(), out.data()),
                    std::domain_error);
}

TEST_CASE("tangent reconstruction round-trips momenta") {
    ManifoldSpec s5 = make_sphere(5);
    RngStream rng(stream_key(23, 0, 0));
    Vec m(s5.generator_count());
    Vec back(5), xi(5), w(5);
    for (int it = 0; it < 1000; ++it) {
        Vec p = random_unit(rng, 5);
        for (auto& v : w) v = rng.next_gauss();
        tangent_project(s5, p.data(), w.data(), xi.data());
        momenta_of(s5, p.data(), xi.data(), m.data());
        reconstruct_tangent(s5, p.data(), m.data(), back.data());
        double scale = std::max(1e-12, norm2(5, xi.data()));
        for (int k = 0; k < 5; ++k) CHECK(std::abs(back[k] - xi[k]) / scale < 1e-12);
    }

    // zero momenta give the zero vector
    std::fill(m.begin(), m.end(), 0.0);
    Vec p = random_unit(rng, 5);
    reconstruct_tangent(s5, p.data(), m.data(), back.data());
    CHECK(norm2(5, back.data()) == 0.0);

    // frame round trip on the 2-sphere
    ManifoldSpec s3 = make_sphere(3);
    Vec e1 = {1, 0, 0}, e2 = {0, 1, 0}, out(3);
    TangentFrame f = tangent_frame(s3, e1, e2);
    reconstruct_tangent(s3, f.base_point.data(), f.momenta.data(), out.data());
    for (int k = 0; k < 3; ++k) CHECK(std::abs(out[k] - e2[k]) < 1e-14);
}

TEST_CASE("retraction derivative separates tangent from normal directions") {
    ManifoldSpec spec = make_sphere(3);
    Vec e1 = {1, 0, 0}, e2 = {0, 1, 0};
    CHECK(retraction_derivative_test(spec, e1, e2));
    CHECK_FALSE(retraction_derivative_test(spec, e1, e1));

    Vec p = {0.6, 0.8, 0.0}, w = {0.8, -0.6, 0.0};
    CHECK(retraction_derivative_test(spec, p, w));

    Vec inside = {0.1, 0.0, 0.0};
    CHECK_THROWS_AS(retraction_derivative_test(spec, inside, e2), std::domain_error);

    // agreement with the <w, p> = 0 predicate
    RngStream rng(stream_key(31, 0, 0));
    for (int it = 0; it < 1000; ++it) {
        Vec q = random_unit(rng, 3);
        Vec v = {rng.next_gauss(), rng.next_gauss(), rng.next_gauss()};
        if (it % 2 == 0) {
            Vec t(3);
            tangent_project(spec, q.data(), v.data(), t.data());
            if (norm2(3, t.data()) < 1e-6) continue;
            CHECK(retraction_derivative_test(spec, q.data(), t.data()));
        } else {
            // guarantee a visible normal component
            axpy(3, 0.5 + std::abs(rng.next_gauss()), q.data(), v.data());
            CHECK_FALSE(retraction_derivative_test(spec, q.data(), v.data()));
        }
    }
}

TEST_CASE("user-supplied descriptions run through the generic paths") {
    // same geometry as the built-in sphere, but supplied as opaque callables:
    // generic projector, callable partition, difference-quotient frame
    // derivatives
    ManifoldSpec user = make_sphere(3);
    user.is_sphere = false;
    user.kronecker_partition = false;
    user.partition_fn = [](int i, int j, const double*) { return i == j ? 1.0 : 0.0; };

    AxiomReport rep = validate_axioms(user, 300);
    CHECK(rep.max_skew == 0.0);
    CHECK(rep.max_grad_orbit < 1e-12);
    CHECK(rep.max_reconstruction < 1e-12);

    ManifoldSpec sphere = make_sphere(3);
    RngStream rng(stream_key(61, 0, 0));
    for (int it = 0; it < 50; ++it) {
        Vec p = random_unit(rng, 3);
        Vec w = {rng.next_gauss(), rng.next_gauss(), rng.next_gauss()};
        Vec t_user(3), t_sphere(3);
        tangent_project(user, p.data(), w.data(), t_user.data());
        tangent_project(sphere, p.data(), w.data(), t_sphere.data());
        for (int k = 0; k < 3; ++k) CHECK(t_user[k] == Catch::Approx(t_sphere[k]).margin(1e-12));

        double t2 = dot(3, t_user.data(), t_user.data());
        if (t2 < 1e-10) continue;
        Vec s(3);
        second_fundamental_form(user, p.data(), t_user.data(), s.data());
        // difference-quotient frame derivatives agree with the closed form
        for (int k = 0; k < 3; ++k)
            CHECK(s[k] == Catch::Approx(-t2 * p[k]).margin(1e-8 * std::max(1.0, t2)));
    }
}

TEST_CASE("axiom audit passes for spheres and flags broken inputs") {
    ManifoldSpec spec = make_sphere(4);
    AxiomReport rep = validate_axioms(spec, 1000);
    CHECK(rep.pass(1e-12));
    CHECK(rep.max_skew == 0.0);
    CHECK(rep.max_grad_orbit < 1e-12);
    CHECK(rep.max_reconstruction < 1e-12);

    // negative control: a symmetric matrix is not a valid generator
    ManifoldSpec broken = make_sphere(3);
    broken.generators[0](0, 1) = 1.0;
    broken.generators[0](1, 0) = 1.0;
    AxiomReport bad = validate_axioms(broken, 100);
    CHECK(bad.max_skew == 2.0);
    CHECK_FALSE(bad.pass(1e-12));

    // negative control: scaling the partition breaks reconstruction by 2x
    ManifoldSpec scaled = make_sphere(3);
    scaled.kronecker_partition = false;
    scaled.partition_table.assign(9, 0.0);
    for (int i = 0; i < 3; ++i) scaled.partition_table[i * 3 + i] = 2.0;
    AxiomReport twice = validate_axioms(scaled, 200);
    // reconstruction comes back doubled: order-one relative error
    CHECK(twice.max_reconstruction > 0.5);
    CHECK_FALSE(twice.pass(1e-12));
}
