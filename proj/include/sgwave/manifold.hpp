#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgwave/linalg.hpp"
#include "sgwave/rng.hpp"

namespace sgw {

/// C^inf transition: 0 for s <= 0, 1 for s >= 1, strictly monotone between.
inline double smooth_step(double s) {
    auto b = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    double lo = b(s), hi = b(1.0 - s);
    if (lo == 0.0) return 0.0;
    if (hi == 0.0) return 1.0;
    return lo / (lo + hi);
}

inline double smooth_step_deriv(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    auto b = [](double t) { return std::exp(-1.0 / t); };
    double f = b(s), g = b(1.0 - s);
    double fp = f / (s * s), gp = -g / ((1.0 - s) * (1.0 - s));
    double d = f + g;
    return (fp * d - f * (fp + gp)) / (d * d);
}

/// Plateau window: exactly 1 on [b, c], exactly 0 outside (a, d).
inline double plateau(double t, double a, double b, double c, double d) {
    return smooth_step((t - a) / (b - a)) * smooth_step((d - t) / (d - c));
}

inline double plateau_deriv(double t, double a, double b, double c, double d) {
    double up = smooth_step((t - a) / (b - a));
    double dn = smooth_step((d - t) / (d - c));
    double dup = smooth_step_deriv((t - a) / (b - a)) / (b - a);
    double ddn = -smooth_step_deriv((d - t) / (d - c)) / (d - c);
    return dup * dn + up * ddn;
}

/// Generator counts are capped so pointwise kernels can use stack buffers.
inline constexpr int kMaxGenerators = 64;

/// Extrinsic description of the target manifold M in R^n: a penalty
/// function vanishing exactly on M, skew generators whose orbits span the
/// tangent spaces, and a partition h_ij giving the tangent reconstruction
/// xi = sum_ij h_ij(p) <xi, A^i p> A^j p.
///
/// The unit sphere is built in (make_sphere). Other targets are accepted
/// through user-supplied callables and should be checked with
/// validate_axioms before use.
struct ManifoldSpec {
    int ambient_dim = 0;
    std::vector<Mat> generators;

    bool kronecker_partition = true;
    std::vector<double> partition_table;                            // N*N constants, row-major
    std::function<double(int, int, const double*)> partition_fn;    // general h_ij(p)

    double r_in = 0.5;  // |x| below which the penalty is a constant plateau
    double r_out = 2.0; // |x| above which the penalty is a constant plateau

    std::function<double(const double*)> penalty_fn;
    std::function<void(const double*, double*)> penalty_grad_fn;
    std::function<void(std::uint64_t&, double*)> point_sampler; // random point on M
    bool is_sphere = false;
    double on_manifold_tol = 1e-8;

    int generator_count() const { return static_cast<int>(generators.size()); }

    /// Bounds that pointwise kernels rely on for their stack scratch.
    void check_limits() const {
        if (ambient_dim < 2 || ambient_dim > kMaxAmbient)
            throw std::invalid_argument("manifold: ambient dimension out of range");
        if (generators.empty() || generator_count() > kMaxGenerators)
            throw std::invalid_argument("manifold: generator count out of range");
        for (const Mat& a : generators)
            if (a.n != ambient_dim)
                throw std::invalid_argument("manifold: generator dimension mismatch");
    }

    double h(int i, int j, const double* p) const {
        if (kronecker_partition) return i == j ? 1.0 : 0.0;
        if (!partition_table.empty())
            return partition_table[static_cast<std::size_t>(i) * generators.size() + j];
        return partition_fn(i, j, p);
    }

    bool on_manifold(const double* p) const {
        if (is_sphere) return std::abs(norm2(ambient_dim, p) - 1.0) <= on_manifold_tol;
        return penalty_fn(p) <= on_manifold_tol;
    }
};

/// The n(n-1)/2 rotation generators A^{ij}, i < j, with entry (i,j) = 1 and
/// (j,i) = -1. Ordering is lexicographic in (i, j).
inline std::vector<Mat> sphere_generators(int n) {
    if (n < 2) throw std::invalid_argument("sphere_generators: ambient dimension must be >= 2");
    if (n > kMaxAmbient)
        throw std::invalid_argument("sphere_generators: ambient dimension exceeds the supported "
                                    "maximum of " + std::to_string(kMaxAmbient));
    std::vector<Mat> gens;
    gens.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Mat a(n);
            a(i, j) = 1.0;
            a(j, i) = -1.0;
            gens.push_back(std::move(a));
        }
    return gens;
}

inline int sphere_generator_index(int n, int i, int j) {
    // 0-based (i, j), i < j, lexicographic
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

namespace detail {

// Radial penalty profile: phi(t) = (t-1)^2 on the active band of t = |x|^2,
// blended into the constant 1 on both plateaux. phi(t) = 0 iff t = 1.
inline double sphere_phi(double t) {
    double s = plateau(t, 0.25, 0.5, 2.0, 4.0);
    double q = (t - 1.0) * (t - 1.0);
    return q * s + (1.0 - s);
}

inline double sphere_phi_deriv(double t) {
    double s = plateau(t, 0.25, 0.5, 2.0, 4.0);
    double sp = plateau_deriv(t, 0.25, 0.5, 2.0, 4.0);
    double q = (t - 1.0) * (t - 1.0);
    return 2.0 * (t - 1.0) * s + sp * (q - 1.0);
}

} // namespace detail

/// Target S^{n-1} subset R^n with the quadratic-well radial penalty.
inline ManifoldSpec make_sphere(int n) {
    if (n < 2 || n > kMaxAmbient)
        throw std::invalid_argument("make_sphere: ambient dimension must be in [2, " +
                                    std::to_string(kMaxAmbient) + "]");
    ManifoldSpec spec;
    spec.ambient_dim = n;
    spec.generators = sphere_generators(n);
    spec.kronecker_partition = true;
    spec.r_in = 0.5;
    spec.r_out = 2.0;
    spec.is_sphere = true;
    spec.penalty_fn = [n](const double* x) {
        return detail::sphere_phi(dot(n, x, x));
    };
    spec.penalty_grad_fn = [n](const double* x, double* g) {
        double d = 2.0 * detail::sphere_phi_deriv(dot(n, x, x));
        for (int k = 0; k < n; ++k) g[k] = d * x[k];
    };
    spec.point_sampler = [n](std::uint64_t& key, double* p) {
        RngStream rng(splitmix64(key));
        double r = 0.0;
        while (r < 1e-8) {
            for (int k = 0; k < n; ++k) p[k] = rng.next_gauss();
            r = norm2(n, p);
        }
        scale(n, 1.0 / r, p);
    };
    return spec;
}

inline double penalty(const ManifoldSpec& spec, const double* x) { return spec.penalty_fn(x); }
inline double penalty(const ManifoldSpec& spec, const Vec& x) { return spec.penalty_fn(x.data()); }

inline void penalty_grad(const ManifoldSpec& spec, const double* x, double* g) {
    spec.penalty_grad_fn(x, g);
}

inline Vec penalty_grad(const ManifoldSpec& spec, const Vec& x) {
    Vec g(x.size());
    spec.penalty_grad_fn(x.data(), g.data());
    return g;
}

inline void require_on_manifold(const ManifoldSpec& spec, const double* p, const char* who) {
    if (!spec.on_manifold(p))
        throw std::domain_error(std::string(who) + ": base point is not on the manifold");
}

/// Orthogonal projection of w onto T_p M. For the sphere this is
/// (I - p p^T / |p|^2) w; otherwise the partition reconstruction is used,
/// which agrees with the orthogonal projector by the tangent-frame identity.
inline void tangent_project(const ManifoldSpec& spec, const double* p, const double* w, double* out);

/// Momenta of a vector against the generator frame: m_i = <xi, A^i p>.
inline void momenta_of(const ManifoldSpec& spec, const double* p, const double* xi, double* m) {
    const int n = spec.ambient_dim;
    double ap[kMaxAmbient];
    for (int i = 0; i < spec.generator_count(); ++i) {
        spec.generators[i].apply(p, ap);
        m[i] = dot(n, xi, ap);
    }
}

/// Tangent vector from its momenta: sum_ij h_ij(p) m_i A^j p. Inverts
/// momenta_of exactly on tangent vectors.
inline void reconstruct_tangent(const ManifoldSpec& spec, const double* p, const double* m,
                                double* out) {
    const int n = spec.ambient_dim;
    const int N = spec.generator_count();
    double ajp[kMaxAmbient];
    for (int k = 0; k < n; ++k) out[k] = 0.0;
    if (spec.kronecker_partition) {
        for (int j = 0; j < N; ++j) {
            spec.generators[j].apply(p, ajp);
            axpy(n, m[j], ajp, out);
        }
        return;
    }
    for (int j = 0; j < N; ++j) {
        double w = 0.0;
        for (int i = 0; i < N; ++i) w += spec.h(i, j, p) * m[i];
        if (w == 0.0) continue;
        spec.generators[j].apply(p, ajp);
        axpy(n, w, ajp, out);
    }
}

inline void tangent_project(const ManifoldSpec& spec, const double* p, const double* w,
                            double* out) {
    require_on_manifold(spec, p, "tangent_project");
    const int n = spec.ambient_dim;
    if (spec.is_sphere) {
        double pp = dot(n, p, p);
        double c = dot(n, w, p) / pp;
        for (int k = 0; k < n; ++k) out[k] = w[k] - c * p[k];
        return;
    }
    double m[kMaxGenerators];
    momenta_of(spec, p, w, m);
    reconstruct_tangent(spec, p, m, out);
}

/// Pointwise momenta bundled with their base point.
struct TangentFrame {
    Vec base_point;
    Vec momenta;
};

inline TangentFrame tangent_frame(const ManifoldSpec& spec, const Vec& p, const Vec& xi) {
    TangentFrame f;
    f.base_point = p;
    f.momenta.resize(spec.generator_count());
    momenta_of(spec, p.data(), xi.data(), f.momenta.data());
    return f;
}

namespace detail {

// Frame field Y^k(x) = sum_j h_kj(x) A^j x evaluated off the manifold
// (constant partition extension).
inline void frame_field(const ManifoldSpec& spec, int k, const double* x, double* y) {
    const int n = spec.ambient_dim;
    const int N = spec.generator_count();
    double ajx[kMaxAmbient];
    for (int c = 0; c < n; ++c) y[c] = 0.0;
    for (int j = 0; j < N; ++j) {
        double hk = spec.h(k, j, x);
        if (hk == 0.0) continue;
        spec.generators[j].apply(x, ajx);
        axpy(n, hk, ajx, y);
    }
}

// Directional derivative of Y^k at p along xi. Analytic when the partition
// is constant; otherwise Richardson-extrapolated central differences.
inline void frame_field_deriv(const ManifoldSpec& spec, int k, const double* p, const double* xi,
                              double* out) {
    const int n = spec.ambient_dim;
    const int N = spec.generator_count();
    if (spec.kronecker_partition || !spec.partition_table.empty()) {
        double ajxi[kMaxAmbient];
        for (int c = 0; c < n; ++c) out[c] = 0.0;
        for (int j = 0; j < N; ++j) {
            double hk = spec.h(k, j, p);
            if (hk == 0.0) continue;
            spec.generators[j].apply(xi, ajxi);
            axpy(n, hk, ajxi, out);
        }
        return;
    }
    const double eps = 1e-6;
    double xp[kMaxAmbient], xm[kMaxAmbient], yp[kMaxAmbient], ym[kMaxAmbient];
    double d1[kMaxAmbient], d2[kMaxAmbient];
    auto central = [&](double step, double* d) {
        for (int c = 0; c < n; ++c) {
            xp[c] = p[c] + step * xi[c];
            xm[c] = p[c] - step * xi[c];
        }
        frame_field(spec, k, xp, yp);
        frame_field(spec, k, xm, ym);
        for (int c = 0; c < n; ++c) d[c] = (yp[c] - ym[c]) / (2.0 * step);
    };
    central(eps, d1);
    central(0.5 * eps, d2);
    for (int c = 0; c < n; ++c) out[c] = (4.0 * d2[c] - d1[c]) / 3.0;
}

} // namespace detail

/// Second fundamental form S_p(xi, xi) = sum_k <xi, A^k p> dY^k_p(xi),
/// the normal curvature term of the extrinsic wave equation. For the
/// sphere this reduces to sum_{i<j} <xi, A^{ij} p> A^{ij} xi = -|xi|^2 p.
inline void second_fundamental_form(const ManifoldSpec& spec, const double* p, const double* xi,
                                    double* out) {
    require_on_manifold(spec, p, "second_fundamental_form");
    const int n = spec.ambient_dim;
    {
        double proj[kMaxAmbient];
        tangent_project(spec, p, xi, proj);
        double dev = 0.0;
        for (int c = 0; c < n; ++c) dev = std::max(dev, std::abs(proj[c] - xi[c]));
        double s = norm2(n, xi);
        if (dev > 1e-8 * std::max(1.0, s))
            throw std::domain_error("second_fundamental_form: xi is not tangent at p");
    }
    const int N = spec.generator_count();
    double ap[kMaxAmbient], dy[kMaxAmbient];
    for (int c = 0; c < n; ++c) out[c] = 0.0;
    for (int k = 0; k < N; ++k) {
        spec.generators[k].apply(p, ap);
        double mk = dot(n, xi, ap);
        if (mk == 0.0) continue;
        detail::frame_field_deriv(spec, k, p, xi, dy);
        axpy(n, mk, dy, out);
    }
}

inline Vec second_fundamental_form(const ManifoldSpec& spec, const Vec& p, const Vec& xi) {
    Vec out(p.size());
    second_fundamental_form(spec, p.data(), xi.data(), out.data());
    return out;
}

namespace detail {

inline double sphere_chi(double r) { return plateau(r, 0.25, 0.5, 2.0, 4.0); }
inline double sphere_chi_deriv(double r) { return plateau_deriv(r, 0.25, 0.5, 2.0, 4.0); }

} // namespace detail

/// Apply the derivative of the compactly supported retraction
/// H(x) = chi(|x|) x / |x| at p. On the manifold, H'(p) fixes exactly the
/// tangent vectors.
inline void retraction_jacobian_apply(const ManifoldSpec& spec, const double* p, const double* w,
                                      double* out) {
    const int n = spec.ambient_dim;
    double r = norm2(n, p);
    if (r < spec.r_in)
        throw std::domain_error("retraction_jacobian_apply: point inside the inner cutoff");
    double chi = detail::sphere_chi(r), dchi = detail::sphere_chi_deriv(r);
    double radial = dot(n, p, w) / r; // <p_hat, w>
    for (int c = 0; c < n; ++c) {
        double ph = p[c] / r;
        out[c] = dchi * radial * ph + (chi / r) * (w[c] - radial * ph);
    }
}

/// True iff H'(p) w = w within 1e-10, i.e. iff w is tangent at p.
inline bool retraction_derivative_test(const ManifoldSpec& spec, const double* p, const double* w) {
    const int n = spec.ambient_dim;
    double hw[kMaxAmbient];
    retraction_jacobian_apply(spec, p, w, hw);
    double dev = 0.0;
    for (int c = 0; c < n; ++c) dev = std::max(dev, std::abs(hw[c] - w[c]));
    return dev <= 1e-10 * std::max(1.0, norm2(n, w));
}

inline bool retraction_derivative_test(const ManifoldSpec& spec, const Vec& p, const Vec& w) {
    return retraction_derivative_test(spec, p.data(), w.data());
}

/// Monte-Carlo audit of a manifold description. Checks generator
/// skew-symmetry, orthogonality of the penalty gradient to the generator
/// orbits, the tangent reconstruction identity, and penalty vanishing on M.
struct AxiomReport {
    double max_skew = 0.0;             // ||A + A^T||_max over generators
    double max_grad_orbit = 0.0;       // |<grad F(x), A^i x>| normalized
    double max_reconstruction = 0.0;   // relative tangent round-trip error
    double max_penalty_on_manifold = 0.0;
    double max_penalty_grad_on_manifold = 0.0;

    bool pass(double tol = 1e-12) const {
        return max_skew == 0.0 ? (max_grad_orbit < tol && max_reconstruction < tol &&
                                  max_penalty_on_manifold < tol &&
                                  max_penalty_grad_on_manifold < tol)
                               : false;
    }
};

inline AxiomReport validate_axioms(const ManifoldSpec& spec, int sample_count,
                                   std::uint64_t seed = 2024) {
    spec.check_limits();
    AxiomReport rep;
    const int n = spec.ambient_dim;
    const int N = spec.generator_count();
    for (const Mat& a : spec.generators)
        rep.max_skew = std::max(rep.max_skew, a.max_abs_symmetric_part());

    std::uint64_t key = seed;
    RngStream rng(stream_key(seed, 0, 0));
    double x[kMaxAmbient], g[kMaxAmbient], ap[kMaxAmbient];
    double xi[kMaxAmbient], m[kMaxGenerators], back[kMaxAmbient];

    for (int s = 0; s < sample_count; ++s) {
        // gradient-orbit orthogonality sampled in the active shell
        double r = spec.r_in + (spec.r_out - spec.r_in) * rng.next_uniform();
        double nrm = 0.0;
        while (nrm < 1e-8) {
            for (int c = 0; c < n; ++c) x[c] = rng.next_gauss();
            nrm = norm2(n, x);
        }
        scale(n, r / nrm, x);
        spec.penalty_grad_fn(x, g);
        double gs = norm2(n, g);
        for (int i = 0; i < N; ++i) {
            spec.generators[i].apply(x, ap);
            double denom = std::max(1.0, gs * norm2(n, ap));
            rep.max_grad_orbit = std::max(rep.max_grad_orbit, std::abs(dot(n, g, ap)) / denom);
        }

        // reconstruction identity on tangent vectors built from the orbit frame
        if (spec.point_sampler) {
            double p[kMaxAmbient];
            spec.point_sampler(key, p);
            rep.max_penalty_on_manifold = std::max(rep.max_penalty_on_manifold, spec.penalty_fn(p));
            spec.penalty_grad_fn(p, g);
            rep.max_penalty_grad_on_manifold =
                std::max(rep.max_penalty_grad_on_manifold, norm2(n, g));
            for (int c = 0; c < n; ++c) xi[c] = 0.0;
            for (int i = 0; i < N; ++i) {
                spec.generators[i].apply(p, ap);
                axpy(n, rng.next_gauss(), ap, xi);
            }
            double xs = norm2(n, xi);
            if (xs > 1e-10) {
                momenta_of(spec, p, xi, m);
                reconstruct_tangent(spec, p, m, back);
                double dev = 0.0;
                for (int c = 0; c < n; ++c) dev = std::max(dev, std::abs(back[c] - xi[c]));
                rep.max_reconstruction = std::max(rep.max_reconstruction, dev / xs);
            }
        }
    }
    return rep;
}

} // namespace sgw
