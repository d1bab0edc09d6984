#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sgwave/linalg.hpp"
#include "sgwave/manifold.hpp"

namespace sgw {

using ScalarFn = std::function<double(const double*)>;
using VectorFn = std::function<void(const double*, double*)>;          // R^n -> R^n
using MatrixApplyFn = std::function<void(const double*, const double*, double*)>; // (p, v) -> A(p) v

/// Drift/diffusion building blocks of the affine nonlinearity
///   b(p, v, w_1..w_d) = b0(p) v + sum_k bk(p) w_k + b_{d+1}(p).
/// All components vanish outside the ball of radius support_radius; the
/// component supports themselves stay one unit smaller so smoothing never
/// leaks past the common bound. Sup norms over the target manifold are
/// recorded at construction.
struct CoefficientSet {
    int ambient_dim = 0;
    int spatial_dim = 1;

    ScalarFn f0, g0;
    std::vector<MatrixApplyFn> fk, gk; // one per spatial axis, may be empty
    VectorFn fd1, gd1;

    double support_radius = 4.0;    // common bound R0
    double component_support = 3.0; // actual component support, <= R0 - 1

    double f0_sup = 0.0, g0_sup = 0.0;
    double fd1_sup = 0.0, gd1_sup = 0.0; // sup over the manifold
    std::vector<double> fk_sup, gk_sup;

    bool has_fk() const { return !fk.empty(); }
    bool has_gk() const { return !gk.empty(); }
};

/// f0(p) v + sum_k fk(p) w_k + fd1(p).
inline void assemble_drift(const CoefficientSet& set, const double* p, const double* v,
                           const double* const* grad_u, double* out) {
    const int n = set.ambient_dim;
    double tmp[kMaxAmbient];
    double c = set.f0 ? set.f0(p) : 0.0;
    for (int i = 0; i < n; ++i) out[i] = c * v[i];
    if (set.has_fk())
        for (int k = 0; k < set.spatial_dim; ++k) {
            if (!set.fk[k]) continue;
            set.fk[k](p, grad_u[k], tmp);
            axpy(n, 1.0, tmp, out);
        }
    if (set.fd1) {
        set.fd1(p, tmp);
        axpy(n, 1.0, tmp, out);
    }
}

inline void assemble_diffusion(const CoefficientSet& set, const double* p, const double* v,
                               const double* const* grad_u, double* out) {
    const int n = set.ambient_dim;
    double tmp[kMaxAmbient];
    double c = set.g0 ? set.g0(p) : 0.0;
    for (int i = 0; i < n; ++i) out[i] = c * v[i];
    if (set.has_gk())
        for (int k = 0; k < set.spatial_dim; ++k) {
            if (!set.gk[k]) continue;
            set.gk[k](p, grad_u[k], tmp);
            axpy(n, 1.0, tmp, out);
        }
    if (set.gd1) {
        set.gd1(p, tmp);
        axpy(n, 1.0, tmp, out);
    }
}

namespace detail {

// Radial cutoff equal to 1 on |y| <= a and 0 outside |y| >= b.
inline double radial_cutoff(int n, const double* y, double a, double b) {
    double r = norm2(n, y);
    return smooth_step((b - r) / (b - a));
}

} // namespace detail

inline CoefficientSet make_zero_coefficients(int ambient_dim, int spatial_dim) {
    CoefficientSet s;
    s.ambient_dim = ambient_dim;
    s.spatial_dim = spatial_dim;
    return s;
}

/// Constant vector channel (drift "constant_field" or diffusion
/// "additive_noise"), tapered to zero outside the support ball.
inline CoefficientSet make_constant_field(int ambient_dim, int spatial_dim, const Vec& value,
                                          bool diffusion_channel = false) {
    CoefficientSet s = make_zero_coefficients(ambient_dim, spatial_dim);
    const double a = s.component_support - 0.5, b = s.component_support;
    Vec c = value;
    VectorFn fn = [ambient_dim, c, a, b](const double* p, double* out) {
        double w = detail::radial_cutoff(ambient_dim, p, a, b);
        for (int i = 0; i < ambient_dim; ++i) out[i] = w * c[i];
    };
    double sup = norm2(ambient_dim, value.data());
    if (diffusion_channel) {
        s.gd1 = fn;
        s.gd1_sup = sup;
    } else {
        s.fd1 = fn;
        s.fd1_sup = sup;
    }
    return s;
}

/// f0 = -gamma inside the support ball: linear velocity damping.
inline CoefficientSet make_linear_damping(int ambient_dim, int spatial_dim, double gamma) {
    CoefficientSet s = make_zero_coefficients(ambient_dim, spatial_dim);
    const double a = s.component_support - 0.5, b = s.component_support;
    s.f0 = [ambient_dim, gamma, a, b](const double* p) {
        return -gamma * detail::radial_cutoff(ambient_dim, p, a, b);
    };
    s.f0_sup = std::abs(gamma);
    return s;
}

/// g0 = sigma inside the support ball: noise multiplying the velocity.
inline CoefficientSet make_multiplicative_noise(int ambient_dim, int spatial_dim, double sigma) {
    CoefficientSet s = make_zero_coefficients(ambient_dim, spatial_dim);
    const double a = s.component_support - 0.5, b = s.component_support;
    s.g0 = [ambient_dim, sigma, a, b](const double* p) {
        return sigma * detail::radial_cutoff(ambient_dim, p, a, b);
    };
    s.g0_sup = std::abs(sigma);
    return s;
}

/// Merge channels of several sets (each channel may be set at most once).
inline CoefficientSet merge_coefficients(const std::vector<CoefficientSet>& parts) {
    if (parts.empty()) throw std::invalid_argument("merge_coefficients: empty list");
    CoefficientSet out = make_zero_coefficients(parts[0].ambient_dim, parts[0].spatial_dim);
    auto take_scalar = [](ScalarFn& dst, double& dsup, const ScalarFn& src, double ssup) {
        if (!src) return;
        if (dst) throw std::invalid_argument("merge_coefficients: channel set twice");
        dst = src;
        dsup = ssup;
    };
    auto take_vector = [](VectorFn& dst, double& dsup, const VectorFn& src, double ssup) {
        if (!src) return;
        if (dst) throw std::invalid_argument("merge_coefficients: channel set twice");
        dst = src;
        dsup = ssup;
    };
    for (const auto& p : parts) {
        take_scalar(out.f0, out.f0_sup, p.f0, p.f0_sup);
        take_scalar(out.g0, out.g0_sup, p.g0, p.g0_sup);
        take_vector(out.fd1, out.fd1_sup, p.fd1, p.fd1_sup);
        take_vector(out.gd1, out.gd1_sup, p.gd1, p.gd1_sup);
        if (p.has_fk()) {
            if (out.has_fk()) throw std::invalid_argument("merge_coefficients: channel set twice");
            out.fk = p.fk;
            out.fk_sup = p.fk_sup;
        }
        if (p.has_gk()) {
            if (out.has_gk()) throw std::invalid_argument("merge_coefficients: channel set twice");
            out.gk = p.gk;
            out.gk_sup = p.gk_sup;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Smoothing

namespace detail {

inline double bump_profile(const double* u, int n) {
    double r2 = dot(n, u, u);
    if (r2 >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - r2));
}

struct GaussLegendreRule {
    std::vector<double> nodes, weights; // on [-1, 1]
};

// Newton iteration on Legendre polynomials.
inline GaussLegendreRule gauss_legendre(int order) {
    GaussLegendreRule r;
    r.nodes.resize(order);
    r.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        double x = std::cos(3.14159265358979323846 * (i + 0.75) / (order + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = order * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= order; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = order * (x * p1 - p0) / (x * x - 1.0);
        r.nodes[i] = x;
        r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

} // namespace detail

/// Approximation-of-identity kernel: the standard smooth symmetric bump
/// supported in the unit ball, scaled to support radius 1/level. The
/// profile mass is computed once per ambient dimension, refined until two
/// successive quadrature orders agree to 1e-10.
struct Mollifier {
    int ambient_dim = 0;
    int level = 1; // support radius 1/level
    int order = 8; // tensor Gauss-Legendre points per axis

    double support_radius() const { return 1.0 / level; }

    static double profile_mass(int n) {
        static std::array<double, kMaxAmbient + 1> cache{};
        if (cache[n] != 0.0) return cache[n];
        double prev = 0.0;
        for (int ord = 16; ord <= 128; ord *= 2) {
            auto rule = detail::gauss_legendre(ord);
            double total = 0.0;
            std::vector<int> ix(n, 0);
            double u[kMaxAmbient];
            while (true) {
                double w = 1.0;
                for (int k = 0; k < n; ++k) {
                    u[k] = rule.nodes[ix[k]];
                    w *= rule.weights[ix[k]];
                }
                total += w * detail::bump_profile(u, n);
                int k = 0;
                while (k < n && ++ix[k] == ord) ix[k++] = 0;
                if (k == n) break;
            }
            if (prev != 0.0 && std::abs(total - prev) <= 1e-10 * total) {
                cache[n] = total;
                return total;
            }
            prev = total;
        }
        cache[n] = prev;
        return prev;
    }

    /// Normalized density at z (integrates to one).
    double density(const double* z) const {
        double u[kMaxAmbient];
        for (int k = 0; k < ambient_dim; ++k) u[k] = z[k] * level;
        double m = 1.0;
        for (int k = 0; k < ambient_dim; ++k) m *= level;
        return m * detail::bump_profile(u, ambient_dim) / profile_mass(ambient_dim);
    }
};

namespace detail {

// Shared quadrature for one smoothing level: nodes u_q in the unit cube and
// kernel weights normalized to sum exactly to one, so smoothing a constant
// reproduces it and sup norms never grow.
struct MollifyRule {
    std::vector<std::array<double, kMaxAmbient>> offsets; // z_q = u_q / level
    std::vector<double> weights;
};

inline std::shared_ptr<const MollifyRule> make_mollify_rule(int n, int level, int order) {
    auto rule = gauss_legendre(order);
    auto out = std::make_shared<MollifyRule>();
    std::vector<int> ix(n, 0);
    double u[kMaxAmbient];
    double mass = 0.0;
    while (true) {
        double w = 1.0;
        for (int k = 0; k < n; ++k) {
            u[k] = rule.nodes[ix[k]];
            w *= rule.weights[ix[k]];
        }
        double kw = w * bump_profile(u, n);
        if (kw > 0.0) {
            std::array<double, kMaxAmbient> z{};
            for (int k = 0; k < n; ++k) z[k] = u[k] / level;
            out->offsets.push_back(z);
            out->weights.push_back(kw);
            mass += kw;
        }
        int k = 0;
        while (k < n && ++ix[k] == order) ix[k++] = 0;
        if (k == n) break;
    }
    for (double& w : out->weights) w /= mass;
    return out;
}

} // namespace detail

/// Convolve every component with the level-m kernel. Evaluation is on
/// demand by tensor quadrature over the kernel ball; sup norms cannot grow
/// because the discrete kernel weights are a convex combination. Inputs
/// must keep their support one unit inside the common bound so the dilation
/// by 1/m stays within it.
inline CoefficientSet mollify(const CoefficientSet& set, int level, int order = 8) {
    if (level < 1) throw std::invalid_argument("mollify: level must be >= 1");
    if (set.component_support + 1.0 / level > set.support_radius)
        throw std::invalid_argument("mollify: component support too close to the common bound");
    const int n = set.ambient_dim;
    auto rule = detail::make_mollify_rule(n, level, order);

    auto smooth_scalar = [n, rule](const ScalarFn& f) -> ScalarFn {
        if (!f) return {};
        return [n, rule, f](const double* p) {
            double y[kMaxAmbient];
            double s = 0.0;
            for (std::size_t q = 0; q < rule->weights.size(); ++q) {
                for (int k = 0; k < n; ++k) y[k] = p[k] - rule->offsets[q][k];
                s += rule->weights[q] * f(y);
            }
            return s;
        };
    };
    auto smooth_vector = [n, rule](const VectorFn& f) -> VectorFn {
        if (!f) return {};
        return [n, rule, f](const double* p, double* out) {
            double y[kMaxAmbient], v[kMaxAmbient];
            for (int k = 0; k < n; ++k) out[k] = 0.0;
            for (std::size_t q = 0; q < rule->weights.size(); ++q) {
                for (int k = 0; k < n; ++k) y[k] = p[k] - rule->offsets[q][k];
                f(y, v);
                axpy(n, rule->weights[q], v, out);
            }
        };
    };
    auto smooth_matrix = [n, rule](const MatrixApplyFn& f) -> MatrixApplyFn {
        if (!f) return {};
        return [n, rule, f](const double* p, const double* w, double* out) {
            double y[kMaxAmbient], v[kMaxAmbient];
            for (int k = 0; k < n; ++k) out[k] = 0.0;
            for (std::size_t q = 0; q < rule->weights.size(); ++q) {
                for (int k = 0; k < n; ++k) y[k] = p[k] - rule->offsets[q][k];
                f(y, w, v);
                axpy(n, rule->weights[q], v, out);
            }
        };
    };

    CoefficientSet out = set;
    out.f0 = smooth_scalar(set.f0);
    out.g0 = smooth_scalar(set.g0);
    out.fd1 = smooth_vector(set.fd1);
    out.gd1 = smooth_vector(set.gd1);
    for (auto& m : out.fk) m = smooth_matrix(m);
    for (auto& m : out.gk) m = smooth_matrix(m);
    out.component_support = set.component_support + 1.0 / level;
    // recorded sup norms are kept: smoothing cannot increase them
    return out;
}

// ---------------------------------------------------------------------------
// Tabulated coefficients

/// Function given by values on a uniform lattice over a box, extended by
/// zero outside and evaluated by multilinear interpolation.
struct LatticeFn {
    int dim = 0;                 // ambient dimension of the argument
    int comps = 1;               // values per lattice point
    Vec lo, hi;                  // box corners
    std::vector<int> points;     // per axis
    std::vector<double> values;  // lattice-major, comps minor

    void eval(const double* p, double* out) const {
        for (int c = 0; c < comps; ++c) out[c] = 0.0;
        double t[kMaxAmbient];
        int base[kMaxAmbient];
        for (int k = 0; k < dim; ++k) {
            double step = (hi[k] - lo[k]) / (points[k] - 1);
            double s = (p[k] - lo[k]) / step;
            if (s < 0.0 || s > points[k] - 1) return; // outside: compactly supported
            int i = static_cast<int>(s);
            if (i >= points[k] - 1) i = points[k] - 2;
            base[k] = i;
            t[k] = s - i;
        }
        int corners = 1 << dim;
        for (int c = 0; c < corners; ++c) {
            double w = 1.0;
            std::size_t idx = 0, stridec = 1;
            for (int k = 0; k < dim; ++k) {
                int bit = (c >> k) & 1;
                w *= bit ? t[k] : 1.0 - t[k];
                idx += static_cast<std::size_t>(base[k] + bit) * stridec;
                stridec *= static_cast<std::size_t>(points[k]);
            }
            const double* v = values.data() + idx * comps;
            for (int cc = 0; cc < comps; ++cc) out[cc] += w * v[cc];
        }
    }

    double sup_norm() const {
        double m = 0.0;
        for (std::size_t i = 0; i * comps < values.size(); ++i)
            m = std::max(m, norm2(comps, values.data() + i * comps));
        return m;
    }
};

} // namespace sgw
