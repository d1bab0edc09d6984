#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sgwave/linalg.hpp"

namespace sgw {

/// Uniform periodic grid on the torus [0, L)^d, d in {1,2,3}.
struct Grid {
    int dim = 1;
    int points = 8;      // nodes per axis
    double length = 1.0; // box edge

    Grid() = default;
    Grid(int d, int p, double l) : dim(d), points(p), length(l) {
        if (d < 1 || d > 3) throw std::invalid_argument("grid.dim: must be 1, 2 or 3");
        if (p < 8) throw std::invalid_argument("grid.points: need at least 8 points per axis");
        if (!(l > 0.0)) throw std::invalid_argument("grid.length: must be positive");
    }

    double spacing() const { return length / points; }

    std::size_t node_count() const {
        std::size_t c = 1;
        for (int k = 0; k < dim; ++k) c *= static_cast<std::size_t>(points);
        return c;
    }

    std::array<int, 3> decode(std::size_t id) const {
        std::array<int, 3> ix{0, 0, 0};
        for (int k = 0; k < dim; ++k) {
            ix[k] = static_cast<int>(id % points);
            id /= points;
        }
        return ix;
    }

    std::size_t encode(const std::array<int, 3>& ix) const {
        std::size_t id = 0;
        for (int k = dim - 1; k >= 0; --k) {
            int w = ((ix[k] % points) + points) % points;
            id = id * points + static_cast<std::size_t>(w);
        }
        return id;
    }

    std::size_t neighbor(std::size_t id, int axis, int dir) const {
        auto ix = decode(id);
        ix[axis] += dir;
        return encode(ix);
    }

    void coords(std::size_t id, double* x) const {
        auto ix = decode(id);
        double h = spacing();
        for (int k = 0; k < dim; ++k) x[k] = ix[k] * h;
    }

    /// Shortest displacement a - b on the torus, wrapped to [-L/2, L/2).
    double wrap(double delta) const {
        double l = length;
        delta = std::fmod(delta, l);
        if (delta < -0.5 * l) delta += l;
        if (delta >= 0.5 * l) delta -= l;
        return delta;
    }

    double torus_distance(const double* a, const double* b) const {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double d = wrap(a[k] - b[k]);
            s += d * d;
        }
        return std::sqrt(s);
    }
};

/// Grid-sampled function with `comps` real components per node,
/// stored node-major.
struct Field {
    int comps = 1;
    std::vector<double> data;

    Field() = default;
    Field(const Grid& g, int c) : comps(c), data(g.node_count() * static_cast<std::size_t>(c), 0.0) {}

    std::size_t nodes() const { return data.size() / static_cast<std::size_t>(comps); }

    double* at(std::size_t node) { return data.data() + node * static_cast<std::size_t>(comps); }
    const double* at(std::size_t node) const {
        return data.data() + node * static_cast<std::size_t>(comps);
    }

    double& operator()(std::size_t node, int c) { return data[node * comps + c]; }
    double operator()(std::size_t node, int c) const { return data[node * comps + c]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Second-order periodic stencil Laplacian, componentwise.
inline void laplacian_into(const Grid& g, const Field& u, Field& out) {
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    const int nc = u.comps;
    const std::size_t nn = u.nodes();
    for (std::size_t id = 0; id < nn; ++id) {
        double* o = out.at(id);
        const double* c = u.at(id);
        for (int k = 0; k < nc; ++k) o[k] = -2.0 * g.dim * c[k];
        for (int ax = 0; ax < g.dim; ++ax) {
            const double* p = u.at(g.neighbor(id, ax, +1));
            const double* m = u.at(g.neighbor(id, ax, -1));
            for (int k = 0; k < nc; ++k) o[k] += p[k] + m[k];
        }
        for (int k = 0; k < nc; ++k) o[k] *= inv_h2;
    }
}

inline Field laplacian(const Grid& g, const Field& u) {
    Field out(g, u.comps);
    laplacian_into(g, u, out);
    return out;
}

/// Centered first difference along one axis.
inline void gradient_axis_into(const Grid& g, const Field& u, int axis, Field& out) {
    const double inv_2h = 0.5 / g.spacing();
    const int nc = u.comps;
    const std::size_t nn = u.nodes();
    for (std::size_t id = 0; id < nn; ++id) {
        const double* p = u.at(g.neighbor(id, axis, +1));
        const double* m = u.at(g.neighbor(id, axis, -1));
        double* o = out.at(id);
        for (int k = 0; k < nc; ++k) o[k] = (p[k] - m[k]) * inv_2h;
    }
}

inline double l2_norm(const Grid& g, const Field& u) {
    double s = 0.0;
    for (double v : u.data) s += v * v;
    double hd = 1.0;
    for (int k = 0; k < g.dim; ++k) hd *= g.spacing();
    return std::sqrt(s * hd);
}

inline double cell_volume(const Grid& g) {
    double hd = 1.0;
    for (int k = 0; k < g.dim; ++k) hd *= g.spacing();
    return hd;
}

/// Nodes whose centers lie in the torus ball B(center, radius).
inline std::vector<std::size_t> ball_nodes(const Grid& g, const double* center, double radius) {
    std::vector<std::size_t> out;
    double x[3];
    for (std::size_t id = 0; id < g.node_count(); ++id) {
        g.coords(id, x);
        if (g.torus_distance(x, center) <= radius) out.push_back(id);
    }
    return out;
}

} // namespace sgw
