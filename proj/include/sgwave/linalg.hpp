#pragma once

#include <cassert>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sgw {

/// Ambient dimensions stay small (a handful of components per grid node),
/// so fixed-capacity stack buffers are used in the hot loops.
inline constexpr int kMaxAmbient = 8;

using Vec = std::vector<double>;

inline double dot(int n, const double* a, const double* b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(int n, const double* a) { return std::sqrt(dot(n, a, a)); }

inline void axpy(int n, double alpha, const double* x, double* y) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void scale(int n, double alpha, double* x) {
    for (int i = 0; i < n; ++i) x[i] *= alpha;
}

/// Dense square matrix in row-major order.
struct Mat {
    int n = 0;
    std::vector<double> a;

    Mat() = default;
    explicit Mat(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

    void apply(const double* x, double* y) const {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            const double* row = a.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) s += row[j] * x[j];
            y[i] = s;
        }
    }

    double max_abs_symmetric_part() const {
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                worst = std::max(worst, std::abs((*this)(i, j) + (*this)(j, i)));
        return worst;
    }
};

inline Vec cross3(const Vec& a, const Vec& b) {
    assert(a.size() == 3 && b.size() == 3);
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_slope: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

/// Summation with a fixed pairwise order, so ensemble reductions are
/// reproducible bit-for-bit regardless of thread count.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

} // namespace sgw
