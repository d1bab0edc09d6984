#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sgwave/grid.hpp"
#include "sgwave/linalg.hpp"
#include "sgwave/rng.hpp"

namespace sgw {

/// Finite symmetric atomic spectral measure on R^d. Atoms are stored as
/// mirror pairs {+xi, -xi} sharing one mass value per atom, plus an
/// optional self-mirrored atom at the origin. The spatial covariance of
/// the driven noise is Gamma(x) = integral of cos<xi, x> against the
/// measure.
struct SpectralMeasure {
    struct AtomPair {
        double xi[3] = {0, 0, 0};
        double mass = 0; // mass of each of the two mirror atoms
    };

    int dim = 1;
    std::vector<AtomPair> pairs;
    double zero_mass = 0.0;
    double total_mass = 0.0;

    /// Gaussian draws consumed per increment: (beta, gamma) per pair and a
    /// single beta for the zero atom. Indexed by atom order.
    int draws_per_increment() const {
        return (zero_mass > 0.0 ? 1 : 0) + 2 * static_cast<int>(pairs.size());
    }
};

/// Build a measure from raw atoms, symmetrizing (each input atom at xi is
/// split between +xi and -xi) and merging coincident frequencies.
inline SpectralMeasure validate_measure(int dim, const std::vector<std::pair<Vec, double>>& atoms) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("measure: dim must be 1, 2 or 3");
    if (atoms.empty()) throw std::invalid_argument("measure: empty atom list");
    SpectralMeasure mu;
    mu.dim = dim;
    for (const auto& [xi, mass] : atoms) {
        if (static_cast<int>(xi.size()) != dim)
            throw std::invalid_argument("measure: frequency dimension mismatch");
        if (!std::isfinite(mass)) throw std::invalid_argument("measure: non-finite mass");
        if (mass <= 0.0) throw std::invalid_argument("measure: masses must be positive");
        for (double c : xi)
            if (!std::isfinite(c)) throw std::invalid_argument("measure: non-finite frequency");

        // coordinates at round-off scale are treated as exact zeros so that
        // mirror atoms produced by trigonometry still pair up
        double scale = 0.0;
        for (double c : xi) scale = std::max(scale, std::abs(c));
        double canon[3] = {0, 0, 0};
        for (int k = 0; k < dim; ++k)
            canon[k] = std::abs(xi[k]) <= 1e-12 * scale ? 0.0 : xi[k];

        bool zero = true;
        for (int k = 0; k < dim; ++k) zero = zero && canon[k] == 0.0;
        if (zero) {
            mu.zero_mass += mass;
            continue;
        }
        // canonical sign: first nonzero coordinate positive
        double sgn = 0.0;
        for (int k = 0; k < dim; ++k)
            if (canon[k] != 0.0) {
                sgn = canon[k] > 0.0 ? 1.0 : -1.0;
                break;
            }
        for (int k = 0; k < dim; ++k) canon[k] *= sgn;

        bool merged = false;
        for (auto& p : mu.pairs) {
            bool same = true;
            for (int k = 0; k < dim; ++k)
                same = same && std::abs(p.xi[k] - canon[k]) <= 1e-12 * std::max(1.0, scale);
            if (same) {
                p.mass += 0.5 * mass;
                merged = true;
                break;
            }
        }
        if (!merged) {
            SpectralMeasure::AtomPair p;
            for (int k = 0; k < dim; ++k) p.xi[k] = canon[k];
            p.mass = 0.5 * mass;
            mu.pairs.push_back(p);
        }
    }
    mu.total_mass = mu.zero_mass;
    for (const auto& p : mu.pairs) mu.total_mass += 2.0 * p.mass;
    if (!(mu.total_mass > 0.0)) throw std::invalid_argument("measure: total mass must be positive");
    return mu;
}

/// Gamma(x) = zero_mass + sum_pairs 2 c_k cos<xi_k, x>. Even, with
/// Gamma(0) = total mass.
inline double covariance_kernel(const SpectralMeasure& mu, const double* x) {
    double s = mu.zero_mass;
    for (const auto& p : mu.pairs) {
        double phase = 0.0;
        for (int k = 0; k < mu.dim; ++k) phase += p.xi[k] * x[k];
        s += 2.0 * p.mass * std::cos(phase);
    }
    return s;
}

inline double covariance_kernel(const SpectralMeasure& mu, const Vec& x) {
    return covariance_kernel(mu, x.data());
}

/// One scalar Wiener increment on the grid together with the mode draws it
/// was synthesized from (retained so integral identities can be rebuilt
/// without re-sampling).
struct NoiseIncrement {
    double dt = 0.0;
    Field values;            // one component per node
    std::vector<double> draws;
};

/// Trigonometric synthesis of the increment from given mode draws:
///   dW(x) = sqrt(c0 dt) b0 + sum_k sqrt(2 c_k dt) [b_k cos<xi_k,x> + g_k sin<xi_k,x>].
inline Field synthesize_increment(const SpectralMeasure& mu, const Grid& grid, double dt,
                                  const std::vector<double>& draws) {
    if (static_cast<int>(draws.size()) != mu.draws_per_increment())
        throw std::invalid_argument("synthesize_increment: wrong number of mode draws");
    if (grid.dim != mu.dim)
        throw std::invalid_argument("synthesize_increment: grid/measure dimension mismatch");
    Field w(grid, 1);
    std::size_t q = 0;
    double x[3];
    if (mu.zero_mass > 0.0) {
        double amp = std::sqrt(mu.zero_mass * dt) * draws[q++];
        for (std::size_t id = 0; id < w.nodes(); ++id) w(id, 0) = amp;
    }
    for (const auto& p : mu.pairs) {
        double beta = draws[q++];
        double gamma = draws[q++];
        double amp = std::sqrt(2.0 * p.mass * dt);
        for (std::size_t id = 0; id < w.nodes(); ++id) {
            grid.coords(id, x);
            double phase = 0.0;
            for (int k = 0; k < grid.dim; ++k) phase += p.xi[k] * x[k];
            w(id, 0) += amp * (beta * std::cos(phase) + gamma * std::sin(phase));
        }
    }
    return w;
}

/// Draw the increment for (seed, trajectory, step). Deterministic in the
/// key triple; independent of threading or evaluation order.
inline NoiseIncrement sample_increment(const SpectralMeasure& mu, const Grid& grid, double dt,
                                       std::uint64_t seed, std::uint64_t trajectory,
                                       std::uint64_t step) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be positive");
    NoiseIncrement inc;
    inc.dt = dt;
    RngStream rng(stream_key(seed, trajectory, step));
    inc.draws.resize(mu.draws_per_increment());
    for (double& d : inc.draws) d = rng.next_gauss();
    inc.values = synthesize_increment(mu, grid, dt, inc.draws);
    return inc;
}

namespace detail {

// Orthonormal trigonometric basis of the noise space induced by the atoms:
// sqrt(c0), and per pair sqrt(2 c_k) cos<xi_k, .> and sqrt(2 c_k) sin<xi_k, .>.
inline void onb_values(const SpectralMeasure& mu, const double* x, std::vector<double>& e) {
    e.clear();
    if (mu.zero_mass > 0.0) e.push_back(std::sqrt(mu.zero_mass));
    for (const auto& p : mu.pairs) {
        double phase = 0.0;
        for (int k = 0; k < mu.dim; ++k) phase += p.xi[k] * x[k];
        double a = std::sqrt(2.0 * p.mass);
        e.push_back(a * std::cos(phase));
        e.push_back(a * std::sin(phase));
    }
}

} // namespace detail

/// Squared Hilbert-Schmidt norm of the multiplication operator
/// xi -> g . xi restricted to the given nodes: sum_l || g e_l ||^2.
/// For an atomic measure this equals total_mass * ||g||^2, which is checked
/// internally before returning the directly summed value.
inline double hs_multiplier_norm_sq(const SpectralMeasure& mu, const Grid& grid, const Field& g,
                                    const std::vector<std::size_t>& region) {
    if (region.empty()) throw std::invalid_argument("hs_multiplier_norm_sq: empty region");
    const double hd = cell_volume(grid);
    std::vector<double> e;
    double x[3];
    double total = 0.0;
    double g_l2 = 0.0;
    for (std::size_t id : region) {
        grid.coords(id, x);
        detail::onb_values(mu, x, e);
        double g2 = dot(g.comps, g.at(id), g.at(id));
        g_l2 += g2 * hd;
        double diag = 0.0;
        for (double v : e) diag += v * v;
        total += g2 * diag * hd;
    }
    double closed = mu.total_mass * g_l2;
    if (std::abs(total - closed) > 1e-12 * std::max(1.0, std::abs(closed)))
        throw std::runtime_error("hs_multiplier_norm_sq: basis sum disagrees with closed form");
    return total;
}

inline double hs_multiplier_norm_sq(const SpectralMeasure& mu, const Grid& grid, const Field& g) {
    std::vector<std::size_t> all(grid.node_count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return hs_multiplier_norm_sq(mu, grid, g, all);
}

} // namespace sgw
