#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "spde/grid.hpp"

namespace spde {

/// p_t(x) = (2 pi t)^{-1/2} exp(-x^2 / 2t).
inline double heat_kernel(double t, double x) {
    if (!(t > 0.0)) throw std::domain_error("heat_kernel: t must be positive");
    return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
}

enum class KernelKind {
    identity,
    /// e^{-lambda} I_k(lambda), lambda = t/dx^2: the exact semigroup of the
    /// nearest-neighbour Laplacian. Used when sqrt(t) < 2 dx.
    lattice,
    /// Point-sampled periodised Gaussian.
    gaussian,
};

inline const char* to_string(KernelKind k) {
    switch (k) {
        case KernelKind::identity: return "identity";
        case KernelKind::lattice: return "lattice";
        case KernelKind::gaussian: return "gaussian";
    }
    return "?";
}

/// Periodised kernel weights on grid offsets. weights[k] is the density at
/// offset k (mod n), so sum(weights) * dx == 1.
struct HeatKernelTable {
    double t = 0.0;
    KernelKind kind = KernelKind::identity;
    std::vector<double> weights;
    /// Offsets beyond +-bandwidth carry zero weight.
    int bandwidth = 0;

    double mass(double dx) const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s * dx;
    }
};

inline KernelKind kernel_kind_for(double t, const Grid1D& grid) {
    if (t == 0.0) return KernelKind::identity;
    return std::sqrt(t) < 2.0 * grid.dx() ? KernelKind::lattice : KernelKind::gaussian;
}

inline HeatKernelTable make_heat_kernel_table(double t, const Grid1D& grid) {
    if (!(t >= 0.0)) throw std::domain_error("heat kernel table: t must be nonnegative");
    const int n = grid.size();
    const double dx = grid.dx();
    HeatKernelTable table;
    table.t = t;
    table.kind = kernel_kind_for(t, grid);
    table.weights.assign(static_cast<std::size_t>(n), 0.0);

    // Probabilities by unwrapped offset, folded onto the ring below.
    std::vector<double> prob;
    if (table.kind == KernelKind::identity) {
        prob = {1.0};
    } else if (table.kind == KernelKind::lattice) {
        const double lambda = t / (dx * dx);
        const double scale = std::exp(-lambda);
        for (int k = 0;; ++k) {
            const double pk = scale * std::cyl_bessel_i(static_cast<double>(k), lambda);
            prob.push_back(pk);
            if ((k > lambda && pk < 1e-300) || k > 40 * n) break;
            if (k > lambda && pk < 1e-20 * prob.front()) break;
        }
    } else {
        const double sigma = std::sqrt(t);
        const int reach = static_cast<int>(std::ceil(12.0 * sigma / dx)) + 1;
        const int limit = std::max(reach, 3 * n + n / 2);
        for (int k = 0; k <= std::min(reach, limit); ++k)
            prob.push_back(heat_kernel(t, k * dx) * dx);
    }

    const int kmax = static_cast<int>(prob.size()) - 1;
    for (int k = -kmax; k <= kmax; ++k) {
        const double p = prob[static_cast<std::size_t>(std::abs(k))];
        table.weights[static_cast<std::size_t>(grid.wrap(k))] += p / dx;
    }
    const double total = table.mass(dx);
    for (double& w : table.weights) w /= total;
    table.bandwidth = std::min(kmax, n / 2);
    return table;
}

/// out = P_t in on the periodic grid. `in` and `out` must not alias.
inline void apply_kernel(const HeatKernelTable& table, const Grid1D& grid,
                         std::span<const double> in, std::span<double> out) {
    const int n = grid.size();
    const double dx = grid.dx();
    if (table.kind == KernelKind::identity) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    const int b = table.bandwidth;
    const bool full = 2 * b + 1 >= n;
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        if (full) {
            for (int k = 0; k < n; ++k)
                acc += table.weights[static_cast<std::size_t>(k)] *
                       in[static_cast<std::size_t>(grid.wrap(i - k))];
        } else {
            for (int k = -b; k <= b; ++k)
                acc += table.weights[static_cast<std::size_t>(grid.wrap(k))] *
                       in[static_cast<std::size_t>(grid.wrap(i - k))];
        }
        out[static_cast<std::size_t>(i)] = acc * dx;
    }
}

inline std::vector<double> semigroup_apply(std::span<const double> f, double t, const Grid1D& grid) {
    if (f.size() != static_cast<std::size_t>(grid.size()))
        throw std::invalid_argument("semigroup_apply: grid function has wrong size");
    std::vector<double> out(f.size());
    apply_kernel(make_heat_kernel_table(t, grid), grid, f, out);
    return out;
}

/// Second-derivative operator consistent with the kernel family used for a
/// step of length t: the nearest-neighbour Laplacian for lattice kernels,
/// otherwise the supplied analytic f''.
inline std::vector<double> generator_second_derivative(std::span<const double> f,
                                                       std::span<const double> f_second,
                                                       double t, const Grid1D& grid) {
    std::vector<double> out(f.size());
    if (kernel_kind_for(t, grid) == KernelKind::lattice) {
        const double h2 = grid.dx() * grid.dx();
        const int n = grid.size();
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j)] =
                (f[static_cast<std::size_t>(grid.wrap(j + 1))] - 2.0 * f[static_cast<std::size_t>(j)] +
                 f[static_cast<std::size_t>(grid.wrap(j - 1))]) / h2;
    } else {
        std::copy(f_second.begin(), f_second.end(), out.begin());
    }
    return out;
}

struct KernelDifferenceModulus {
    std::vector<double> u;
    /// |p_t(x1-u) - p_t(x2-u)|
    std::vector<double> difference;
    /// |x1-x2|^theta t^{-theta/2} [p_t(x1-u) + p_t(x2-u)]
    std::vector<double> bound;
    /// max over u of difference / bound: the smallest admissible constant C.
    double max_ratio = 0.0;
};

inline KernelDifferenceModulus kernel_difference_modulus(double t, double x1, double x2, double theta,
                                                         std::span<const double> us) {
    if (!(t > 0.0)) throw std::domain_error("kernel_difference_modulus: t must be positive");
    if (!(theta >= 0.0 && theta <= 1.0))
        throw std::domain_error("kernel_difference_modulus: theta must lie in [0,1]");
    KernelDifferenceModulus out;
    const double factor = std::pow(std::abs(x1 - x2), theta) * std::pow(t, -0.5 * theta);
    for (double u : us) {
        const double a = heat_kernel(t, x1 - u);
        const double b = heat_kernel(t, x2 - u);
        const double d = std::abs(a - b);
        const double bd = factor * (a + b);
        out.u.push_back(u);
        out.difference.push_back(d);
        out.bound.push_back(bd);
        if (bd > 0.0) out.max_ratio = std::max(out.max_ratio, d / bd);
    }
    return out;
}

inline KernelDifferenceModulus kernel_difference_modulus(double t, double x1, double x2, double theta,
                                                         const Grid1D& grid) {
    const auto us = grid.centers();
    return kernel_difference_modulus(t, x1, x2, theta, us);
}

}  // namespace spde
