#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spde {

/// Periodic cell-centred grid on [-L, L).
class Grid1D {
public:
    Grid1D(double half_width, int n_cells) : half_width_(half_width), n_cells_(n_cells) {
        if (!(half_width > 0.0) || !std::isfinite(half_width))
            throw std::domain_error("Grid1D: half width must be positive");
        if (n_cells < 8 || n_cells % 2 != 0)
            throw std::domain_error("Grid1D: n_cells must be even and >= 8, got " +
                                    std::to_string(n_cells));
    }

    double half_width() const { return half_width_; }
    double length() const { return 2.0 * half_width_; }
    int size() const { return n_cells_; }
    double dx() const { return length() / n_cells_; }

    double center(int j) const { return -half_width_ + (j + 0.5) * dx(); }

    /// Index of the cell containing x, after wrapping x into [-L, L).
    int cell_of(double x) const {
        double y = std::fmod(x + half_width_, length());
        if (y < 0.0) y += length();
        int j = static_cast<int>(std::floor(y / dx()));
        return j >= n_cells_ ? n_cells_ - 1 : j;
    }

    /// Periodic index wrap.
    int wrap(int j) const {
        int r = j % n_cells_;
        return r < 0 ? r + n_cells_ : r;
    }

    std::vector<double> centers() const {
        std::vector<double> xs(static_cast<std::size_t>(n_cells_));
        for (int j = 0; j < n_cells_; ++j) xs[static_cast<std::size_t>(j)] = center(j);
        return xs;
    }

    friend bool operator==(const Grid1D&, const Grid1D&) = default;

private:
    double half_width_;
    int n_cells_;
};

/// Nonnegative density values on a grid at time t.
struct FieldState {
    Grid1D grid;
    double t = 0.0;
    std::vector<double> values;

    FieldState(Grid1D g, double time, std::vector<double> v)
        : grid(g), t(time), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(grid.size()))
            throw std::invalid_argument("FieldState: value count does not match grid");
    }

    static FieldState zeros(const Grid1D& g, double time = 0.0) {
        return FieldState(g, time, std::vector<double>(static_cast<std::size_t>(g.size()), 0.0));
    }

    double mass() const {
        return std::accumulate(values.begin(), values.end(), 0.0) * grid.dx();
    }

    /// <X, f> with f given on the grid.
    double pair(std::span<const double> f) const {
        double s = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) s += values[j] * f[j];
        return s * grid.dx();
    }

    double sup() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }

    double at(double x) const { return values[static_cast<std::size_t>(grid.cell_of(x))]; }
};

/// Grid function f(x_j) for a callable f.
template <class F>
std::vector<double> sample_on(const Grid1D& grid, F&& f) {
    std::vector<double> out(static_cast<std::size_t>(grid.size()));
    for (int j = 0; j < grid.size(); ++j) out[static_cast<std::size_t>(j)] = f(grid.center(j));
    return out;
}

}  // namespace spde
