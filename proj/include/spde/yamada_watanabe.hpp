#pragma once

// Smoothed absolute values phi_n built from bumps psi_n supported on
// (a_n, a_{n-1}), and the spatial mollifier Phi^m used to localise the
// difference of two solutions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spde/grid.hpp"

namespace spde {

namespace detail {

/// exp(-1/(1-r^2)) on (-1, 1), zero outside.
inline double standard_bump(double r) {
    const double q = 1.0 - r * r;
    return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-12) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 10, tol, &err);
}

/// Fixed 30-point Gauss rule, for sub-panels where the integrand is smooth.
template <class F>
double integrate_panel(F&& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
}

/// int_{-1}^{1} exp(-1/(1-r^2)) dr
inline double standard_bump_mass() {
    static const double mass = integrate(standard_bump, -1.0, 1.0, 1e-15);
    return mass;
}

}  // namespace detail

/// a_n = exp{-n(n+1)/2}; a_0 = 1.
inline double yw_threshold(int n) {
    if (n < 0) throw std::domain_error("yw_threshold: n must be >= 0");
    return std::exp(-0.5 * n * (n + 1.0));
}

class YWSequence {
public:
    enum class Profile {
        /// Bump symmetric in x on (a_n, a_{n-1}).
        linear_bump,
        /// Bump in log x divided by x; used when the linear bump breaks the
        /// 2/(nx) cap.
        log_bump,
    };

    explicit YWSequence(int n, int panels = 64) : n_(n) {
        if (n < 1) throw std::domain_error("YWSequence: n must be >= 1, got " + std::to_string(n));
        lo_ = yw_threshold(n);
        hi_ = yw_threshold(n - 1);
        profile_ = Profile::linear_bump;
        if (!cap_holds()) profile_ = Profile::log_bump;
        if (!cap_holds())
            throw std::logic_error("YWSequence: no profile satisfies psi_n <= 2/(nx)");

        // Log-spaced panels with cumulative integrals of psi and z psi.
        breaks_.resize(static_cast<std::size_t>(panels) + 1);
        const double la = std::log(lo_), lb = std::log(hi_);
        for (int i = 0; i <= panels; ++i)
            breaks_[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / panels);
        breaks_.front() = lo_;
        breaks_.back() = hi_;
        cum0_.assign(breaks_.size(), 0.0);
        cum1_.assign(breaks_.size(), 0.0);
        for (std::size_t i = 1; i < breaks_.size(); ++i) {
            const double a = breaks_[i - 1], b = breaks_[i];
            cum0_[i] = cum0_[i - 1] + detail::integrate([&](double x) { return psi(x); }, a, b);
            cum1_[i] = cum1_[i - 1] + detail::integrate([&](double x) { return x * psi(x); }, a, b);
        }
        // Absorb the quadrature error of the closed-form normalisation.
        scale_ = 1.0 / cum0_.back();
        for (auto& c : cum0_) c *= scale_;
        for (auto& c : cum1_) c *= scale_;
        mass_ = std::min(cum0_.back(), 1.0);
        first_moment_ = cum1_.back();
    }

    int n() const { return n_; }
    double a_n() const { return lo_; }
    double a_prev() const { return hi_; }
    Profile profile() const { return profile_; }
    /// int psi_n, computed by quadrature.
    double mass() const { return mass_; }
    /// int z psi_n(z) dz = sup_x (|x| - phi_n(x)).
    double first_moment() const { return first_moment_; }

    double psi(double x) const {
        if (!(x > lo_ && x < hi_)) return 0.0;
        if (profile_ == Profile::linear_bump) {
            const double half = 0.5 * (hi_ - lo_);
            const double r = (x - 0.5 * (lo_ + hi_)) / half;
            return scale_ * detail::standard_bump(r) / (half * detail::standard_bump_mass());
        }
        const double la = std::log(lo_), lb = std::log(hi_);
        const double half = 0.5 * (lb - la);
        const double r = (std::log(x) - 0.5 * (la + lb)) / half;
        return scale_ * detail::standard_bump(r) / (half * detail::standard_bump_mass() * x);
    }

    /// int_0^y psi for y >= 0.
    double cdf(double y) const {
        if (y <= lo_) return 0.0;
        if (y >= hi_) return mass_;
        const auto i = panel_of(y);
        return std::min(mass_, cum0_[i] + detail::integrate_panel([&](double x) { return psi(x); }, breaks_[i], y));
    }

    /// int_0^y z psi(z) dz for y >= 0.
    double partial_moment(double y) const {
        if (y <= lo_) return 0.0;
        if (y >= hi_) return first_moment_;
        const auto i = panel_of(y);
        return cum1_[i] + detail::integrate_panel([&](double x) { return x * psi(x); }, breaks_[i], y);
    }

    /// phi_n(x) = int_0^{|x|} dy int_0^y psi = |x| Psi(|x|) - int_0^{|x|} z psi(z) dz.
    double phi(double x) const {
        const double y = std::abs(x);
        if (y <= lo_) return 0.0;
        if (y >= hi_) return y * mass_ - first_moment_;
        const double v = y * cdf(y) - partial_moment(y);
        return std::max(v, 0.0);
    }

    double phi_prime(double x) const {
        if (x == 0.0) return 0.0;
        return x > 0.0 ? cdf(x) : -cdf(-x);
    }

    /// D_n(y, z) = phi_n(y+z) - phi_n(y) - z phi_n'(y).
    double D(double y, double z) const {
        if (z == 0.0) return 0.0;
        const double w = y + z;
        if ((y >= 0.0 && w >= 0.0) || (y <= 0.0 && w <= 0.0)) {
            // Same side of the origin: D = int |v - w| psi(v) dv over the
            // segment, which lies in [0, |z| (Psi(hi) - Psi(lo))].
            const double a = std::abs(y), b = std::abs(w);
            const double lo = std::min(a, b), hi = std::max(a, b);
            const double dpsi = cdf(hi) - cdf(lo);
            const double dmom = partial_moment(hi) - partial_moment(lo);
            const double raw = b > a ? b * dpsi - dmom : dmom - b * dpsi;
            return std::clamp(raw, 0.0, std::abs(z) * std::max(dpsi, 0.0));
        }
        const double raw = phi(w) - phi(y) - z * phi_prime(y);
        return std::clamp(raw, 0.0, 2.0 * std::abs(z));
    }

    /// H_n(y, z) = phi_n(y+z) - phi_n(y).
    double H(double y, double z) const {
        if (z == 0.0) return 0.0;
        const double w = y + z;
        const double raw = phi(w) - phi(y);
        if ((y >= 0.0 && w >= 0.0) || (y <= 0.0 && w <= 0.0)) {
            // Mean of phi' over the segment lies between its end values.
            const double a = std::abs(y), b = std::abs(w);
            const double lo = std::min(a, b), hi = std::max(a, b);
            const double mean = std::clamp(raw / (b - a), cdf(lo), cdf(hi));
            return std::clamp((b - a) * mean, -std::abs(z), std::abs(z));
        }
        return std::clamp(raw, -std::abs(z), std::abs(z));
    }

    /// max over a log-spaced sweep of n x psi_n(x) / 2; the cap holds when <= 1.
    double cap_ratio(int samples = 4096) const {
        double worst = 0.0;
        const double la = std::log(lo_), lb = std::log(hi_);
        for (int i = 1; i < samples; ++i) {
            const double x = std::exp(la + (lb - la) * i / samples);
            worst = std::max(worst, n_ * x * psi(x) / 2.0);
        }
        return worst;
    }

private:
    bool cap_holds() const { return cap_ratio() <= 1.0; }

    std::size_t panel_of(double y) const {
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), y);
        return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - breaks_.begin()) - 1));
    }

    int n_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    Profile profile_ = Profile::linear_bump;
    std::vector<double> breaks_;
    std::vector<double> cum0_;
    std::vector<double> cum1_;
    double mass_ = 1.0;
    double scale_ = 1.0;
    double first_moment_ = 0.0;
};

/// Phi_x^m(y) = m Phi(m (x - y)), Phi the normalised standard bump on (-1, 1).
class Mollifier {
public:
    explicit Mollifier(double m) : m_(m) {
        if (!(m >= 1.0)) throw std::domain_error("Mollifier: scale m must be >= 1");
    }

    double m() const { return m_; }

    static double base(double r) { return detail::standard_bump(r) / detail::standard_bump_mass(); }

    double operator()(double x, double y) const { return m_ * base(m_ * (x - y)); }

    /// int Phi_x^m(y) dy by quadrature.
    double integral(double x) const {
        return detail::integrate([&](double y) { return (*this)(x, y); }, x - 1.0 / m_, x + 1.0 / m_,
                                 1e-13);
    }

    /// <U, Phi_x^m> for a grid function U, integrating the periodic
    /// piecewise-linear interpolant of U against the bump.
    double pair(std::span<const double> u, const Grid1D& grid, double x) const {
        const double a = x - 1.0 / m_, b = x + 1.0 / m_;
        const double dx = grid.dx();
        const double L = grid.half_width();
        auto interp = [&](double y) {
            const double s = (y + L) / dx - 0.5;
            const double fl = std::floor(s);
            const int j = static_cast<int>(fl);
            const double w = s - fl;
            return (1.0 - w) * u[static_cast<std::size_t>(grid.wrap(j))] +
                   w * u[static_cast<std::size_t>(grid.wrap(j + 1))];
        };
        // Split at interpolation nodes so each piece is smooth.
        const double first = std::ceil((a + L) / dx - 0.5);
        // Support inside one linear piece: the symmetric bump integrates the
        // interpolant to its value at x.
        if (-L + (first + 0.5) * dx >= b) return interp(x);
        double acc = 0.0;
        double left = a;
        for (double k = first;; k += 1.0) {
            const double node = -L + (k + 0.5) * dx;
            const double right = std::min(node, b);
            if (right > left)
                acc += detail::integrate([&](double y) { return interp(y) * (*this)(x, y); }, left, right,
                                         1e-12);
            left = right;
            if (node >= b) break;
        }
        return acc;
    }

private:
    double m_;
};

/// <phi_n(<U, Phi_.^m>), Psi> by trapezoidal quadrature over sorted probes.
inline double localized_functional(std::span<const double> u, const Grid1D& grid,
                                   const std::function<double(double)>& weight,
                                   const YWSequence& seq, const Mollifier& moll,
                                   std::span<const double> probes) {
    for (double x : probes)
        if (x < -grid.half_width() || x > grid.half_width())
            throw std::out_of_range("localized_functional: probe " + std::to_string(x) +
                                    " lies outside the grid");
    if (probes.size() < 2) throw std::invalid_argument("localized_functional: need >= 2 probes");
    double acc = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const double left = i > 0 ? probes[i] - probes[i - 1] : 0.0;
        const double right = i + 1 < probes.size() ? probes[i + 1] - probes[i] : 0.0;
        const double w = 0.5 * (left + right);
        if (w == 0.0) continue;
        const double val = weight(probes[i]);
        if (val == 0.0) continue;
        acc += w * val * seq.phi(moll.pair(u, grid, probes[i]));
    }
    return acc;
}

/// Grid point of [lo, hi] minimising |values|; ties go to the smallest index.
inline int grid_argmin_abs(std::span<const double> values, const Grid1D& grid, double lo = -1.0,
                           double hi = 1.0) {
    int best = -1;
    double best_val = 0.0;
    for (int j = 0; j < grid.size(); ++j) {
        const double x = grid.center(j);
        if (x < lo || x > hi) continue;
        const double v = std::abs(values[static_cast<std::size_t>(j)]);
        if (best < 0 || v < best_val) {
            best = j;
            best_val = v;
        }
    }
    if (best < 0) throw std::out_of_range("grid_argmin_abs: window contains no grid point");
    return best;
}

}  // namespace spde
