#pragma once

// Splitting scheme for dX = (1/2) X'' dt + G(X) dt + H(X_-) dL on a periodic
// grid. One step of length dt:
//
//   diffuse  X <- P_dt X
//   react    X <- X + dt G(X)
//   jump     X_j <- X_j + H(X_j) dL_j / dx   (H on the pre-jump field)
//   clamp    negative values are set to zero and the added mass is logged

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/grid.hpp"
#include "spde/kernel.hpp"
#include "spde/noise.hpp"
#include "spde/yamada_watanabe.hpp"

namespace spde {

enum class ClampPolicy { clamp_to_zero };

struct SolverConfig {
    double dt = 2.5e-4;
    int n_steps = 2000;
    NoiseModel noise;
    CoefficientPair coefficients = builtin_stable_branching(2.0 / 3.0);
    ClampPolicy clamp = ClampPolicy::clamp_to_zero;
    int record_every = 20;
    /// Exponent of the integrability monitor int ds int X_s^q dx.
    std::optional<double> q;

    void validate(const Grid1D& grid) const {
        if (!(dt > 0.0)) throw std::domain_error("solver: dt must be positive");
        if (n_steps < 0) throw std::domain_error("solver: n_steps must be >= 0");
        if (record_every < 1) throw std::domain_error("solver: record_every must be >= 1");
        noise.validate();
        if (std::abs(noise.dt - dt) > 1e-12 * dt)
            throw std::invalid_argument("solver: noise cell dt differs from solver dt");
        if (std::abs(noise.dx - grid.dx()) > 1e-12 * grid.dx())
            throw std::invalid_argument("solver: noise cell dx differs from grid dx");
        if (std::abs(noise.half_width - grid.half_width()) > 1e-12 * grid.half_width())
            throw std::invalid_argument("solver: noise domain differs from grid");
        if (q && !(*q > 0.0)) throw std::domain_error("solver: q must be positive");
    }
};

/// Aligns a noise model's cell with a grid and time step.
inline NoiseModel noise_for(NoiseModel model, const Grid1D& grid, double dt) {
    model.dt = dt;
    model.dx = grid.dx();
    model.half_width = grid.half_width();
    return model;
}

class StepError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Smooth compactly supported test function for the weak-form residual:
/// f(x) = exp(-1/(1-(x/R)^2)), R = radius.
struct ResidualProbe {
    std::vector<double> f;
    /// The scheme's second-derivative operator applied to f.
    std::vector<double> f_second;
    double f_second_sup = 0.0;

    static double value(double x, double radius) {
        const double s = x / radius;
        const double q = 1.0 - s * s;
        return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
    }

    static double second_derivative(double x, double radius) {
        const double s = x / radius;
        const double q = 1.0 - s * s;
        if (q <= 0.0) return 0.0;
        const double g = std::exp(-1.0 / q);
        const double g2 = g * (4.0 * s * s / (q * q * q * q) - 2.0 / (q * q) - 8.0 * s * s / (q * q * q));
        return g2 / (radius * radius);
    }

    ResidualProbe(const Grid1D& grid, double dt, double radius) {
        f = sample_on(grid, [&](double x) { return value(x, radius); });
        const auto analytic = sample_on(grid, [&](double x) { return second_derivative(x, radius); });
        f_second = generator_second_derivative(f, analytic, dt, grid);
        for (double v : f_second) f_second_sup = std::max(f_second_sup, std::abs(v));
    }
};

struct StepReport {
    double clamped_mass = 0.0;
    /// <applied jump increment, f> when a probe is supplied.
    double jump_pairing = 0.0;
};

class Stepper {
public:
    Stepper(const SolverConfig& cfg, const Grid1D& grid)
        : cfg_(cfg), grid_(grid), table_(make_heat_kernel_table(cfg.dt, grid)) {
        cfg_.validate(grid_);
    }

    const SolverConfig& config() const { return cfg_; }
    const Grid1D& grid() const { return grid_; }
    KernelKind kernel_kind() const { return table_.kind; }

    FieldState diffuse(const FieldState& x) const {
        FieldState out = FieldState::zeros(grid_, x.t);
        apply_kernel(table_, grid_, x.values, out.values);
        return out;
    }

    void react(FieldState& x) const {
        if (cfg_.coefficients.drift_is_zero) return;
        for (double& v : x.values) v += cfg_.dt * cfg_.coefficients.drift(v);
    }

    /// max_j |H(X_j)|^alpha, the mark range a marked slice must cover.
    double mark_bound(const FieldState& pre) const {
        double m = 0.0;
        for (double v : pre.values) m = std::max(m, std::abs(cfg_.coefficients.noise(v)));
        return std::pow(m, cfg_.noise.alpha);
    }

    /// Jump and clamp stages. `probe` (optional) receives <jump, f>.
    FieldState jump(FieldState x, const NoiseSlice& slice, StepReport* report = nullptr,
                    std::span<const double> probe = {}) const {
        const auto n = x.values.size();
        const double dx = grid_.dx();
        std::vector<double> h(n, 0.0);
        if (!cfg_.coefficients.noise_is_zero)
            for (std::size_t j = 0; j < n; ++j) h[j] = cfg_.coefficients.noise(x.values[j]);

        std::vector<double> jumps(n, 0.0);
        if (const auto* inc = std::get_if<CellIncrements>(&slice)) {
            if (inc->dL.size() != n) throw std::invalid_argument("step: noise slice does not match grid");
            for (std::size_t j = 0; j < n; ++j) jumps[j] = h[j] == 0.0 ? 0.0 : h[j] * inc->dL[j] / dx;
        } else {
            const auto& marked = std::get<MarkedSlice>(slice);
            jumps = marked_cell_increments(marked, h, grid_, cfg_.noise);
            for (auto& v : jumps) v /= dx;
        }

        double clamped = 0.0;
        double pairing = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double v = x.values[j] + jumps[j];
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "non-finite value in cell " << j << " at t=" << x.t << " (pre-jump "
                    << x.values[j] << ", jump " << jumps[j] << ")";
                throw StepError(msg.str());
            }
            if (!probe.empty()) pairing += jumps[j] * probe[j];
            if (v < 0.0) {
                clamped -= v;
                v = 0.0;
            }
            x.values[j] = v;
        }
        if (report) {
            report->clamped_mass = clamped * dx;
            report->jump_pairing = pairing * dx;
        }
        return x;
    }

    /// Full step for an unmarked slice, or a marked slice whose mark range
    /// already covers the pre-jump field.
    FieldState step(const FieldState& x, const NoiseSlice& slice, StepReport* report = nullptr) const {
        FieldState y = diffuse(x);
        react(y);
        FieldState out = jump(std::move(y), slice, report);
        out.t = x.t + cfg_.dt;
        return out;
    }

private:
    SolverConfig cfg_;
    Grid1D grid_;
    HeatKernelTable table_;
};

inline FieldState step(const FieldState& state, const SolverConfig& cfg, const NoiseSlice& slice) {
    return Stepper(cfg, state.grid).step(state, slice);
}

struct Trajectory {
    std::vector<FieldState> snapshots;
    /// One entry per snapshot.
    std::vector<double> mass;
    std::vector<double> sup;
    /// int_0^t ds int X_s^q dx (zero when no q is configured).
    std::vector<double> integrability;
    /// Cumulative mass added by clamping.
    std::vector<double> clamped_mass;
    /// |R(f)| of the weak-form identity.
    std::vector<double> residual;
    double f_second_sup = 0.0;
    std::optional<FieldState> final_state;

    std::vector<double> times() const {
        std::vector<double> out;
        for (const auto& s : snapshots) out.push_back(s.t);
        return out;
    }
};

namespace detail {

/// Bookkeeping shared by single and coupled runs.
class TrajectoryRecorder {
public:
    TrajectoryRecorder(const SolverConfig& cfg, const Grid1D& grid, const FieldState& x0)
        : cfg_(cfg), probe_(grid, cfg.dt, 0.5 * grid.half_width()) {
        initial_pairing_ = x0.pair(probe_.f);
        traj_.f_second_sup = probe_.f_second_sup;
    }

    std::span<const double> probe() const { return probe_.f; }

    /// Called before diffusing from x (left endpoint of the step).
    void begin_step(const FieldState& x) {
        left_second_ = x.pair(probe_.f_second);
        if (cfg_.q) integrability_ += cfg_.dt * power_mass(x, *cfg_.q);
    }

    /// Called with the diffused, pre-reaction field.
    void after_diffusion(const FieldState& y) {
        diffusion_ += 0.25 * cfg_.dt * (left_second_ + y.pair(probe_.f_second));
        if (!cfg_.coefficients.drift_is_zero) {
            double g = 0.0;
            for (std::size_t j = 0; j < y.values.size(); ++j)
                g += cfg_.coefficients.drift(y.values[j]) * probe_.f[j];
            drift_ += cfg_.dt * g * y.grid.dx();
        }
    }

    void after_jump(const StepReport& report) {
        jumps_ += report.jump_pairing;
        clamped_ += report.clamped_mass;
    }

    void record(const FieldState& x) {
        traj_.snapshots.push_back(x);
        traj_.mass.push_back(x.mass());
        traj_.sup.push_back(x.sup());
        traj_.integrability.push_back(integrability_);
        traj_.clamped_mass.push_back(clamped_);
        traj_.residual.push_back(std::abs(x.pair(probe_.f) - initial_pairing_ - diffusion_ - drift_ - jumps_));
    }

    Trajectory finish(const FieldState& x) {
        traj_.final_state = x;
        return std::move(traj_);
    }

    static double power_mass(const FieldState& x, double q) {
        double s = 0.0;
        for (double v : x.values) s += std::pow(v, q);
        return s * x.grid.dx();
    }

private:
    const SolverConfig& cfg_;
    ResidualProbe probe_;
    Trajectory traj_;
    double initial_pairing_ = 0.0;
    double left_second_ = 0.0;
    double diffusion_ = 0.0;
    double drift_ = 0.0;
    double jumps_ = 0.0;
    double clamped_ = 0.0;
    double integrability_ = 0.0;
};

}  // namespace detail

inline Trajectory run(const SolverConfig& cfg, const FieldState& x0) {
    const Grid1D& grid = x0.grid;
    Stepper stepper(cfg, grid);
    NoiseSource source(cfg.noise, grid);
    detail::TrajectoryRecorder rec(cfg, grid, x0);

    FieldState x = x0;
    x.t = 0.0;
    rec.record(x);
    for (int k = 0; k < cfg.n_steps; ++k) {
        const double t = k * cfg.dt;
        rec.begin_step(x);
        FieldState y = stepper.diffuse(x);
        rec.after_diffusion(y);
        stepper.react(y);
        StepReport report;
        if (cfg.noise.mode == NoiseMode::thinned) {
            const NoiseSlice slice = source.marked(t, stepper.mark_bound(y));
            x = stepper.jump(std::move(y), slice, &report, rec.probe());
        } else {
            const NoiseSlice slice = source.increments(t);
            x = stepper.jump(std::move(y), slice, &report, rec.probe());
        }
        x.t = (k + 1) * cfg.dt;
        rec.after_jump(report);
        if ((k + 1) % cfg.record_every == 0) rec.record(x);
    }
    return rec.finish(x);
}

struct CoupledTrajectory {
    Trajectory x;
    Trajectory y;
    /// <|X_t - Y_t|, 1> per snapshot.
    std::vector<double> l1_distance;
    /// <X_t - Y_t, Phi_x^m> on the probe set, per snapshot.
    std::vector<std::vector<double>> mollified;
    std::vector<double> probes;
    double m = 0.0;
};

inline double l1_distance(const FieldState& a, const FieldState& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.values.size(); ++j) s += std::abs(a.values[j] - b.values[j]);
    return s * a.grid.dx();
}

/// Advances X and Y against the same noise. `probes` and `m` select where
/// the mollified difference is recorded (empty probes: none).
inline CoupledTrajectory coupled_run(const SolverConfig& cfg, const FieldState& x0, const FieldState& y0,
                                     std::vector<double> probes = {}, double m = 16.0) {
    if (!(x0.grid == y0.grid)) throw std::invalid_argument("coupled_run: initial states use different grids");
    const Grid1D& grid = x0.grid;
    Stepper stepper(cfg, grid);
    NoiseSource source(cfg.noise, grid);
    detail::TrajectoryRecorder rx(cfg, grid, x0), ry(cfg, grid, y0);
    const Mollifier moll(m);

    CoupledTrajectory out;
    out.probes = std::move(probes);
    out.m = m;
    auto record = [&](const FieldState& x, const FieldState& y) {
        rx.record(x);
        ry.record(y);
        out.l1_distance.push_back(l1_distance(x, y));
        std::vector<double> diff(x.values.size());
        for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x.values[j] - y.values[j];
        std::vector<double> row;
        row.reserve(out.probes.size());
        for (double p : out.probes) row.push_back(moll.pair(diff, grid, p));
        out.mollified.push_back(std::move(row));
    };

    FieldState x = x0, y = y0;
    x.t = y.t = 0.0;
    record(x, y);
    for (int k = 0; k < cfg.n_steps; ++k) {
        const double t = k * cfg.dt;
        rx.begin_step(x);
        ry.begin_step(y);
        FieldState xd = stepper.diffuse(x), yd = stepper.diffuse(y);
        rx.after_diffusion(xd);
        ry.after_diffusion(yd);
        stepper.react(xd);
        stepper.react(yd);
        NoiseSlice slice = cfg.noise.mode == NoiseMode::thinned
                               ? NoiseSlice(source.marked(t, std::max(stepper.mark_bound(xd),
                                                                      stepper.mark_bound(yd))))
                               : NoiseSlice(source.increments(t));
        StepReport rep_x, rep_y;
        x = stepper.jump(std::move(xd), slice, &rep_x, rx.probe());
        y = stepper.jump(std::move(yd), slice, &rep_y, ry.probe());
        x.t = y.t = (k + 1) * cfg.dt;
        rx.after_jump(rep_x);
        ry.after_jump(rep_y);
        if ((k + 1) % cfg.record_every == 0) record(x, y);
    }
    out.x = rx.finish(x);
    out.y = ry.finish(y);
    return out;
}

// ---------------------------------------------------------------------------
// Initial data

/// Point mass at x0, spread over its cell (value = mass/dx).
inline FieldState point_mass(const Grid1D& grid, double x0, double mass) {
    auto s = FieldState::zeros(grid);
    s.values[static_cast<std::size_t>(grid.cell_of(x0))] = mass / grid.dx();
    return s;
}

/// mass * p_{t0}(x - center) sampled on the grid.
inline FieldState gaussian_bump(const Grid1D& grid, double center, double t0, double mass) {
    return FieldState(grid, 0.0, sample_on(grid, [&](double x) { return mass * heat_kernel(t0, x - center); }));
}

/// Smooth compact bump of the given radius and total mass.
inline FieldState smooth_bump(const Grid1D& grid, double center, double radius, double mass) {
    auto s = FieldState(grid, 0.0, sample_on(grid, [&](double x) {
                            return ResidualProbe::value(x - center, radius);
                        }));
    const double m0 = s.mass();
    if (m0 > 0.0)
        for (double& v : s.values) v *= mass / m0;
    return s;
}

}  // namespace spde
