#pragma once

// Ensemble estimators and monitors run against simulated trajectories.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/integrator.hpp"
#include "spde/kernel.hpp"
#include "spde/stats.hpp"
#include "spde/yamada_watanabe.hpp"

namespace spde {

// ---------------------------------------------------------------------------
// Replica parallelism

/// SPDE_THREADS if set, otherwise the hardware concurrency.
inline int default_threads() {
    if (const char* env = std::getenv("SPDE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// results[i] = fn(i) for i in [0, n), evaluated by at most `threads`
/// workers. The first exception thrown by any call is rethrown.
template <class F>
auto parallel_map(int n, int threads, F&& fn) -> std::vector<decltype(fn(0))> {
    using R = decltype(fn(0));
    std::vector<std::optional<R>> slots(static_cast<std::size_t>(std::max(n, 0)));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                slots[static_cast<std::size_t>(i)].emplace(fn(i));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    const int workers = std::clamp(threads, 1, std::max(n, 1));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    std::vector<R> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Ensembles

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct EnsembleSpec {
    int n_replicas = 200;
    std::uint64_t master_seed = 1;
    Grid1D grid{10.0, 512};
    SolverConfig solver;
    /// Worker count; 0 selects default_threads().
    int threads = 0;
    /// Hash of the run configuration, stamped on every check result.
    std::uint64_t config_hash = 0;

    double horizon() const { return solver.n_steps * solver.dt; }
    int workers() const { return threads > 0 ? threads : default_threads(); }

    void validate(bool variance_based = true) const {
        if (n_replicas < 1) throw std::invalid_argument("ensemble: n_replicas must be >= 1");
        if (variance_based && n_replicas < 2)
            throw std::invalid_argument("ensemble: variance-based checks need n_replicas >= 2");
        solver.validate(grid);
    }

    /// Solver configuration of replica r; its noise seed depends only on
    /// (master_seed, r).
    SolverConfig replica(int r) const {
        SolverConfig c = solver;
        c.noise.seed = derive_seed(master_seed, static_cast<std::uint64_t>(r));
        return c;
    }
};

/// Default desk ensemble: L = 10, 512 cells, dt = 2.5e-4, G = 0, H = x^beta.
inline EnsembleSpec desk_ensemble(double alpha, double beta, double horizon, int replicas,
                                  std::uint64_t seed, int record_every = 20) {
    EnsembleSpec e;
    e.n_replicas = replicas;
    e.master_seed = seed;
    e.solver.dt = 2.5e-4;
    e.solver.n_steps = static_cast<int>(std::lround(horizon / e.solver.dt));
    e.solver.record_every = record_every;
    e.solver.coefficients = builtin_stable_branching(beta);
    NoiseModel model;
    model.alpha = alpha;
    e.solver.noise = noise_for(model, e.grid, e.solver.dt);
    return e;
}

/// dx halved, dt divided by four; the horizon and recorded times are kept.
inline EnsembleSpec refined(const EnsembleSpec& spec) {
    EnsembleSpec r = spec;
    r.grid = Grid1D(spec.grid.half_width(), 2 * spec.grid.size());
    r.solver.dt = spec.solver.dt / 4.0;
    r.solver.n_steps = 4 * spec.solver.n_steps;
    r.solver.record_every = 4 * spec.solver.record_every;
    r.solver.noise = noise_for(spec.solver.noise, r.grid, r.solver.dt);
    return r;
}

/// Index of the snapshot recorded at time t, or nullopt.
inline std::optional<std::size_t> snapshot_index(const SolverConfig& cfg, double t) {
    const double stride = cfg.dt * cfg.record_every;
    const double k = t / stride;
    const double kr = std::round(k);
    if (std::abs(k - kr) > 1e-9 * std::max(1.0, k) || kr < 0.0) return std::nullopt;
    if (kr * cfg.record_every > cfg.n_steps) return std::nullopt;
    return static_cast<std::size_t>(kr);
}

/// One asserted or monitored check with everything needed to reproduce it.
struct CheckResult {
    std::string name;
    double statistic = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    /// Monitored checks are reported but never fail a run.
    bool asserted = true;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Holder exponent

struct HolderEstimate {
    double eta_hat = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
    /// Lags in space units and the sup increment at each.
    std::vector<double> lags;
    std::vector<double> sup_increments;
    /// Set when some sup increment vanishes (constant field on the window).
    bool degenerate = false;
};

/// Default lags in cells: 4, 8, 16, 32 (lags below 4 dx are excluded).
inline std::vector<int> default_holder_lags() { return {4, 8, 16, 32}; }

/// S(h) = max over grid pairs in [-K, K] at lag h of |X(x+h) - X(x)|, and
/// the least-squares slope of log S(h) against log h.
inline HolderEstimate estimate_holder(const FieldState& field, double K, std::span<const int> lag_cells) {
    const Grid1D& g = field.grid;
    if (!(K > 0.0 && K <= g.half_width()))
        throw std::invalid_argument("estimate_holder: window [-K, K] must lie inside the grid");
    if (lag_cells.size() < 4) throw std::invalid_argument("estimate_holder: need at least 4 scales");
    const auto [mn, mx] = std::minmax_element(lag_cells.begin(), lag_cells.end());
    if (*mn < 2) throw std::invalid_argument("estimate_holder: scales must be >= 2 dx");
    if (*mx < 2 * *mn) throw std::invalid_argument("estimate_holder: scales must span a dyadic factor");

    HolderEstimate out;
    std::vector<double> lx, ly;
    for (int lag : lag_cells) {
        double s = 0.0;
        bool any = false;
        for (int j = 0; j + lag < g.size(); ++j) {
            const double a = g.center(j), b = g.center(j + lag);
            if (a < -K || b > K) continue;
            any = true;
            s = std::max(s, std::abs(field.values[static_cast<std::size_t>(j + lag)] -
                                     field.values[static_cast<std::size_t>(j)]));
        }
        if (!any) throw std::invalid_argument("estimate_holder: lag exceeds the window");
        out.lags.push_back(lag * g.dx());
        out.sup_increments.push_back(s);
        if (!(s > 0.0)) out.degenerate = true;
        lx.push_back(std::log(lag * g.dx()));
        ly.push_back(std::log(s));
    }
    if (out.degenerate) return out;
    const auto fit = stats::fit_line(lx, ly);
    out.eta_hat = fit.slope;
    out.stderr_ = fit.slope_stderr;
    return out;
}

inline constexpr double kHolderLowerTolerance = 0.20;
inline constexpr double kHolderUpperTolerance = 0.25;
inline constexpr double kSmoothControlFloor = 0.95;

struct HolderReport {
    double alpha = 0.0;
    double t = 0.0;
    double eta_c = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<HolderEstimate> replicas;
    double median = std::numeric_limits<double>::quiet_NaN();
    int degenerate = 0;
    bool passed = false;
};

/// Runs the ensemble to its horizon, estimates eta per replica and checks
/// the median against [eta_c - 0.20, eta_c + 0.25].
inline HolderReport holder_target_check(const EnsembleSpec& spec, const FieldState& x0, double K,
                                        std::span<const int> lag_cells) {
    spec.validate(false);
    HolderReport rep;
    rep.alpha = spec.solver.noise.alpha;
    rep.t = spec.horizon();
    rep.eta_c = holder_exponent_targets(rep.alpha).eta_c;
    rep.lower = rep.eta_c - kHolderLowerTolerance;
    rep.upper = rep.eta_c + kHolderUpperTolerance;
    const std::vector<int> lags(lag_cells.begin(), lag_cells.end());
    rep.replicas = parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        SolverConfig cfg = spec.replica(r);
        cfg.record_every = std::max(1, cfg.n_steps);
        const auto traj = run(cfg, x0);
        return estimate_holder(*traj.final_state, K, lags);
    });
    std::vector<double> etas;
    for (const auto& e : rep.replicas) {
        if (e.degenerate)
            ++rep.degenerate;
        else
            etas.push_back(e.eta_hat);
    }
    if (!etas.empty()) {
        rep.median = stats::median(etas);
        rep.passed = rep.median >= rep.lower && rep.median <= rep.upper;
    }
    return rep;
}

/// Same protocol with H = 0: a deterministic heat flow whose profile is
/// smooth, so the estimator should read close to 1.
inline HolderEstimate holder_smooth_control(const EnsembleSpec& spec, const FieldState& x0, double K,
                                            std::span<const int> lag_cells) {
    SolverConfig cfg = spec.replica(0);
    cfg.coefficients = coefficients_by_name("zero", "zero");
    cfg.record_every = std::max(1, cfg.n_steps);
    const auto traj = run(cfg, x0);
    return estimate_holder(*traj.final_state, K, lag_cells);
}

// ---------------------------------------------------------------------------
// Moment and mass checks

struct MomentDecayReport {
    double p_bar = 1.0;
    double x = 0.0;
    std::vector<double> times;
    std::vector<double> means;
    std::vector<double> stderrs;
    /// (P_t X_0)(x) when p_bar = 1 and G = 0, otherwise empty.
    std::vector<double> oracle;
    double slope = 0.0;
    double slope_stderr = 0.0;
    /// Slope of the oracle series over the same times.
    std::optional<double> oracle_slope;
    double tolerance = 0.05;
    /// slope >= -p_bar/2 - tolerance.
    bool bound_ok = false;
};

/// Monte-Carlo E[X_t(x)^p_bar] on recorded times and its log-log slope.
inline MomentDecayReport moment_decay_check(const EnsembleSpec& spec, const FieldState& x0, double x,
                                            double p_bar, std::span<const double> times,
                                            double tolerance = 0.05) {
    const double alpha = spec.solver.noise.alpha;
    if (!(p_bar > 0.0 && p_bar < alpha))
        throw std::domain_error("moment_decay_check: p_bar must lie in (0, alpha), got " + std::to_string(p_bar));
    spec.validate(true);
    if (times.size() < 2) throw std::invalid_argument("moment_decay_check: need >= 2 times");
    std::vector<std::size_t> idx;
    for (double t : times) {
        const auto i = snapshot_index(spec.solver, t);
        if (!i || !(t > 0.0))
            throw std::invalid_argument("moment_decay_check: t=" + std::to_string(t) + " is not a recorded time");
        idx.push_back(*i);
    }
    const auto cell = static_cast<std::size_t>(spec.grid.cell_of(x));
    const auto rows = parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        const auto traj = run(spec.replica(r), x0);
        std::vector<double> v;
        for (auto i : idx) v.push_back(std::pow(traj.snapshots[i].values[cell], p_bar));
        return v;
    });

    MomentDecayReport rep;
    rep.p_bar = p_bar;
    rep.x = x;
    rep.tolerance = tolerance;
    rep.times.assign(times.begin(), times.end());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::vector<double> col;
        for (const auto& row : rows) col.push_back(row[k]);
        rep.means.push_back(stats::mean(col));
        rep.stderrs.push_back(stats::standard_error(col));
    }
    std::vector<double> lt, lm;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        lt.push_back(std::log(rep.times[k]));
        lm.push_back(std::log(rep.means[k]));
    }
    const auto fit = stats::fit_line(lt, lm);
    rep.slope = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
    rep.bound_ok = rep.slope >= -0.5 * p_bar - tolerance;

    if (p_bar == 1.0 && spec.solver.coefficients.drift_is_zero) {
        std::vector<double> lo;
        for (double t : rep.times) {
            rep.oracle.push_back(semigroup_apply(x0.values, t, spec.grid)[cell]);
            lo.push_back(std::log(rep.oracle.back()));
        }
        rep.oracle_slope = stats::fit_line(lt, lo).slope;
    }
    return rep;
}

struct MassBoundReport {
    double mean = 0.0;
    double stderr_ = 0.0;
    /// X_0(P_T f).
    double bound = 0.0;
    /// Ensemble mean of the clamped mass weighted by sup f.
    double clamp_bias = 0.0;
    bool upper_ok = false;
    /// Two-sided equality, checked when G = 0.
    std::optional<bool> two_sided_ok;
    std::vector<double> per_replica;
    std::vector<double> clamp_per_replica;

    bool passed() const { return upper_ok && two_sided_ok.value_or(true); }
    /// |mean - bound| - (3 stderr + clamp bias); nonpositive when two-sided equality holds.
    double excess() const { return std::abs(mean - bound) - (3.0 * stderr_ + clamp_bias); }
};

/// Compares the ensemble mean of <X_T, f> with X_0(P_T f).
inline MassBoundReport mass_bound_check(const EnsembleSpec& spec, const FieldState& x0, std::span<const double> f) {
    spec.validate(true);
    if (f.size() != static_cast<std::size_t>(spec.grid.size()))
        throw std::invalid_argument("mass_bound_check: f does not match the grid");
    double f_sup = 0.0;
    for (double v : f) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("mass_bound_check: f must be nonnegative and bounded");
        f_sup = std::max(f_sup, v);
    }
    const auto rows = parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        SolverConfig cfg = spec.replica(r);
        cfg.record_every = std::max(1, cfg.n_steps);
        const auto traj = run(cfg, x0);
        return std::pair{traj.final_state->pair(f), traj.clamped_mass.back()};
    });
    MassBoundReport rep;
    for (const auto& [v, c] : rows) {
        rep.per_replica.push_back(v);
        rep.clamp_per_replica.push_back(c);
    }
    rep.mean = stats::mean(rep.per_replica);
    rep.stderr_ = stats::standard_error(rep.per_replica);
    rep.clamp_bias = stats::mean(rep.clamp_per_replica) * f_sup;
    rep.bound = x0.pair(semigroup_apply(f, spec.horizon(), spec.grid));
    const double allowance = 3.0 * rep.stderr_ + rep.clamp_bias;
    rep.upper_ok = rep.mean <= rep.bound + allowance;
    if (spec.solver.coefficients.drift_is_zero) rep.two_sided_ok = std::abs(rep.mean - rep.bound) <= allowance;
    return rep;
}

struct IncrementMomentReport {
    double delta = 0.0;
    double r = 0.0;
    double delta1 = 0.0;
    std::vector<std::pair<double, double>> pairs;
    std::vector<double> lags;
    /// E|X_T(x1) - X_T(x2)|^delta per pair.
    std::vector<double> moments;
    double exponent = std::numeric_limits<double>::quiet_NaN();
    double target = 0.0;
    double tolerance = 0.1;
    bool passed = false;
};

/// Checks delta in (1, alpha), delta1 in (alpha, 2) and
/// 0 < r < min{1, (3-delta)/delta, (3-delta1)/delta1}.
inline void validate_increment_parameters(double alpha, double delta, double r, double delta1) {
    if (!(delta > 1.0 && delta < alpha))
        throw std::domain_error("increment moments: delta must lie in (1, alpha)");
    if (!(delta1 > alpha && delta1 < 2.0))
        throw std::domain_error("increment moments: delta1 must lie in (alpha, 2)");
    if (!(r > 0.0)) throw std::domain_error("increment moments: r must be positive");
    if (!(r < 1.0)) throw std::domain_error("increment moments: r < 1 violated");
    if (!(r < (3.0 - delta) / delta)) throw std::domain_error("increment moments: r < (3-delta)/delta violated");
    if (!(r < (3.0 - delta1) / delta1))
        throw std::domain_error("increment moments: r < (3-delta1)/delta1 violated");
}

/// |M (p_t(x1 - c) - p_t(x2 - c))|^delta: the increment moment of the
/// deterministic heat flow from a point mass M at c.
inline double heat_increment_moment(double mass, double center, double t, double x1, double x2, double delta) {
    return std::pow(std::abs(mass * (heat_kernel(t, x1 - center) - heat_kernel(t, x2 - center))), delta);
}

inline IncrementMomentReport increment_moment_check(const EnsembleSpec& spec, const FieldState& x0, double delta,
                                                    double r, double delta1,
                                                    std::vector<std::pair<double, double>> pairs,
                                                    double tolerance = 0.1) {
    validate_increment_parameters(spec.solver.noise.alpha, delta, r, delta1);
    spec.validate(false);
    const Grid1D& g = spec.grid;
    const auto rows = parallel_map(spec.n_replicas, spec.workers(), [&](int rep) {
        SolverConfig cfg = spec.replica(rep);
        cfg.record_every = std::max(1, cfg.n_steps);
        const auto traj = run(cfg, x0);
        std::vector<double> v;
        for (const auto& [a, b] : pairs) v.push_back(std::pow(std::abs(traj.final_state->at(a) - traj.final_state->at(b)), delta));
        return v;
    });
    IncrementMomentReport out;
    out.delta = delta;
    out.r = r;
    out.delta1 = delta1;
    out.tolerance = tolerance;
    out.target = r * delta;
    out.pairs = std::move(pairs);
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < out.pairs.size(); ++k) {
        std::vector<double> col;
        for (const auto& row : rows) col.push_back(row[k]);
        const double m = stats::mean(col);
        const double lag = std::abs(g.center(g.cell_of(out.pairs[k].first)) - g.center(g.cell_of(out.pairs[k].second)));
        out.lags.push_back(lag);
        out.moments.push_back(m);
        if (lag > 0.0 && m > 0.0) {
            lx.push_back(std::log(lag));
            ly.push_back(std::log(m));
        }
    }
    if (lx.size() >= 2) {
        out.exponent = stats::fit_line(lx, ly).slope;
        out.passed = out.exponent >= out.target - tolerance;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stopping monitors

struct StoppingMonitors {
    std::vector<double> k_levels;
    /// First recorded time in (0, T] with <X,1> + <Y,1> > k; nullopt = never.
    std::vector<std::optional<double>> gamma;
    /// First dyadic time at which the bar-integral of the Holder quotient
    /// exceeds k; nullopt = never.
    std::vector<std::optional<double>> sigma;
    /// Holder quotient at each deepest-level dyadic time.
    std::vector<double> quotient;
    int depth = 0;

    static bool monotone(const std::vector<std::optional<double>>& v) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (!v[i - 1]) {
                if (v[i]) return false;
            } else if (v[i] && *v[i] < *v[i - 1]) {
                return false;
            }
        }
        return true;
    }

    /// gamma and sigma nondecreasing in k (k_levels must be sorted).
    bool is_monotone() const { return monotone(gamma) && monotone(sigma); }
};

/// sup over grid pairs x != z in [-K, K] of (|X(x)-X(z)| v |Y(x)-Y(z)|) / |x-z|^eta.
inline double holder_quotient(const FieldState& x, const FieldState& y, double K, double eta) {
    const Grid1D& g = x.grid;
    std::vector<int> cells;
    for (int j = 0; j < g.size(); ++j)
        if (std::abs(g.center(j)) <= K) cells.push_back(j);
    double q = 0.0;
    for (std::size_t a = 0; a < cells.size(); ++a) {
        for (std::size_t b = a + 1; b < cells.size(); ++b) {
            const auto i = static_cast<std::size_t>(cells[a]), j = static_cast<std::size_t>(cells[b]);
            const double d = std::max(std::abs(x.values[i] - x.values[j]), std::abs(y.values[i] - y.values[j]));
            if (d == 0.0) continue;
            q = std::max(q, d / std::pow(g.center(cells[b]) - g.center(cells[a]), eta));
        }
    }
    return q;
}

/// gamma_k and sigma_k for a coupled run. The bar-integral is the minimum
/// over the three deepest dyadic levels of right-endpoint sums.
inline StoppingMonitors stopping_monitors(const Trajectory& x, const Trajectory& y, std::vector<double> k_levels,
                                          double alpha, double eta, double K, int depth) {
    if (!(eta > 0.0 && eta < holder_exponent_targets(alpha).eta_c))
        throw std::domain_error("stopping_monitors: eta must lie in (0, eta_c)");
    if (x.snapshots.size() != y.snapshots.size() || x.snapshots.empty())
        throw std::invalid_argument("stopping_monitors: trajectories differ in length");
    const Grid1D& g = x.snapshots.front().grid;
    if (!(K > 0.0 && K <= g.half_width())) throw std::invalid_argument("stopping_monitors: K must lie inside the domain");
    if (depth < 2) throw std::invalid_argument("stopping_monitors: depth must be >= 2");
    const std::size_t n_rec = x.snapshots.size() - 1;
    const std::size_t cells = std::size_t{1} << depth;
    if (n_rec == 0 || n_rec % cells != 0)
        throw std::invalid_argument("stopping_monitors: dyadic depth exceeds snapshot resolution");
    std::sort(k_levels.begin(), k_levels.end());

    StoppingMonitors out;
    out.k_levels = k_levels;
    out.depth = depth;
    const double T = x.snapshots.back().t;
    const std::size_t stride = n_rec / cells;
    for (std::size_t i = 1; i <= cells; ++i)
        out.quotient.push_back(holder_quotient(x.snapshots[i * stride], y.snapshots[i * stride], K, eta));

    // bar[i-1]: bar-integral over (0, iT/2^depth].
    std::vector<double> bar(cells, std::numeric_limits<double>::infinity());
    for (int l = depth - 2; l <= depth; ++l) {
        const std::size_t step = std::size_t{1} << (depth - l);
        const double h = T / static_cast<double>(std::size_t{1} << l);
        double acc = 0.0;
        for (std::size_t i = 1; i <= cells; ++i) {
            if (i % step == 0) acc += out.quotient[i - 1] * h;
            bar[i - 1] = std::min(bar[i - 1], acc);
        }
    }

    for (double k : k_levels) {
        std::optional<double> gk;
        for (std::size_t i = 1; i < x.snapshots.size(); ++i) {
            if (x.mass[i] + y.mass[i] > k) {
                gk = x.snapshots[i].t;
                break;
            }
        }
        out.gamma.push_back(gk);
        std::optional<double> sk;
        for (std::size_t i = 1; i <= cells; ++i) {
            if (bar[i - 1] > k) {
                sk = T * static_cast<double>(i) / static_cast<double>(cells);
                break;
            }
        }
        out.sigma.push_back(sk);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uniqueness experiment

inline constexpr const char* kOutsideRegimeWatermark = "outside the pathwise uniqueness regime";

struct LadderRow {
    int n = 0;
    double m = 0.0;
    /// Ensemble mean of <phi_n(<U_T, Phi^m>), Psi>.
    double functional = 0.0;
};

struct UniquenessReport {
    GateVerdict gate;
    /// Empty inside the admissible regime.
    std::string watermark;
    bool identical_bit_equal = false;
    std::vector<double> perturbations;
    /// Ensemble mean of the end-time L1 distance per perturbation.
    std::vector<double> distances;
    std::vector<double> distance_stderrs;
    /// Per-replica end-time L1 distance, [perturbation][replica].
    std::vector<std::vector<double>> per_replica;
    bool nondecreasing = false;
    /// D at the smallest positive perturbation below half of D at the largest.
    bool vanishing = false;
    std::optional<double> ladder_delta;
    std::vector<LadderRow> ladder;
    /// Monitored only.
    bool ladder_decreasing = false;

    bool passed() const { return identical_bit_equal && nondecreasing && vanishing; }
};

class InadmissibleParameters : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline bool bit_equal(const Trajectory& a, const Trajectory& b) {
    if (a.snapshots.size() != b.snapshots.size()) return false;
    for (std::size_t i = 0; i < a.snapshots.size(); ++i)
        if (a.snapshots[i].values != b.snapshots[i].values || a.snapshots[i].t != b.snapshots[i].t) return false;
    return true;
}

/// Weight Psi on (-1, 1) used by the diagnostic ladder.
inline double ladder_weight(double x) { return detail::standard_bump(x); }

/// Coupled runs from X_0 and X_0 + d * bump for each d in `perturbations`.
inline UniquenessReport uniqueness_experiment(const EnsembleSpec& spec, const FieldState& x0, const FieldState& bump,
                                              std::vector<double> perturbations, bool allow_inadmissible = false) {
    spec.validate(true);
    if (!(bump.grid == spec.grid) || !(x0.grid == spec.grid))
        throw std::invalid_argument("uniqueness_experiment: initial data must live on the ensemble grid");
    UniquenessReport rep;
    ParameterSet ps;
    ps.alpha = spec.solver.noise.alpha;
    ps.beta = spec.solver.coefficients.holder_exponent;
    ps.q = spec.solver.q;
    rep.gate = uniqueness_gate(ps);
    if (!rep.gate.admissible) {
        if (!allow_inadmissible)
            throw InadmissibleParameters("uniqueness_experiment: parameters inadmissible (" + rep.gate.reason +
                                         "); rerun with the override flag");
        rep.watermark = kOutsideRegimeWatermark;
    }
    std::sort(perturbations.begin(), perturbations.end());
    rep.perturbations = perturbations;

    {
        const auto c = coupled_run(spec.replica(0), x0, x0);
        rep.identical_bit_equal =
            bit_equal(c.x, c.y) && std::all_of(c.l1_distance.begin(), c.l1_distance.end(), [](double d) { return d == 0.0; });
    }

    std::optional<std::size_t> smallest_positive;
    for (std::size_t i = 0; i < perturbations.size(); ++i)
        if (perturbations[i] > 0.0) {
            smallest_positive = i;
            break;
        }
    rep.ladder_delta = rep.gate.delta;

    std::vector<double> probes;
    for (int j = 0; j < spec.grid.size(); ++j)
        if (std::abs(spec.grid.center(j)) < 1.0) probes.push_back(spec.grid.center(j));
    std::vector<YWSequence> seqs;
    if (rep.ladder_delta)
        for (int n = 2; n <= 5; ++n) seqs.emplace_back(n);

    struct ReplicaOut {
        std::vector<double> distance;
        std::vector<double> ladder;
    };
    const auto rows = parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        ReplicaOut o;
        SolverConfig cfg = spec.replica(r);
        cfg.record_every = std::max(1, cfg.n_steps);
        for (std::size_t i = 0; i < perturbations.size(); ++i) {
            FieldState y0 = x0;
            for (std::size_t j = 0; j < y0.values.size(); ++j) y0.values[j] += perturbations[i] * bump.values[j];
            const auto c = coupled_run(cfg, x0, y0);
            o.distance.push_back(c.l1_distance.back());
            if (smallest_positive && i == *smallest_positive && rep.ladder_delta) {
                std::vector<double> u(x0.values.size());
                for (std::size_t j = 0; j < u.size(); ++j)
                    u[j] = c.x.final_state->values[j] - c.y.final_state->values[j];
                for (const auto& seq : seqs) {
                    const Mollifier moll(std::pow(seq.a_prev(), -*rep.ladder_delta));
                    o.ladder.push_back(localized_functional(u, spec.grid, ladder_weight, seq, moll, probes));
                }
            }
        }
        return o;
    });

    rep.per_replica.assign(perturbations.size(), {});
    for (const auto& o : rows)
        for (std::size_t i = 0; i < perturbations.size(); ++i) rep.per_replica[i].push_back(o.distance[i]);
    for (const auto& col : rep.per_replica) {
        rep.distances.push_back(stats::mean(col));
        rep.distance_stderrs.push_back(stats::standard_error(col));
    }
    rep.nondecreasing = true;
    for (std::size_t i = 1; i < rep.distances.size(); ++i)
        if (rep.distances[i] < rep.distances[i - 1]) rep.nondecreasing = false;
    for (std::size_t i = 0; i < perturbations.size(); ++i)
        if (perturbations[i] == 0.0 && rep.distances[i] != 0.0) rep.nondecreasing = false;
    if (smallest_positive && *smallest_positive + 1 < rep.distances.size())
        rep.vanishing = rep.distances[*smallest_positive] < 0.5 * rep.distances.back();

    if (rep.ladder_delta) {
        for (std::size_t k = 0; k < seqs.size(); ++k) {
            LadderRow row;
            row.n = seqs[k].n();
            row.m = std::pow(seqs[k].a_prev(), -*rep.ladder_delta);
            std::vector<double> col;
            for (const auto& o : rows)
                if (k < o.ladder.size()) col.push_back(o.ladder[k]);
            row.functional = col.empty() ? 0.0 : stats::mean(col);
            rep.ladder.push_back(row);
        }
        rep.ladder_decreasing = true;
        for (std::size_t k = 1; k < rep.ladder.size(); ++k)
            if (!(rep.ladder[k].functional < rep.ladder[k - 1].functional)) rep.ladder_decreasing = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Monitors

struct IntegrabilityMonitor {
    bool finite = true;
    bool nondecreasing = true;
    double final_value = 0.0;
};

/// F(t) = int_0^t ds int X_s^q dx along a trajectory.
inline IntegrabilityMonitor integrability_monitor(const Trajectory& traj) {
    IntegrabilityMonitor m;
    for (std::size_t i = 0; i < traj.integrability.size(); ++i) {
        const double v = traj.integrability[i];
        if (!std::isfinite(v)) m.finite = false;
        if (i > 0 && v < traj.integrability[i - 1]) m.nondecreasing = false;
    }
    if (!traj.integrability.empty()) m.final_value = traj.integrability.back();
    return m;
}

struct TimeContinuityDiagnostic {
    double x = 0.0;
    double t = 0.0;
    /// t_n approaching t, oldest first.
    std::vector<double> t_n;
    /// Ensemble mean of |X_{t_n}(x) - X_t(x)|.
    std::vector<double> mean_abs_difference;
    bool decreasing = false;
};

/// Uses snapshots 4, 2 and 1 strides before the horizon.
inline TimeContinuityDiagnostic time_continuity_diagnostic(const EnsembleSpec& spec, const FieldState& x0, double x) {
    spec.validate(false);
    const std::size_t n_rec = static_cast<std::size_t>(spec.solver.n_steps / spec.solver.record_every);
    if (n_rec < 4) throw std::invalid_argument("time_continuity_diagnostic: need >= 4 recorded strides");
    const std::size_t last = n_rec;
    const std::vector<std::size_t> lags = {4, 2, 1};
    const auto cell = static_cast<std::size_t>(spec.grid.cell_of(x));
    const auto rows = parallel_map(spec.n_replicas, spec.workers(), [&](int r) {
        const auto traj = run(spec.replica(r), x0);
        std::vector<double> v;
        for (auto l : lags)
            v.push_back(std::abs(traj.snapshots[last - l].values[cell] - traj.snapshots[last].values[cell]));
        return v;
    });
    TimeContinuityDiagnostic d;
    d.x = x;
    d.t = static_cast<double>(last * spec.solver.record_every) * spec.solver.dt;
    for (std::size_t k = 0; k < lags.size(); ++k) {
        d.t_n.push_back(static_cast<double>((last - lags[k]) * spec.solver.record_every) * spec.solver.dt);
        std::vector<double> col;
        for (const auto& row : rows) col.push_back(row[k]);
        d.mean_abs_difference.push_back(stats::mean(col));
    }
    d.decreasing = d.mean_abs_difference[0] > d.mean_abs_difference[1] && d.mean_abs_difference[1] > d.mean_abs_difference[2];
    return d;
}

}  // namespace spde
