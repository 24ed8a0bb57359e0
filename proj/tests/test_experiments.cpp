#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "spde/experiments.hpp"
#include "spde/stats.hpp"

using namespace spde;

namespace {

const Grid1D kGrid(10.0, 512);

EnsembleSpec small_spec(double alpha, const std::string& drift, const std::string& noise, int replicas, int steps,
                        int record_every, const Grid1D& g = Grid1D(10.0, 128)) {
    EnsembleSpec e;
    e.n_replicas = replicas;
    e.master_seed = 4;
    e.grid = g;
    e.threads = 1;
    e.solver.dt = 2.5e-4;
    e.solver.n_steps = steps;
    e.solver.record_every = record_every;
    NoiseModel m;
    m.alpha = alpha;
    e.solver.noise = noise_for(m, g, e.solver.dt);
    e.solver.coefficients = coefficients_by_name(drift, noise, 1.0 / alpha);
    e.solver.coefficients.holder_exponent = 1.0 / alpha;
    return e;
}

}  // namespace

TEST(ParallelMap, KeepsOrderAndRethrows) {
    const auto v = parallel_map(100, 4, [](int i) { return i * i; });
    for (int i = 0; i < 100; ++i) EXPECT_EQ(v[static_cast<std::size_t>(i)], i * i);
    EXPECT_THROW(parallel_map(10, 3,
                              [](int i) {
                                  if (i == 6) throw std::runtime_error("boom");
                                  return i;
                              }),
                 std::runtime_error);
}

TEST(Ensemble, ReplicaSeedsDependOnlyOnIndex) {
    auto e = small_spec(1.5, "zero", "power:0.6666666666666666", 10, 10, 5);
    const auto s3 = e.replica(3).noise.seed;
    e.n_replicas = 50;
    EXPECT_EQ(e.replica(3).noise.seed, s3);
    EXPECT_NE(e.replica(4).noise.seed, s3);
    const auto r = refined(e);
    EXPECT_EQ(r.grid.size(), 256);
    EXPECT_DOUBLE_EQ(r.horizon(), e.horizon());
}

TEST(Stats, LineFitAndTests) {
    const std::vector<double> x = {0, 1, 2, 3}, y = {1, 3, 5, 7};
    const auto f = stats::fit_line(x, y);
    EXPECT_NEAR(f.slope, 2.0, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
    EXPECT_NEAR(f.slope_stderr, 0.0, 1e-14);
    Rng rng(1);
    std::vector<double> p(200000);
    for (auto& v : p) v = std::pow(rng.uniform(), -1.0 / 1.5);
    // Hill standard error is about alpha / sqrt(k) = 0.034 here.
    EXPECT_NEAR(stats::hill_estimator(p, 2000), 1.5, 0.15);
    EXPECT_EQ(stats::ks_two_sample({1, 2, 3}, {1, 2, 3}), 0.0);
    EXPECT_DOUBLE_EQ(stats::median({3, 1, 2}), 2.0);
}

TEST(HolderEstimator, SquareRootField) {
    const double x0 = kGrid.center(256);
    const FieldState f(kGrid, 0.0, sample_on(kGrid, [&](double x) { return std::sqrt(std::abs(x - x0)); }));
    const auto e = estimate_holder(f, 4.0, default_holder_lags());
    EXPECT_NEAR(e.eta_hat, 0.5, 0.02);
}

TEST(HolderEstimator, AffineField) {
    const FieldState f(kGrid, 0.0, sample_on(kGrid, [](double x) { return 3.0 * x - 1.0; }));
    EXPECT_NEAR(estimate_holder(f, 4.0, default_holder_lags()).eta_hat, 1.0, 1e-10);
}

TEST(HolderEstimator, SmoothBumpTendsToOne) {
    // Smooth data: the slope approaches 1 as the physical lags shrink.
    double prev = 0.0;
    for (int n : {512, 2048, 8192}) {
        const Grid1D g(10.0, n);
        const double eta = estimate_holder(smooth_bump(g, 0.0, 4.0, 1.0), 4.0, default_holder_lags()).eta_hat;
        EXPECT_GT(eta, prev);
        EXPECT_LE(eta, 1.0 + 1e-12);
        prev = eta;
    }
    EXPECT_GT(prev, 0.999);
}

TEST(HolderEstimator, ConstantFieldIsDegenerate) {
    const FieldState f(kGrid, 0.0, std::vector<double>(512, 2.0));
    const auto e = estimate_holder(f, 4.0, default_holder_lags());
    EXPECT_TRUE(e.degenerate);
    EXPECT_TRUE(std::isnan(e.eta_hat));
}

TEST(HolderEstimator, RejectsBadScales) {
    const auto f = smooth_bump(kGrid, 0.0, 4.0, 1.0);
    EXPECT_THROW(estimate_holder(f, 4.0, std::vector<int>{4, 8, 16}), std::invalid_argument);
    EXPECT_THROW(estimate_holder(f, 4.0, std::vector<int>{1, 2, 4, 8}), std::invalid_argument);
    EXPECT_THROW(estimate_holder(f, 4.0, std::vector<int>{4, 5, 6, 7}), std::invalid_argument);
    EXPECT_THROW(estimate_holder(f, 11.0, default_holder_lags()), std::invalid_argument);
}

TEST(MomentDecay, RefusesExponentOutsideRange) {
    const auto spec = small_spec(1.5, "zero", "power:0.6666666666666666", 4, 40, 10);
    const auto x0 = point_mass(spec.grid, 0.0, 1.0);
    const std::vector<double> times = {0.0025, 0.005, 0.01};
    EXPECT_THROW(moment_decay_check(spec, x0, 0.0, 1.5, times), std::domain_error);
    EXPECT_THROW(moment_decay_check(spec, x0, 0.0, 2.0, times), std::domain_error);
    EXPECT_THROW(moment_decay_check(spec, x0, 0.0, 0.0, times), std::domain_error);
}

TEST(MomentDecay, HeatFlowMatchesOracle) {
    auto spec = small_spec(1.5, "zero", "zero", 2, 400, 40, kGrid);
    const auto x0 = point_mass(spec.grid, spec.grid.center(256), 1.0);
    const std::vector<double> times = {0.02, 0.04, 0.08};
    const auto r = moment_decay_check(spec, x0, spec.grid.center(256), 1.0, times);
    ASSERT_EQ(r.oracle.size(), times.size());
    const double dx = spec.grid.dx();
    for (std::size_t k = 0; k < times.size(); ++k) {
        // dt steps are lattice steps, which compose to e^{-lambda} I_0(lambda) / dx.
        const double lambda = times[k] / (dx * dx);
        const double lattice = std::exp(-lambda) * std::cyl_bessel_i(0.0, lambda) / dx;
        EXPECT_NEAR(r.means[k], lattice, 1e-10 * lattice);
        // Against the continuum kernel: I_0 expansion gives a relative gap of about 1/(8 lambda).
        EXPECT_NEAR(r.means[k] / r.oracle[k] - 1.0, 1.0 / (8.0 * lambda), 0.25 / (8.0 * lambda));
    }
    EXPECT_NEAR(r.slope, -0.5, 0.01);
}

TEST(MassBound, ZeroTestFunction) {
    const auto spec = small_spec(1.5, "zero", "power:0.6666666666666666", 4, 40, 40);
    const std::vector<double> f(128, 0.0);
    const auto r = mass_bound_check(spec, point_mass(spec.grid, 0.0, 1.0), f);
    EXPECT_EQ(r.mean, 0.0);
    EXPECT_EQ(r.bound, 0.0);
    EXPECT_TRUE(r.passed());
}

TEST(MassBound, LinearDecayStaysBelowBound) {
    const auto spec = small_spec(1.5, "lipschitz_demo", "zero", 2, 400, 400);
    const std::vector<double> one(128, 1.0);
    const auto r = mass_bound_check(spec, smooth_bump(spec.grid, 0.0, 2.0, 3.0), one);
    EXPECT_NEAR(r.mean, 3.0 * std::exp(-spec.horizon()), 1e-4);
    EXPECT_TRUE(r.upper_ok);
    EXPECT_FALSE(r.two_sided_ok);
}

TEST(IncrementMoments, ParameterValidation) {
    EXPECT_NO_THROW(validate_increment_parameters(1.5, 1.2, 0.5, 1.7));
    EXPECT_THROW(validate_increment_parameters(1.5, 1.6, 0.5, 1.7), std::domain_error);
    EXPECT_THROW(validate_increment_parameters(1.5, 1.2, 0.5, 1.4), std::domain_error);
    EXPECT_THROW(validate_increment_parameters(1.5, 1.2, 1.0, 1.7), std::domain_error);
    EXPECT_THROW(validate_increment_parameters(1.5, 1.2, 0.0, 1.7), std::domain_error);
    try {
        validate_increment_parameters(1.5, 1.2, 0.8, 1.9);
        FAIL();
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find("delta1"), std::string::npos);
    }
}

TEST(IncrementMoments, HeatFlowFromPointMass) {
    const auto spec = small_spec(1.5, "zero", "zero", 1, 400, 400, kGrid);
    const double c = kGrid.center(256);
    const auto x0 = point_mass(kGrid, c, 1.0);
    std::vector<std::pair<double, double>> pairs;
    for (int lag : {0, 4, 8, 16}) pairs.emplace_back(kGrid.center(256), kGrid.center(256 + lag));
    const auto r = increment_moment_check(spec, x0, 1.2, 0.5, 1.7, pairs);
    EXPECT_EQ(r.moments[0], 0.0);
    const double lambda = spec.horizon() / (kGrid.dx() * kGrid.dx());
    for (std::size_t k = 1; k < pairs.size(); ++k) {
        const double lag = std::round((pairs[k].second - pairs[k].first) / kGrid.dx());
        const double lattice = std::pow(
            std::exp(-lambda) * std::abs(std::cyl_bessel_i(0.0, lambda) - std::cyl_bessel_i(lag, lambda)) / kGrid.dx(), 1.2);
        EXPECT_NEAR(r.moments[k], lattice, 1e-9 * lattice) << k;
        const double continuum = heat_increment_moment(1.0, c, spec.horizon(), pairs[k].first, pairs[k].second, 1.2);
        EXPECT_NEAR(r.moments[k], continuum, 0.05 * continuum) << k;
    }
}

namespace {

Trajectory synthetic(const Grid1D& g, int n_rec, double dt, const std::function<double(int, double)>& value) {
    Trajectory t;
    for (int i = 0; i <= n_rec; ++i) {
        FieldState s(g, i * dt, sample_on(g, [&](double x) { return value(i, x); }));
        t.mass.push_back(s.mass());
        t.snapshots.push_back(std::move(s));
    }
    return t;
}

}  // namespace

TEST(StoppingMonitors, ZeroFieldsNeverStop) {
    const Grid1D g(4.0, 64);
    const auto z = synthetic(g, 16, 0.01, [](int, double) { return 0.0; });
    const auto m = stopping_monitors(z, z, {0.5, 1.0, 2.0}, 1.5, 0.15, 1.0, 4);
    for (const auto& s : m.sigma) EXPECT_FALSE(s);
    for (const auto& s : m.gamma) EXPECT_FALSE(s);
    EXPECT_TRUE(m.is_monotone());
}

TEST(StoppingMonitors, GammaBelowInitialMassIsFirstRecordedTime) {
    const Grid1D g(4.0, 64);
    const auto x = synthetic(g, 16, 0.01, [](int i, double v) { return (1.0 + 0.1 * i) * std::exp(-v * v); });
    const auto m = stopping_monitors(x, x, {0.5, 1.0, 3.0, 1e6}, 1.5, 0.15, 1.0, 4);
    ASSERT_TRUE(m.gamma[0]);
    EXPECT_DOUBLE_EQ(*m.gamma[0], 0.01);
    EXPECT_FALSE(m.gamma[3]);
    EXPECT_TRUE(m.is_monotone());
}

TEST(StoppingMonitors, RejectsUnresolvedDepth) {
    const Grid1D g(4.0, 64);
    const auto x = synthetic(g, 12, 0.01, [](int, double) { return 1.0; });
    EXPECT_THROW(stopping_monitors(x, x, {1.0}, 1.5, 0.15, 1.0, 4), std::invalid_argument);
    EXPECT_THROW(stopping_monitors(x, x, {1.0}, 1.5, 0.5, 1.0, 2), std::domain_error);
}

TEST(StoppingMonitors, MonotoneOnSimulatedRuns) {
    const auto spec = small_spec(1.1, "zero", "power:0.9090909090909091", 3, 320, 20);
    const auto x0 = smooth_bump(spec.grid, 0.0, 2.0, 1.0);
    auto y0 = x0;
    for (auto& v : y0.values) v *= 1.1;
    for (int r = 0; r < spec.n_replicas; ++r) {
        const auto c = coupled_run(spec.replica(r), x0, y0);
        const auto m = stopping_monitors(c.x, c.y, {0.5, 1.0, 2.0, 4.0, 8.0}, 1.1, 0.4, 1.0, 4);
        EXPECT_TRUE(m.is_monotone()) << r;
    }
}

TEST(HolderQuotient, AffineField) {
    const Grid1D g(4.0, 64);
    const FieldState x(g, 0.0, sample_on(g, [](double v) { return 2.0 * v; }));
    const auto zero = FieldState::zeros(g);
    const double span = g.center(47) - g.center(16);
    ASSERT_LE(std::abs(g.center(16)), 2.0);
    EXPECT_NEAR(holder_quotient(x, zero, 2.0, 0.5), 2.0 * std::sqrt(span), 1e-12);
}

TEST(Uniqueness, ZeroPerturbationGivesZeroDistance) {
    const auto spec = small_spec(1.1, "zero", "power:0.9090909090909091", 3, 40, 40);
    const auto x0 = smooth_bump(spec.grid, 0.0, 4.0, 1.0);
    const auto bump = smooth_bump(spec.grid, 0.0, 1.0, 1.0);
    const auto r = uniqueness_experiment(spec, x0, bump, {0.0, 0.1, 0.2});
    EXPECT_TRUE(r.watermark.empty());
    EXPECT_TRUE(r.identical_bit_equal);
    EXPECT_EQ(r.distances[0], 0.0);
    EXPECT_LE(r.distances[1], r.distances[2]);
    EXPECT_EQ(r.ladder.size(), 4u);
}

TEST(Uniqueness, OutsideRegimeNeedsOverride) {
    const auto spec = small_spec(1.5, "zero", "power:0.6666666666666666", 2, 20, 20);
    const auto x0 = smooth_bump(spec.grid, 0.0, 4.0, 1.0);
    const auto bump = smooth_bump(spec.grid, 0.0, 1.0, 1.0);
    EXPECT_THROW(uniqueness_experiment(spec, x0, bump, {0.05, 0.1}), InadmissibleParameters);
    const auto r = uniqueness_experiment(spec, x0, bump, {0.05, 0.1}, true);
    EXPECT_EQ(r.watermark, kOutsideRegimeWatermark);
    EXPECT_FALSE(r.gate.admissible);
}

TEST(Monitors, IntegrabilityAccumulator) {
    auto spec = small_spec(1.5, "zero", "power:0.6666666666666666", 1, 100, 10);
    spec.solver.q = 2.0;
    const auto traj = run(spec.replica(0), smooth_bump(spec.grid, 0.0, 2.0, 1.0));
    const auto m = integrability_monitor(traj);
    EXPECT_TRUE(m.finite);
    EXPECT_TRUE(m.nondecreasing);
    EXPECT_GT(m.final_value, 0.0);
}

TEST(Monitors, TimeContinuityDiagnosticTimes) {
    const auto spec = small_spec(1.5, "zero", "power:0.6666666666666666", 3, 80, 10);
    const auto d = time_continuity_diagnostic(spec, smooth_bump(spec.grid, 0.0, 2.0, 1.0), 0.0);
    ASSERT_EQ(d.t_n.size(), 3u);
    EXPECT_LT(d.t_n[0], d.t_n[1]);
    EXPECT_LT(d.t_n[1], d.t_n[2]);
    EXPECT_LT(d.t_n[2], d.t);
    for (double v : d.mean_abs_difference) EXPECT_GE(v, 0.0);
}
