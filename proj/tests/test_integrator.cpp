#include <gtest/gtest.h>

#include <cmath>

#include "spde/integrator.hpp"

using namespace spde;

namespace {

SolverConfig config(const Grid1D& g, const std::string& drift, const std::string& noise, int steps = 200,
                    int record_every = 20, std::uint64_t seed = 1, double alpha = 1.5) {
    SolverConfig c;
    c.dt = 2.5e-4;
    c.n_steps = steps;
    c.record_every = record_every;
    NoiseModel m;
    m.alpha = alpha;
    m.seed = seed;
    c.noise = noise_for(m, g, c.dt);
    c.coefficients = coefficients_by_name(drift, noise, 1.0 / alpha);
    return c;
}

const Grid1D kGrid(10.0, 512);

}  // namespace

TEST(Step, NoDriftNoNoiseIsOneSemigroupStep) {
    const auto cfg = config(kGrid, "zero", "zero");
    const auto x0 = gaussian_bump(kGrid, 0.5, 0.05, 2.0);
    NoiseSource src(cfg.noise, kGrid);
    const auto x1 = step(x0, cfg, src.increments(0.0));
    EXPECT_EQ(x1.values, semigroup_apply(x0.values, cfg.dt, kGrid));
    EXPECT_DOUBLE_EQ(x1.t, cfg.dt);
}

TEST(Step, LinearDecayFollowsOde) {
    const auto cfg = config(kGrid, "lipschitz_demo", "zero");
    auto x = smooth_bump(kGrid, 0.0, 3.0, 1.0);
    NoiseSource src(cfg.noise, kGrid);
    Stepper st(cfg, kGrid);
    for (int k = 0; k < 50; ++k) {
        const double before = x.mass();
        x = st.step(x, src.increments(k * cfg.dt));
        EXPECT_NEAR(x.mass() / before, std::exp(-cfg.dt), cfg.dt * cfg.dt);
    }
}

TEST(Run, DeterministicReplay) {
    const auto cfg = config(kGrid, "zero", "power", 100, 10, 77);
    const auto x0 = point_mass(kGrid, 0.0, 1.0);
    const auto a = run(cfg, x0), b = run(cfg, x0);
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) EXPECT_EQ(a.snapshots[i].values, b.snapshots[i].values);
    EXPECT_EQ(a.mass, b.mass);
    const auto c = run(config(kGrid, "zero", "power", 100, 10, 78), x0);
    EXPECT_NE(a.snapshots.back().values, c.snapshots.back().values);
}

TEST(Run, ThinnedModeIsDeterministicAndFinite) {
    auto cfg = config(kGrid, "zero", "power", 40, 10, 5);
    cfg.noise.mode = NoiseMode::thinned;
    cfg.noise.epsilon = 1e-2;
    const auto x0 = smooth_bump(kGrid, 0.0, 2.0, 1.0);
    const auto a = run(cfg, x0), b = run(cfg, x0);
    EXPECT_EQ(a.snapshots.back().values, b.snapshots.back().values);
    for (double v : a.snapshots.back().values) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
}

TEST(Run, WeakFormResidualOfHeatFlow) {
    const auto cfg = config(kGrid, "zero", "zero", 2000, 100);
    const auto traj = run(cfg, gaussian_bump(kGrid, 0.0, 0.01, 1.0));
    for (double r : traj.residual) EXPECT_LT(r, 1e-6 * (1.0 + traj.f_second_sup));
}

TEST(Run, ZeroStateIsAbsorbing) {
    const auto cfg = config(kGrid, "lipschitz_demo", "power", 200, 20, 3);
    const auto traj = run(cfg, FieldState::zeros(kGrid));
    for (const auto& s : traj.snapshots)
        for (double v : s.values) ASSERT_EQ(v, 0.0);
}

TEST(Run, TraceLength) {
    for (auto [steps, every] : {std::pair{200, 20}, {10, 1}, {0, 5}, {7, 7}}) {
        const auto cfg = config(kGrid, "zero", "zero", steps, every);
        const auto traj = run(cfg, point_mass(kGrid, 0.0, 1.0));
        EXPECT_EQ(traj.mass.size(), static_cast<std::size_t>(steps / every + 1));
        EXPECT_EQ(traj.snapshots.size(), traj.mass.size());
        EXPECT_EQ(traj.snapshots.front().t, 0.0);
    }
}

TEST(Run, ClampKeepsFieldNonnegative) {
    const auto cfg = config(kGrid, "zero", "power", 200, 50, 9);
    const auto traj = run(cfg, point_mass(kGrid, 0.0, 1.0));
    for (const auto& s : traj.snapshots)
        for (double v : s.values) ASSERT_GE(v, 0.0);
    for (std::size_t i = 1; i < traj.clamped_mass.size(); ++i) EXPECT_GE(traj.clamped_mass[i], traj.clamped_mass[i - 1]);
}

TEST(InitialData, PointMassConvention) {
    const auto x = point_mass(kGrid, 0.3, 2.0);
    EXPECT_NEAR(x.mass(), 2.0, 1e-14);
    EXPECT_DOUBLE_EQ(x.at(0.3), 2.0 / kGrid.dx());
    EXPECT_NEAR(smooth_bump(kGrid, 1.0, 2.0, 5.0).mass(), 5.0, 1e-12);
}

TEST(Coupled, IdenticalInputsStayIdentical) {
    const auto cfg = config(kGrid, "zero", "power", 200, 20, 13);
    const auto x0 = smooth_bump(kGrid, 0.0, 2.0, 1.0);
    const auto c = coupled_run(cfg, x0, x0, {0.0, 0.5}, 16.0);
    for (double d : c.l1_distance) EXPECT_EQ(d, 0.0);
    for (std::size_t i = 0; i < c.x.snapshots.size(); ++i) EXPECT_EQ(c.x.snapshots[i].values, c.y.snapshots[i].values);
    for (const auto& row : c.mollified)
        for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(Coupled, GronwallBoundWithoutNoise) {
    auto cfg = config(kGrid, "linear:0.5", "zero", 2000, 100);
    const auto x0 = smooth_bump(kGrid, 0.0, 2.0, 1.0);
    auto y0 = x0;
    const auto bump = smooth_bump(kGrid, 0.5, 1.0, 1.0);
    for (std::size_t j = 0; j < y0.values.size(); ++j) y0.values[j] += 0.1 * bump.values[j];
    const auto c = coupled_run(cfg, x0, y0);
    const double d0 = c.l1_distance.front();
    for (std::size_t i = 0; i < c.l1_distance.size(); ++i) {
        const double t = c.x.snapshots[i].t;
        EXPECT_LE(c.l1_distance[i], 2.0 * std::exp(0.5 * t) * d0);
        EXPECT_GE(c.l1_distance[i], 0.5 * std::exp(0.5 * t) * d0);
    }
}

TEST(Coupled, SwappingInputsNegatesDifference) {
    const auto cfg = config(kGrid, "zero", "power", 100, 25, 21);
    const auto x0 = smooth_bump(kGrid, 0.0, 2.0, 1.0);
    const auto y0 = smooth_bump(kGrid, 0.2, 2.0, 1.2);
    const std::vector<double> probes = {-0.5, 0.0, 0.5};
    const auto a = coupled_run(cfg, x0, y0, probes, 16.0);
    const auto b = coupled_run(cfg, y0, x0, probes, 16.0);
    for (std::size_t i = 0; i < a.x.snapshots.size(); ++i) {
        EXPECT_EQ(a.x.snapshots[i].values, b.y.snapshots[i].values);
        EXPECT_EQ(a.y.snapshots[i].values, b.x.snapshots[i].values);
        for (std::size_t p = 0; p < probes.size(); ++p) EXPECT_EQ(a.mollified[i][p], -b.mollified[i][p]);
    }
    EXPECT_EQ(a.l1_distance, b.l1_distance);
}

TEST(SolverConfig, Validation) {
    auto cfg = config(kGrid, "zero", "zero");
    cfg.dt = -1.0;
    EXPECT_THROW(cfg.validate(kGrid), std::domain_error);
    cfg = config(kGrid, "zero", "zero");
    EXPECT_THROW(cfg.validate(Grid1D(10.0, 256)), std::invalid_argument);
    cfg.record_every = 0;
    EXPECT_THROW(cfg.validate(kGrid), std::domain_error);
}
