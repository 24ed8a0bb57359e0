#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "spde/acceptance.hpp"
#include "spde/noise.hpp"
#include "spde/stats.hpp"

using namespace spde;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

double big_c0(double alpha) {
    const big a(alpha);
    return static_cast<double>(a * (a - 1) / boost::multiprecision::tgamma(big(2) - a));
}

NoiseModel model(double alpha, double epsilon, std::uint64_t seed = 1) {
    NoiseModel m;
    m.alpha = alpha;
    m.epsilon = epsilon;
    m.seed = seed;
    return m;
}

/// int_eps^inf z^k c0 z^{-1-alpha} dz by exp-sinh quadrature.
double levy_moment_above(double alpha, double eps, int k) {
    boost::math::quadrature::exp_sinh<double> es;
    const double c0 = big_c0(alpha);
    return es.integrate([&](double w) { return c0 * std::pow(eps + w, k - 1.0 - alpha); }, 0.0,
                        std::numeric_limits<double>::infinity());
}

}  // namespace

TEST(LevyConstant, MatchesHighPrecisionGamma) {
    for (double a : {1.05, 1.2, 1.5, 1.7, 1.9, 1.99}) EXPECT_NEAR(levy_constant(a), big_c0(a), 1e-13 * big_c0(a)) << a;
    EXPECT_NEAR(levy_constant(1.5), 0.423142, 5e-7);
    const double pi = boost::math::constants::pi<double>();
    EXPECT_NEAR(levy_constant(1.5), 0.75 / std::sqrt(pi), 1e-15);
}

TEST(LevyConstant, VanishesAsAlphaTendsToOne) {
    EXPECT_LT(levy_constant(1.0 + 1e-6), 1e-5);
    EXPECT_LT(levy_constant(1.0 + 1e-3), levy_constant(1.01));
}

TEST(LevyConstant, RejectsAlphaOutsideRange) {
    EXPECT_THROW(levy_constant(1.0), std::domain_error);
    EXPECT_THROW(levy_constant(2.0), std::domain_error);
}

TEST(LargeJumpRate, MatchesQuadrature) {
    const auto m = model(1.5, 0.1);
    const double oracle = 1.0 * 2.0 * levy_moment_above(1.5, 0.1, 0);
    EXPECT_NEAR(large_jump_rate(m, 1.0, 2.0), oracle, 1e-10 * oracle);
    EXPECT_NEAR(large_jump_rate(m, 1.0, 2.0), 2.0 * levy_constant(1.5) * std::pow(10.0, 1.5) / 1.5, 1e-12);
}

TEST(LargeJumpRate, LinearInRegionAndDecreasingInEpsilon) {
    const auto m = model(1.3, 0.05);
    EXPECT_DOUBLE_EQ(large_jump_rate(m, 0.5, 4.0), 2.0 * large_jump_rate(m, 0.5, 2.0));
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-3, 1e-2, 1e-1, 1.0, 1e3, 1e9}) {
        const double r = large_jump_rate(model(1.3, eps), 1.0, 1.0);
        EXPECT_LT(r, prev);
        prev = r;
    }
    EXPECT_LT(prev, 1e-10);
    const double ratio = large_jump_rate(model(1.3, 1e-3), 1, 1) / large_jump_rate(model(1.3, 2e-3), 1, 1);
    EXPECT_NEAR(ratio, std::pow(2.0, 1.3), 1e-12);
}

TEST(SmallJumpCompensation, MatchesQuadrature) {
    const auto m = model(1.5, 0.01);
    EXPECT_NEAR(small_jump_compensation(m), -levy_moment_above(1.5, 0.01, 1), 1e-9);
    EXPECT_NEAR(small_jump_compensation(m), -levy_constant(1.5) * std::pow(0.01, -0.5) / 0.5, 1e-12);
    for (double a : {1.01, 1.3, 1.6, 1.99})
        for (double e : {1e-4, 1e-2, 1.0}) EXPECT_LT(small_jump_compensation(model(a, e)), 0.0);
}

TEST(SmallJumpVariance, MatchesQuadrature) {
    boost::math::quadrature::tanh_sinh<double> ts;
    for (double a : {1.2, 1.5, 1.8}) {
        const double eps = 0.02;
        const double c0 = big_c0(a);
        const double oracle = ts.integrate([&](double z) { return c0 * std::pow(z, 1.0 - a); }, 0.0, eps);
        EXPECT_NEAR(small_jump_variance(model(a, eps)), oracle, 1e-9 * oracle) << a;
    }
}

TEST(LargeJumps, CountsMatchRate) {
    auto m = model(1.5, 0.1, 11);
    Rng rng(m.seed);
    const int windows = 10000;
    std::vector<double> counts;
    for (int w = 0; w < windows; ++w)
        counts.push_back(static_cast<double>(sample_large_jumps(m, 0.05 * w, 0.05 * (w + 1), rng).events.size()));
    const double rate = large_jump_rate(m, 0.05, m.domain_length());
    EXPECT_NEAR(stats::mean(counts), rate, 3.0 * stats::standard_error(counts));
}

TEST(LargeJumps, SizesFollowPareto) {
    auto m = model(1.5, 0.01, 12);
    Rng rng(m.seed);
    std::vector<double> z;
    double t = 0.0;
    while (z.size() < 100000) {
        for (const auto& e : sample_large_jumps(m, t, t + 1.0, rng).events) z.push_back(e.z);
        t += 1.0;
    }
    z.resize(100000);
    const double d = stats::ks_statistic(z, [](double x) { return x <= 0.01 ? 0.0 : 1.0 - std::pow(0.01 / x, 1.5); });
    EXPECT_LT(std::sqrt(100000.0) * d, stats::kKsCritical1pct);
}

TEST(LargeJumps, StreamIsDeterministicAndOrdered) {
    const auto m = model(1.4, 0.05, 99);
    const auto a = sample_large_jumps(m, 0.0, 0.3);
    const auto b = sample_large_jumps(m, 0.0, 0.3);
    EXPECT_EQ(a, b);
    EXPECT_EQ(encode_jump_stream(a), encode_jump_stream(b));
    for (std::size_t i = 1; i < a.events.size(); ++i) {
        const auto& p = a.events[i - 1];
        const auto& q = a.events[i];
        EXPECT_LE(std::tie(p.s, p.u, p.z), std::tie(q.s, q.u, q.z));
    }
    for (const auto& e : a.events) {
        EXPECT_GE(e.s, 0.0);
        EXPECT_LT(e.s, 0.3);
        EXPECT_GT(e.z, 0.05);
    }
    EXPECT_NE(sample_large_jumps(model(1.4, 0.05, 100), 0.0, 0.3), a);
}

TEST(StableSampler, CharacteristicFunctionMatchesQuadrature) {
    for (double a : {1.2, 1.5, 1.8}) {
        const auto unit = acceptance::levy_khintchine_unit_integral(a);
        for (double u : {-3.0, -1.0, -0.25, 0.5, 2.0, 5.0}) {
            const auto closed = stable_cf(a, 0.7, u);
            const auto quad = acceptance::quadrature_cf(a, 0.7, u, unit);
            EXPECT_NEAR(std::abs(closed - quad), 0.0, 1e-6) << a << " " << u;
        }
    }
}

TEST(StableSampler, EmpiricalCharacteristicFunction) {
    const double a = 1.5, area = 1.0;
    const int n = 200000;
    Rng rng(5);
    std::vector<double> x(n);
    for (auto& v : x) v = sample_stable(a, area, rng);
    for (double u : {-2.0, -0.5, 0.5, 1.0, 2.0}) {
        std::complex<double> ecf = 0.0;
        for (double v : x) ecf += std::exp(std::complex<double>(0.0, u * v));
        ecf /= static_cast<double>(n);
        EXPECT_LT(std::abs(ecf - stable_cf(a, area, u)), 0.01) << u;
    }
}

TEST(StableSampler, LightLeftTail) {
    const double a = 1.5;
    Rng rng(6);
    double lo = 0.0;
    for (int i = 0; i < 1000000; ++i) lo = std::min(lo, sample_standard_skewed_stable(a, rng));
    EXPECT_TRUE(std::isfinite(lo));
    // P(S < -x) decays like exp(-c x^{alpha/(alpha-1)}); -6 is far beyond reach at n = 1e6.
    EXPECT_GT(lo, -6.0);
}

TEST(StableSampler, SampleMeanScalesAsStableLaw) {
    // The mean of n draws is stable with scale sigma n^{1/alpha - 1}, so the
    // zero-mean check is made on that scale rather than sigma / sqrt(n).
    const double a = 1.5, area = 2.5e-4 * 20.0 / 512;
    const double sigma = stable_scale(a, area);
    const int n = 1000000;
    Rng rng(8);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += sample_stable(a, area, rng);
    const double normalised = (s / n) / (sigma * std::pow(n, 1.0 / a - 1.0));
    EXPECT_LT(std::abs(normalised), 50.0);
}

TEST(NoiseModes, ExactAndCompensatedJumpsAgreeInLaw) {
    const Grid1D grid(10.0, 64);
    NoiseModel base = noise_for(model(1.5, 1e-3), grid, 2.5e-4);
    auto exact = base;
    exact.seed = 21;
    auto jumps = base;
    jumps.mode = NoiseMode::jump_decomposition;
    jumps.seed = 22;
    NoiseSource se(exact, grid), sj(jumps, grid);
    const int n = 100000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        const double t = i * base.dt;
        double x = 0.0, y = 0.0;
        for (double d : se.increments(t).dL) x += d;
        for (double d : sj.increments(t).dL) y += d;
        a[static_cast<std::size_t>(i)] = x;
        b[static_cast<std::size_t>(i)] = y;
    }
    EXPECT_LT(stats::ks_two_sample(a, b), stats::ks_two_sample_critical(n, n));
}

TEST(Thinning, UnitCoefficientIsIdentityOnAtoms) {
    const Grid1D grid(10.0, 64);
    const auto field = FieldState(grid, 0.0, std::vector<double>(64, 3.0));
    const auto stream = sample_large_jumps(model(1.5, 0.05, 4), 0.0, 0.2);
    Rng rng(1);
    const auto marked = thinning_transform(stream, field, [](double) { return 1.0; }, 1.5, rng);
    ASSERT_EQ(marked.events.size(), stream.events.size());
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        EXPECT_EQ(marked.events[i].s, stream.events[i].s);
        EXPECT_EQ(marked.events[i].z, stream.events[i].z);
        EXPECT_EQ(marked.events[i].u, stream.events[i].u);
        ASSERT_TRUE(marked.events[i].v);
        EXPECT_GT(*marked.events[i].v, 0.0);
        EXPECT_LT(*marked.events[i].v, 1.0);
    }
}

TEST(Thinning, FunctionalIdentityHoldsExactly) {
    const Grid1D grid(10.0, 128);
    Rng fr(2);
    std::vector<double> vals(128);
    for (auto& v : vals) v = fr.uniform() < 0.25 ? 0.0 : 5.0 * fr.uniform();
    const FieldState field(grid, 0.0, vals);
    const auto h = [](double x) { return x > 0.0 ? std::pow(x, 2.0 / 3.0) : 0.0; };
    const auto f = [](double u) { return std::cos(u) + 2.0; };
    const auto stream = sample_large_jumps(model(1.5, 0.05, 5), 0.0, 0.5);
    Rng rng(3);
    const auto marked = thinning_transform(stream, field, h, 1.5, rng);
    // Direct summation over the finite atom list.
    double direct = 0.0;
    for (const auto& e : stream.events) direct += e.z * h(field.at(e.u)) * f(e.u);
    EXPECT_DOUBLE_EQ(noise_functional(stream, field, h, f), direct);
    EXPECT_NEAR(marked_noise_functional(marked, field, h, f, 1.5), direct, 4e-15 * std::abs(direct) + 1e-300);

    const auto back = inverse_thinning(marked, field, h, 1.5);
    ASSERT_EQ(back.events.size(), stream.events.size());
    for (std::size_t i = 0; i < back.events.size(); ++i) {
        EXPECT_EQ(back.events[i].s, stream.events[i].s);
        EXPECT_EQ(back.events[i].u, stream.events[i].u);
        EXPECT_NEAR(back.events[i].z, stream.events[i].z, 4e-16 * stream.events[i].z);
    }
}

TEST(Thinning, ZeroCoefficientContributesNothing) {
    const Grid1D grid(10.0, 64);
    const auto field = FieldState::zeros(grid);
    const auto h = [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; };
    const auto f = [](double) { return 1.0; };
    const auto stream = sample_large_jumps(model(1.5, 0.05, 6), 0.0, 0.2);
    ASSERT_FALSE(stream.events.empty());
    Rng rng(4);
    const auto marked = thinning_transform(stream, field, h, 1.5, rng);
    EXPECT_EQ(noise_functional(stream, field, h, f), 0.0);
    EXPECT_EQ(marked_noise_functional(marked, field, h, f, 1.5), 0.0);
}

TEST(JumpDump, RoundTripsThroughFile) {
    auto stream = sample_large_jumps(model(1.5, 0.05, 7), 0.0, 0.2);
    Rng rng(9);
    const FieldState field(Grid1D(10.0, 64), 0.0, std::vector<double>(64, 2.0));
    const auto marked = thinning_transform(stream, field, [](double x) { return x; }, 1.5, rng);

    const auto bytes = encode_jump_stream(stream);
    ASSERT_EQ(bytes.size(), 16 + 32 * stream.events.size());
    EXPECT_EQ(bytes.substr(0, 8), "SPDEJMP1");
    const auto back = decode_jump_stream(bytes);
    ASSERT_EQ(back.events.size(), stream.events.size());
    for (std::size_t i = 0; i < back.events.size(); ++i) {
        EXPECT_EQ(back.events[i].s, stream.events[i].s);
        EXPECT_EQ(back.events[i].z, stream.events[i].z);
        EXPECT_EQ(back.events[i].u, stream.events[i].u);
        EXPECT_FALSE(back.events[i].v);
    }

    const auto path = std::filesystem::temp_directory_path() / "spde_jump_roundtrip.bin";
    write_jump_stream(path.string(), marked);
    const auto read = read_jump_stream(path.string());
    std::filesystem::remove(path);
    ASSERT_EQ(read.events.size(), marked.events.size());
    for (std::size_t i = 0; i < read.events.size(); ++i) {
        ASSERT_TRUE(read.events[i].v);
        EXPECT_EQ(*read.events[i].v, *marked.events[i].v);
        EXPECT_EQ(read.events[i].z, marked.events[i].z);
    }
    EXPECT_THROW(decode_jump_stream("SPDEJMP0xxxxxxxx"), std::exception);
}
