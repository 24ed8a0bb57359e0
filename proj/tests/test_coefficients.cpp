#include <gtest/gtest.h>

#include <cmath>

#include "spde/coefficients.hpp"

using namespace spde;

TEST(Coefficients, PowerNoiseValues) {
    const auto c = builtin_stable_branching(2.0 / 3.0);
    EXPECT_EQ(c.noise(0.0), 0.0);
    EXPECT_EQ(c.noise(1.0), 1.0);
    EXPECT_NEAR(c.noise(8.0), 4.0, 1e-14);
    EXPECT_EQ(c.drift(3.0), 0.0);
    EXPECT_TRUE(c.drift_is_zero);
}

TEST(Coefficients, HolderBoundHoldsOnRandomPairs) {
    for (double beta : {0.3, 2.0 / 3.0, 0.9}) {
        Rng rng(17);
        const auto chk = validate_coefficients(builtin_stable_branching(beta), rng, 100000);
        EXPECT_TRUE(chk.ok()) << beta;
        EXPECT_LE(chk.worst_holder_ratio, 1.0 + 1e-12);
    }
}

TEST(Coefficients, DetectsBrokenHolderConstant) {
    auto c = builtin_stable_branching(0.5);
    c.holder_exponent = 0.9;
    Rng rng(1);
    EXPECT_FALSE(validate_coefficients(c, rng, 10000).holder_ok);
}

TEST(Coefficients, NamedChoices) {
    const auto demo = coefficients_by_name("lipschitz_demo", "lipschitz_demo", 0.5);
    Rng rng(2);
    EXPECT_TRUE(validate_coefficients(demo, rng, 20000).ok());
    EXPECT_EQ(demo.drift(2.0), -2.0);
    EXPECT_TRUE(coefficients_by_name("zero", "zero").noise_is_zero);
    EXPECT_THROW(coefficients_by_name("zero", "cubic"), std::invalid_argument);
    EXPECT_THROW(coefficients_by_name("quadratic", "zero"), std::invalid_argument);
    EXPECT_THROW(builtin_stable_branching(1.0), std::domain_error);
}

TEST(HolderTargets, Values) {
    EXPECT_NEAR(holder_exponent_targets(1.2).eta_c, 2.0 / 1.2 - 1.0, 1e-15);
    EXPECT_NEAR(holder_exponent_targets(1.2).eta_c, 0.6667, 1e-4);
    EXPECT_NEAR(holder_exponent_targets(1.5).eta_c, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(holder_exponent_targets(1.5).eta_bar_c, 1.0);
    EXPECT_LT(holder_exponent_targets(2.0 - 1e-9).eta_c, 1e-8);
    EXPECT_THROW(holder_exponent_targets(2.0), std::domain_error);
}

namespace {

ParameterSet unit_p(double alpha) {
    ParameterSet ps;
    ps.alpha = alpha;
    ps.beta = 1.0 / alpha;
    return ps;
}

/// Independent oracle: scan delta on a fine grid for a value satisfying
/// both inequalities.
bool scan_for_delta(double alpha, double beta) {
    const double eta_c = 2.0 / alpha - 1.0;
    for (int i = 1; i < 200000; ++i) {
        const double d = i * 1e-4;
        if (2.0 * beta * eta_c > 1.0 + 1.0 / d && alpha * beta / (alpha - 1.0) > d + 1.0) return true;
    }
    return false;
}

}  // namespace

TEST(UniquenessGate, AdmissibleBelowLimit) {
    const auto v = uniqueness_gate(unit_p(1.15));
    EXPECT_TRUE(v.admissible);
    ASSERT_TRUE(v.delta);
    EXPECT_TRUE(v.witness_valid(*v.delta));
    const double a = 1.15, b = 1.0 / 1.15, eta_c = 2.0 / a - 1.0;
    EXPECT_GT(2.0 * b * eta_c, 1.0 + 1.0 / *v.delta);
    EXPECT_GT(a * b / (a - 1.0), *v.delta + 1.0);
    EXPECT_TRUE(scan_for_delta(a, b));
}

TEST(UniquenessGate, InadmissibleAboveLimit) {
    const auto v = uniqueness_gate(unit_p(1.25));
    EXPECT_FALSE(v.admissible);
    EXPECT_FALSE(v.delta);
    EXPECT_FALSE(v.reason.empty());
    EXPECT_FALSE(scan_for_delta(1.25, 1.0 / 1.25));
}

TEST(UniquenessGate, DeltaThreeWitnessAtAlphaOnePointOne) {
    const auto v = uniqueness_gate(unit_p(1.1));
    ASSERT_TRUE(v.admissible);
    EXPECT_TRUE(v.witness_valid(3.0));
    const double a = 1.1, b = 1.0 / 1.1, eta_c = 2.0 / a - 1.0;
    EXPECT_NEAR(2.0 * b * eta_c, 1.487, 1e-3);
    EXPECT_NEAR(a * b / (a - 1.0), 10.0, 1e-12);
}

TEST(UniquenessGate, SweepAgreesWithClosedForm) {
    const double limit = unit_p_alpha_limit();
    EXPECT_NEAR(limit, 1.1715728752538097, 1e-15);
    for (int i = 1; i <= 30; ++i) {
        const double a = 1.0 + 0.01 * i;
        const auto v = uniqueness_gate(unit_p(a));
        EXPECT_EQ(v.admissible, a < limit) << a;
        EXPECT_EQ(v.admissible, scan_for_delta(a, 1.0 / a)) << a;
        EXPECT_FALSE(v.forms_disagree) << a;
    }
}

TEST(UniquenessGate, LargePRequiresIntegrabilityExponent) {
    ParameterSet ps;
    ps.alpha = 1.1;
    ps.beta = 0.95;
    ASSERT_GT(ps.p(), 1.0);
    const auto without = uniqueness_gate(ps);
    ASSERT_TRUE(without.delta_interval_feasible);
    ASSERT_TRUE(without.side_condition);
    EXPECT_FALSE(without.admissible);
    ps.q = 3.0 * ps.p() / (3.0 - ps.alpha) + 0.1;
    EXPECT_TRUE(uniqueness_gate(ps).admissible);
    ps.q = 3.0 * ps.p() / (3.0 - ps.alpha) - 0.1;
    EXPECT_FALSE(uniqueness_gate(ps).admissible);
}

TEST(UniquenessGate, RejectsInvalidParameters) {
    ParameterSet ps;
    ps.alpha = 2.5;
    EXPECT_THROW(uniqueness_gate(ps), std::domain_error);
    ps.alpha = 1.5;
    ps.beta = 0.0;
    EXPECT_THROW(uniqueness_gate(ps), std::domain_error);
}
