#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "spde/rng.hpp"

namespace spde {

/// Drift G (Lipschitz) and noise coefficient H (beta-Holder, nondecreasing)
/// on [0, inf).
struct CoefficientPair {
    std::function<double(double)> drift;
    double drift_lipschitz = 0.0;
    std::function<double(double)> noise;
    double holder_exponent = 0.5;
    double holder_constant = 1.0;
    bool monotone = true;
    std::string name;
    /// Fast paths for the integrator.
    bool drift_is_zero = false;
    bool noise_is_zero = false;
};

inline void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0))
        throw std::domain_error("Holder exponent beta must lie in (0,1), got " + std::to_string(beta));
}

/// G = 0, H(x) = x^beta.
inline CoefficientPair builtin_stable_branching(double beta) {
    check_beta(beta);
    CoefficientPair c;
    c.drift = [](double) { return 0.0; };
    c.drift_lipschitz = 0.0;
    c.drift_is_zero = true;
    c.noise = [beta](double x) { return x > 0.0 ? std::pow(x, beta) : 0.0; };
    c.holder_exponent = beta;
    c.holder_constant = 1.0;
    c.monotone = true;
    c.name = "power:" + std::to_string(beta);
    return c;
}

/// Named coefficient choices accepted in configuration files.
///
///   drift: "zero" | "lipschitz_demo" (G(x) = -x) | "linear:c" (G(x) = c x)
///   noise: "zero" | "power" (beta = beta_hint) | "power:beta" | "one" | "lipschitz_demo" (H(x) = x/(1+x))
inline CoefficientPair coefficients_by_name(const std::string& drift, const std::string& noise,
                                            double beta_hint = 0.5) {
    CoefficientPair c;
    if (noise.rfind("power:", 0) == 0) {
        c = builtin_stable_branching(std::stod(noise.substr(6)));
    } else if (noise == "power") {
        c = builtin_stable_branching(beta_hint);
    } else if (noise == "zero") {
        c.noise = [](double) { return 0.0; };
        c.noise_is_zero = true;
        c.holder_exponent = beta_hint;
        c.holder_constant = 0.0;
    } else if (noise == "one") {
        c.noise = [](double) { return 1.0; };
        c.holder_exponent = beta_hint;
        c.holder_constant = 0.0;
    } else if (noise == "lipschitz_demo") {
        c.noise = [](double x) { return x > 0.0 ? x / (1.0 + x) : 0.0; };
        c.holder_exponent = beta_hint;
        // |H(x)-H(y)| <= min(|x-y|, 1) <= |x-y|^beta
        c.holder_constant = 1.0;
    } else {
        throw std::invalid_argument("unknown noise coefficient '" + noise + "'");
    }

    if (drift == "zero") {
        c.drift = [](double) { return 0.0; };
        c.drift_lipschitz = 0.0;
        c.drift_is_zero = true;
    } else if (drift == "lipschitz_demo") {
        c.drift = [](double x) { return -x; };
        c.drift_lipschitz = 1.0;
        c.drift_is_zero = false;
    } else if (drift.rfind("linear:", 0) == 0) {
        const double k = std::stod(drift.substr(7));
        c.drift = [k](double x) { return k * x; };
        c.drift_lipschitz = std::abs(k);
        c.drift_is_zero = k == 0.0;
    } else {
        throw std::invalid_argument("unknown drift '" + drift + "'");
    }
    c.monotone = true;
    c.name = drift + "/" + noise;
    return c;
}

struct CoefficientCheck {
    bool lipschitz_ok = true;
    bool holder_ok = true;
    bool monotone_ok = true;
    double worst_lipschitz_ratio = 0.0;
    double worst_holder_ratio = 0.0;

    bool ok() const { return lipschitz_ok && holder_ok && monotone_ok; }
};

/// Randomised check of (C1)-(C3) on pairs drawn from [0, upper].
inline CoefficientCheck validate_coefficients(const CoefficientPair& c, Rng& rng,
                                              int n_pairs = 100000, double upper = 100.0,
                                              double slack = 1e-12) {
    CoefficientCheck out;
    for (int i = 0; i < n_pairs; ++i) {
        // Half the pairs near zero, where Holder functions are steepest.
        double x = rng.uniform(0.0, upper);
        double y = rng.uniform(0.0, upper);
        if (i % 2 == 1) {
            x *= 1e-6 * rng.uniform();
            y *= 1e-6 * rng.uniform();
        }
        if (x == y) continue;
        if (x > y) std::swap(x, y);
        const double d = y - x;
        const double dg = std::abs(c.drift(x) - c.drift(y));
        const double dh = c.noise(y) - c.noise(x);
        const double lip = dg / d;
        const double hol = std::abs(dh) / std::pow(d, c.holder_exponent);
        out.worst_lipschitz_ratio = std::max(out.worst_lipschitz_ratio, lip);
        out.worst_holder_ratio = std::max(out.worst_holder_ratio, hol);
        if (lip > c.drift_lipschitz * (1.0 + slack) + slack) out.lipschitz_ok = false;
        if (hol > c.holder_constant * (1.0 + slack) + slack) out.holder_ok = false;
        if (c.monotone && dh < 0.0) out.monotone_ok = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameter gate for pathwise uniqueness

struct ParameterSet {
    double alpha = 1.5;
    double beta = 2.0 / 3.0;
    std::optional<double> q;
    std::optional<double> delta;

    double p() const { return alpha * beta; }

    void validate() const {
        if (!(alpha > 1.0 && alpha < 2.0))
            throw std::domain_error("alpha must lie in (1,2), got " + std::to_string(alpha));
        check_beta(beta);
        if (q && !(*q > 0.0)) throw std::domain_error("q must be positive");
    }

    /// p <= 1, or q is set and exceeds 3p/(3-alpha).
    bool integrability_ok() const { return p() <= 1.0 || (q && *q > 3.0 * p() / (3.0 - alpha)); }
};

struct HolderTargets {
    double eta_c;
    double eta_bar_c;
};

inline HolderTargets holder_exponent_targets(double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::domain_error("alpha must lie in (1,2), got " + std::to_string(alpha));
    return {2.0 / alpha - 1.0, std::min(3.0 / alpha - 1.0, 1.0)};
}

struct GateVerdict {
    bool admissible = false;
    /// Midpoint of the feasible delta interval when admissible.
    std::optional<double> delta;
    double delta_lo = 0.0;
    double delta_hi = 0.0;
    /// First violated condition when inadmissible.
    std::string reason;
    /// Feasibility of the two delta inequalities alone.
    bool delta_interval_feasible = false;
    /// p alpha^2 - 2p(p+3) alpha + 4p(p+1) > 0
    bool polynomial_form = false;
    /// The two forms above disagree.
    bool forms_disagree = false;
    bool side_condition = false;

    bool witness_valid(double d) const { return delta_interval_feasible && d > delta_lo && d < delta_hi; }
};

/// Width below which a feasible delta interval is treated as empty.
inline constexpr double kDeltaResolution = 1e-6;

/// Searches delta > 0 with 2 beta eta_c > 1 + 1/delta and
/// alpha beta/(alpha-1) > delta + 1, under p < 1 + alpha(alpha-1)/2 and, for
/// p > 1, the integrability exponent q > 3p/(3-alpha).
inline GateVerdict uniqueness_gate(const ParameterSet& ps) {
    ps.validate();
    GateVerdict v;
    const double a = ps.alpha;
    const double b = ps.beta;
    const double p = ps.p();
    const double eta_c = 2.0 / a - 1.0;

    // Each inequality bounds delta on one side.
    const double slope = 2.0 * b * eta_c - 1.0;
    v.delta_lo = slope > 0.0 ? 1.0 / slope : std::numeric_limits<double>::infinity();
    v.delta_hi = a * b / (a - 1.0) - 1.0;
    v.delta_interval_feasible = slope > 0.0 && v.delta_hi - v.delta_lo > kDeltaResolution;

    v.polynomial_form = p * a * a - 2.0 * p * (p + 3.0) * a + 4.0 * p * (p + 1.0) > 0.0;
    v.forms_disagree = v.polynomial_form != v.delta_interval_feasible;
    v.side_condition = p < 1.0 + a * (a - 1.0) / 2.0;

    if (!v.side_condition) {
        v.reason = "p < 1 + alpha(alpha-1)/2 violated";
        return v;
    }
    if (slope <= 0.0) {
        v.reason = "2 beta eta_c > 1 + 1/delta has no solution (2 beta eta_c <= 1)";
        return v;
    }
    if (!v.delta_interval_feasible) {
        v.reason = "no delta satisfies both 2 beta eta_c > 1 + 1/delta and alpha beta/(alpha-1) > delta + 1";
        return v;
    }
    if (p > 1.0) {
        if (!ps.q) {
            v.reason = "p > 1 requires an integrability exponent q";
            return v;
        }
        if (!(*ps.q > 3.0 * p / (3.0 - a))) {
            v.reason = "q > 3p/(3-alpha) violated";
            return v;
        }
    }
    v.admissible = true;
    v.delta = 0.5 * (v.delta_lo + v.delta_hi);
    return v;
}

/// Upper end of the p = 1 admissible range, 4 - 2 sqrt(2).
inline double unit_p_alpha_limit() { return 4.0 - 2.0 * std::sqrt(2.0); }

}  // namespace spde
