#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/statistics/univariate_statistics.hpp>

namespace spde::stats {

inline double mean(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("mean of empty sample");
    return boost::math::statistics::mean(x.begin(), x.end());
}

/// Standard error of the mean; needs at least two values.
inline double standard_error(std::span<const double> x) {
    if (x.size() < 2) throw std::invalid_argument("standard error needs >= 2 values");
    const auto [m, var] = boost::math::statistics::mean_and_sample_variance(x.begin(), x.end());
    (void)m;
    return std::sqrt(var / static_cast<double>(x.size()));
}

inline double median(std::vector<double> x) {
    if (x.empty()) throw std::invalid_argument("median of empty sample");
    return boost::math::statistics::median(x);
}

/// Linear interpolation between order statistics, q in [0, 1].
inline double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= x.size()) return x.back();
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * x[i] + w * x[i + 1];
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// Standard error of the slope; NaN with two points.
    double slope_stderr = std::numeric_limits<double>::quiet_NaN();
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const auto n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need >= 2 paired points");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissae are all equal");
    LineFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - out.intercept - out.slope * x[i];
            rss += r * r;
        }
        out.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return out;
}

/// Asymptotic 1% critical value of sqrt(n) D for the Kolmogorov distribution.
inline constexpr double kKsCritical1pct = 1.628;

/// sup |F_n - F| for a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    if (x.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// sup |F_n - G_m| for two samples.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// 1% critical value of D for the two-sample test.
inline double ks_two_sample_critical(std::size_t n, std::size_t m) {
    const double a = static_cast<double>(n), b = static_cast<double>(m);
    return kKsCritical1pct * std::sqrt((a + b) / (a * b));
}

/// Hill estimator of the right-tail index from the k largest values.
inline double hill_estimator(std::vector<double> x, std::size_t k) {
    if (k < 2 || k >= x.size()) throw std::invalid_argument("hill_estimator: need 2 <= k < n");
    std::nth_element(x.begin(), x.end() - static_cast<std::ptrdiff_t>(k + 1), x.end());
    std::sort(x.end() - static_cast<std::ptrdiff_t>(k + 1), x.end());
    const double threshold = x[x.size() - k - 1];
    if (!(threshold > 0.0)) throw std::domain_error("hill_estimator: tail threshold must be positive");
    double s = 0.0;
    for (std::size_t i = x.size() - k; i < x.size(); ++i) s += std::log(x[i] / threshold);
    return static_cast<double>(k) / s;
}

}  // namespace spde::stats
