#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "faceaudit/error.hpp"
#include "faceaudit/util.hpp"

namespace faceaudit::dist {

namespace detail {

// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
// Converges quickly for x < (a + 1) / (a + b + 2).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 20000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) return h;
    }
    throw DomainError("incomplete beta continued fraction did not converge (a=" + format_real(a) +
                      ", b=" + format_real(b) + ", x=" + format_real(x) + ")");
}

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

} // namespace detail

/// Regularized incomplete beta I_x(a, b). `one_minus_x` must equal 1 - x; it is
/// taken separately so callers can supply it without cancellation.
inline double incomplete_beta(double a, double b, double x, double one_minus_x) {
    if (!(a > 0) || !(b > 0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("incomplete_beta requires a, b > 0");
    }
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (one_minus_x == 0.0) return 1.0;

    const double log_front = a * std::log(x) + b * std::log(one_minus_x) - detail::log_beta(a, b);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::clamp(front * detail::beta_continued_fraction(a, b, x) / a, 0.0, 1.0);
    }
    return std::clamp(1.0 - front * detail::beta_continued_fraction(b, a, one_minus_x) / b, 0.0, 1.0);
}

inline double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

inline void check_df(double df, const char* name) {
    if (!(df > 0) || std::isnan(df)) throw DomainError(std::string(name) + " must be > 0, got " + format_real(df));
}

/// Two-tailed tail mass P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double t_two_sided(double t, double df) {
    check_df(df, "df");
    if (std::isnan(t)) throw DomainError("t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    if (std::isinf(df)) return std::erfc(std::fabs(t) / std::sqrt(2.0));
    const double t2 = t * t;
    const double denom = df + t2;
    return incomplete_beta(df / 2.0, 0.5, df / denom, t2 / denom);
}

/// Student's t cumulative distribution function.
inline double t_cdf(double x, double df) {
    check_df(df, "df");
    if (std::isnan(x)) throw DomainError("t_cdf argument is NaN");
    if (x == 0.0) return 0.5;
    const double tail = 0.5 * t_two_sided(x, df);
    return x > 0 ? 1.0 - tail : tail;
}

/// Upper tail P(F >= x) of the F(d1, d2) distribution.
inline double f_sf(double x, double d1, double d2) {
    check_df(d1, "d1");
    check_df(d2, "d2");
    if (std::isnan(x)) throw DomainError("f_sf argument is NaN");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    const double denom = d1 * x + d2;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / denom, d1 * x / denom);
}

/// F(d1, d2) cumulative distribution function.
inline double f_cdf(double x, double d1, double d2) {
    check_df(d1, "d1");
    check_df(d2, "d2");
    if (std::isnan(x)) throw DomainError("f_cdf argument is NaN");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    const double denom = d1 * x + d2;
    return incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / denom, d2 / denom);
}

} // namespace faceaudit::dist
