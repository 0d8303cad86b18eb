#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "faceaudit/distributions.hpp"
#include "faceaudit/error.hpp"

namespace faceaudit::stats {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double mean(std::span<const double> x) {
    if (x.empty()) throw InsufficientDataError("mean of an empty sequence");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample variance with n - 1 in the denominator.
inline double variance(std::span<const double> x) {
    if (x.size() < 2) throw InsufficientDataError("variance needs at least 2 values");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

inline double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

/// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

struct Correlation {
    double coefficient = kNaN;
    double p_value = kNaN;
    std::size_t n = 0;
};

/// Two-sided p for a correlation coefficient via t = r sqrt((n-2)/(1-r^2)), df = n-2.
inline double correlation_p_value(double r, std::size_t n) {
    if (n < 3) throw InsufficientDataError("correlation p-value needs n >= 3");
    if (std::fabs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    return dist::t_two_sided(r * std::sqrt(df / (1.0 - r * r)), df);
}

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("correlation inputs differ in length (" + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + ")");
    }
    if (x.size() < 3) throw InsufficientDataError("correlation needs at least 3 pairs");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("correlation is undefined for a constant input");
    const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    return {r, correlation_p_value(r, x.size()), x.size()};
}

/// Spearman's rho: Pearson correlation of average ranks.
inline Correlation spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("correlation inputs differ in length (" + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + ")");
    }
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    return pearson(rx, ry);
}

enum class CorrelationMethod { spearman, pearson };

inline std::string_view to_string(CorrelationMethod m) { return m == CorrelationMethod::spearman ? "spearman" : "pearson"; }

inline CorrelationMethod parse_correlation_method(std::string_view s) {
    if (s == "spearman") return CorrelationMethod::spearman;
    if (s == "pearson") return CorrelationMethod::pearson;
    throw ValidationError("unknown correlation method '" + std::string(s) + "'");
}

inline Correlation correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method) {
    return method == CorrelationMethod::spearman ? spearman(x, y) : pearson(x, y);
}

// ---------------------------------------------------------------------------
// Effect sizes and tests
// ---------------------------------------------------------------------------

enum class DMode { pooled, paired };

inline std::string_view to_string(DMode m) { return m == DMode::pooled ? "pooled" : "paired"; }

inline DMode parse_d_mode(std::string_view s) {
    if (s == "pooled") return DMode::pooled;
    if (s == "paired") return DMode::paired;
    throw ValidationError("unknown Cohen's d mode '" + std::string(s) + "'");
}

namespace detail {

inline std::vector<double> differences(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("paired samples differ in length (" + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + ")");
    }
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

inline bool all_zero(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

inline double pooled_sd(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw InsufficientDataError("pooled SD needs at least 2 values per group");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    return std::sqrt(((na - 1) * variance(a) + (nb - 1) * variance(b)) / (na + nb - 2));
}

} // namespace detail

/// Standardized mean difference of a over b.
///   pooled: (mean a - mean b) / pooled SD (n - 1 variances)
///   paired: mean(a - b) / sd(a - b)   (d_z)
/// Identical inputs give 0 in both modes, even though the paired SD is 0.
inline double cohens_d(std::span<const double> a, std::span<const double> b, DMode mode) {
    if (mode == DMode::paired) {
        auto d = detail::differences(a, b);
        if (d.size() < 2) throw InsufficientDataError("paired Cohen's d needs at least 2 pairs");
        if (detail::all_zero(d)) return 0.0;
        const double sd = stddev(d);
        if (sd == 0.0) throw DegenerateVarianceError("Cohen's d: differences have zero variance");
        return mean(d) / sd;
    }
    const double sd = detail::pooled_sd(a, b);
    const double delta = mean(a) - mean(b);
    if (sd == 0.0) {
        if (delta == 0.0) return 0.0;
        throw DegenerateVarianceError("Cohen's d: pooled SD is zero");
    }
    return delta / sd;
}

enum class TestKind { paired_t, unpaired_t, anova_f, spearman_t };

inline std::string_view to_string(TestKind k) {
    switch (k) {
    case TestKind::paired_t: return "paired_t";
    case TestKind::unpaired_t: return "unpaired_t";
    case TestKind::anova_f: return "anova_f";
    case TestKind::spearman_t: return "spearman_t";
    }
    return "unknown";
}

struct TestResult {
    double statistic = kNaN;
    double df = kNaN;
    double df2 = kNaN;  // denominator df for F tests; NaN otherwise
    double p_value = kNaN;
    std::optional<double> effect_size;
    TestKind kind = TestKind::paired_t;
};

/// Paired-samples t-test on a - b, two-sided. All-zero differences give t = 0, p = 1.
inline TestResult paired_t(std::span<const double> a, std::span<const double> b) {
    auto d = detail::differences(a, b);
    if (d.size() < 2) throw InsufficientDataError("paired t-test needs at least 2 pairs");
    const double df = static_cast<double>(d.size() - 1);
    if (detail::all_zero(d)) return {0.0, df, kNaN, 1.0, 0.0, TestKind::paired_t};
    const double sd = stddev(d);
    if (sd == 0.0) throw DegenerateVarianceError("paired t-test: differences have zero variance");
    const double m = mean(d);
    const double t = m / (sd / std::sqrt(static_cast<double>(d.size())));
    return {t, df, kNaN, dist::t_two_sided(t, df), m / sd, TestKind::paired_t};
}

/// Two-sample Student t-test assuming equal variances, two-sided.
inline TestResult unpaired_t(std::span<const double> a, std::span<const double> b) {
    const double sd = detail::pooled_sd(a, b);
    const double delta = mean(a) - mean(b);
    const double df = static_cast<double>(a.size() + b.size() - 2);
    if (sd == 0.0) {
        if (delta == 0.0) return {0.0, df, kNaN, 1.0, 0.0, TestKind::unpaired_t};
        throw DegenerateVarianceError("unpaired t-test: pooled SD is zero");
    }
    const double se = sd * std::sqrt(1.0 / static_cast<double>(a.size()) + 1.0 / static_cast<double>(b.size()));
    const double t = delta / se;
    return {t, df, kNaN, dist::t_two_sided(t, df), delta / sd, TestKind::unpaired_t};
}

/// One-way ANOVA, F = MS_between / MS_within with df (k - 1, N - k).
inline TestResult one_way_anova(std::span<const std::vector<double>> groups) {
    if (groups.size() < 2) throw InsufficientDataError("ANOVA needs at least 2 groups");
    std::size_t total = 0;
    double grand = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw InsufficientDataError("ANOVA needs at least 2 values per group");
        total += g.size();
        grand += std::accumulate(g.begin(), g.end(), 0.0);
    }
    grand /= static_cast<double>(total);

    double ss_between = 0.0, ss_within = 0.0;
    for (const auto& g : groups) {
        const double m = mean(g);
        ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double v : g) ss_within += (v - m) * (v - m);
    }
    if (ss_within == 0.0) throw DegenerateVarianceError("ANOVA: zero within-group variance");
    const double df1 = static_cast<double>(groups.size() - 1);
    const double df2 = static_cast<double>(total - groups.size());
    const double f = (ss_between / df1) / (ss_within / df2);
    // eta squared
    const double eta2 = ss_between / (ss_between + ss_within);
    return {f, df1, df2, dist::f_sf(f, df1, df2), eta2, TestKind::anova_f};
}

inline double bonferroni(double p, std::size_t m) {
    if (m == 0) throw DomainError("Bonferroni correction needs m >= 1");
    return std::min(1.0, p * static_cast<double>(m));
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

struct RegressionFit {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> t_values;
    std::vector<double> p_values;
    double r2 = kNaN;
    double adj_r2 = kNaN;
    double f_statistic = kNaN;
    double f_p_value = kNaN;
    std::size_t n = 0;
    std::size_t df_model = 0;
    std::size_t df_resid = 0;
};

/// Ordinary least squares via column-pivoted Householder QR. `X` must contain
/// an intercept (constant, non-zero) column; df_model excludes it.
inline RegressionFit ols(const Eigen::MatrixXd& X, std::span<const double> y, std::vector<std::string> names = {}) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (y.size() != n) throw DimensionError("OLS: response length does not match design rows");
    if (p == 0) throw SingularDesignError("OLS: empty design matrix");
    if (n <= p) throw SingularDesignError("OLS: need more observations than columns (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
    if (!X.allFinite()) throw ValidationError("OLS: design matrix has non-finite entries");
    if (names.empty()) {
        for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
    }
    if (names.size() != p) throw DimensionError("OLS: names do not match design columns");

    bool has_intercept = false;
    for (Eigen::Index j = 0; j < X.cols() && !has_intercept; ++j) {
        has_intercept = X(0, j) != 0.0 && (X.col(j).array() == X(0, j)).all();
    }
    if (!has_intercept) throw ValidationError("OLS: design matrix needs an intercept column");

    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(p)) {
        throw SingularDesignError("OLS: design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
    }
    Eigen::VectorXd beta = qr.solve(yv);
    Eigen::VectorXd resid = yv - X * beta;

    // (X'X)^-1 = P R^-1 R^-T P^T
    const Eigen::Index pi = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd R = qr.matrixR().topLeftCorner(pi, pi).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(pi, pi));
    Eigen::MatrixXd cov_unscaled = qr.colsPermutation() * (Rinv * Rinv.transpose()) * qr.colsPermutation().transpose();

    RegressionFit fit;
    fit.names = std::move(names);
    fit.n = n;
    fit.df_model = p - 1;
    fit.df_resid = n - p;
    const double df_resid = static_cast<double>(fit.df_resid);
    const double ssr = resid.squaredNorm();
    const double sigma2 = ssr / df_resid;
    const double ybar = yv.mean();
    const double sst = (yv.array() - ybar).square().sum();
    if (sst == 0.0) throw DegenerateVarianceError("OLS: response is constant");

    for (std::size_t j = 0; j < p; ++j) {
        const double b = beta(static_cast<Eigen::Index>(j));
        const double se = std::sqrt(std::max(0.0, sigma2 * cov_unscaled(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
        double t, pv;
        if (se == 0.0) {
            t = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
            pv = b == 0.0 ? 1.0 : 0.0;
        } else {
            t = b / se;
            pv = dist::t_two_sided(t, df_resid);
        }
        fit.coefficients.push_back(b);
        fit.std_errors.push_back(se);
        fit.t_values.push_back(t);
        fit.p_values.push_back(pv);
    }

    fit.r2 = 1.0 - ssr / sst;
    fit.adj_r2 = 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) / df_resid;
    if (fit.df_model > 0) {
        const double df_model = static_cast<double>(fit.df_model);
        if (ssr == 0.0) {
            fit.f_statistic = std::numeric_limits<double>::infinity();
            fit.f_p_value = 0.0;
        } else {
            fit.f_statistic = ((sst - ssr) / df_model) / sigma2;
            fit.f_p_value = dist::f_sf(fit.f_statistic, df_model, df_resid);
        }
    }
    return fit;
}

/// Column-stacks predictors and appends a trailing constant column.
inline Eigen::MatrixXd design_with_intercept(const std::vector<std::vector<double>>& predictors, std::size_t n) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(predictors.size() + 1));
    for (std::size_t j = 0; j < predictors.size(); ++j) {
        if (predictors[j].size() != n) throw DimensionError("predictor " + std::to_string(j) + " has wrong length");
        for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = predictors[j][i];
    }
    X.col(static_cast<Eigen::Index>(predictors.size())).setOnes();
    return X;
}

/// Divides by the column maximum when any value lies outside (0, 1); columns
/// already inside (0, 1) are returned unchanged.
inline std::vector<double> normalize_by_max(std::span<const double> column) {
    if (column.empty()) throw InsufficientDataError("normalize_by_max of an empty column");
    std::vector<double> out(column.begin(), column.end());
    const bool inside = std::all_of(out.begin(), out.end(), [](double v) { return v > 0.0 && v < 1.0; });
    if (inside) return out;
    const double mx = *std::max_element(out.begin(), out.end());
    if (!(mx > 0.0) || !std::isfinite(mx)) throw NormalizationError("normalize_by_max: column maximum must be positive, got " + format_real(mx));
    for (double& v : out) v /= mx;
    return out;
}

} // namespace faceaudit::stats
