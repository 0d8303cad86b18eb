#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "faceaudit/distributions.hpp"
#include "faceaudit/stats.hpp"
#include "oracles.hpp"

using namespace faceaudit;
using stats::DMode;

namespace {

Eigen::MatrixXd to_eigen(const oracle::Matrix& X) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X.front().size()));
    for (std::size_t i = 0; i < X.size(); ++i)
        for (std::size_t j = 0; j < X[i].size(); ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
    return M;
}

// Random design with intercept column last and well-separated singular values.
oracle::Matrix random_design(std::mt19937_64& rng, std::size_t n, std::size_t p) {
    std::normal_distribution<double> d(0, 1);
    oracle::Matrix X(n, std::vector<double>(p, 1.0));
    for (auto& row : X)
        for (std::size_t j = 0; j + 1 < p; ++j) row[j] = d(rng) * static_cast<double>(j + 1);
    return X;
}

} // namespace

TEST(Spearman, ExhaustivePermutationsMatchRankFormula) {
    double worst = 0.0;
    for (std::size_t n = 3; n <= 6; ++n) {
        std::vector<double> x(n);
        std::iota(x.begin(), x.end(), 1.0);
        std::vector<double> y = x;
        do {
            const double r = stats::spearman(x, y).coefficient;
            worst = std::max(worst, std::fabs(r - oracle::spearman_rank_formula(x, y)));
        } while (std::next_permutation(y.begin(), y.end()));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Spearman, HandValues) {
    EXPECT_EQ(stats::spearman(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{1, 3, 2, 5, 4}).coefficient, 0.8);
    EXPECT_DOUBLE_EQ(stats::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}).coefficient, 1.0);
    EXPECT_DOUBLE_EQ(stats::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}).coefficient, -1.0);
}

TEST(Spearman, TiesUseAverageRanks) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> small(0, 4);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> x(12), y(12);
        for (auto& v : x) v = small(rng);
        for (auto& v : y) v = small(rng);
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
        if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) continue;
        ASSERT_NEAR(stats::spearman(x, y).coefficient, oracle::spearman_with_ties(x, y), 1e-12);
    }
    EXPECT_EQ(stats::average_ranks(std::vector<double>{5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Spearman, SymmetricAndMonotoneInvariant) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        auto x = oracle::normals(rng, 15), y = oracle::normals(rng, 15);
        const double r = stats::spearman(x, y).coefficient;
        ASSERT_DOUBLE_EQ(stats::spearman(y, x).coefficient, r);
        std::vector<double> fx(x.size());
        std::transform(x.begin(), x.end(), fx.begin(), [](double v) { return std::exp(v) * 3 + 1; });
        ASSERT_DOUBLE_EQ(stats::spearman(fx, y).coefficient, r);
        ASSERT_LE(std::fabs(r), 1.0);
    }
}

TEST(Spearman, Errors) {
    EXPECT_THROW(stats::spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InsufficientDataError);
    EXPECT_THROW(stats::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), DimensionError);
    EXPECT_THROW(stats::spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedCorrelationError);
}

TEST(Pearson, AffineOrthogonalAndOracle) {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(3 * v + 2);
    EXPECT_NEAR(stats::pearson(x, y).coefficient, 1.0, 1e-15);
    EXPECT_NEAR(stats::pearson(x, std::vector<double>{1, -2, 0, 2, -1}).coefficient, 0.0, 1e-15);

    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = oracle::normals(rng, 30), b = oracle::normals(rng, 30);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.5 * a[i];
        EXPECT_NEAR(stats::pearson(a, b).coefficient, oracle::pearson(a, b), 1e-12);
    }
}

TEST(Pearson, PValueMatchesTDistribution) {
    std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8}, y{2, 1, 4, 3, 7, 8, 5, 6};
    auto c = stats::pearson(x, y);
    const double t = c.coefficient * std::sqrt(6.0 / (1 - c.coefficient * c.coefficient));
    EXPECT_NEAR(c.p_value, 2 * (1 - oracle::t_cdf(t, 6)), 1e-10);
}

TEST(CohensD, HandValuesAndIdentity) {
    std::vector<double> a{2, 4, 6}, b{1, 3, 5};
    EXPECT_DOUBLE_EQ(stats::cohens_d(a, b, DMode::pooled), 0.5);
    EXPECT_EQ(stats::cohens_d(a, a, DMode::pooled), 0.0);
    EXPECT_EQ(stats::cohens_d(a, a, DMode::paired), 0.0);
    // a - b is constant: d_z is undefined.
    EXPECT_THROW(stats::cohens_d(a, b, DMode::paired), DegenerateVarianceError);
}

TEST(CohensD, Antisymmetric) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = oracle::normals(rng, 9), b = oracle::normals(rng, 9);
        for (auto mode : {DMode::pooled, DMode::paired}) {
            ASSERT_DOUBLE_EQ(stats::cohens_d(a, b, mode), -stats::cohens_d(b, a, mode));
        }
    }
}

TEST(CohensD, PairedMatchesDirectFormula) {
    std::mt19937_64 rng(15);
    auto b = oracle::normals(rng, 200);
    auto jitter = oracle::normals(rng, 200, 0.3);
    std::vector<double> a(b.size()), diff(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        a[i] = b[i] + 1.0 + jitter[i];
        diff[i] = a[i] - b[i];
    }
    const double m = oracle::mean(diff);
    double ss = 0;
    for (double v : diff) ss += (v - m) * (v - m);
    EXPECT_NEAR(stats::cohens_d(a, b, DMode::paired), m / std::sqrt(ss / 199.0), 1e-12);
}

TEST(PairedT, HandValues) {
    std::vector<double> a{1, 2, 3}, zero{0, 0, 0};
    auto t = stats::paired_t(a, zero);
    EXPECT_NEAR(t.statistic, 2 * std::sqrt(3.0), 1e-12);
    EXPECT_EQ(t.df, 2.0);
    EXPECT_NEAR(t.p_value, 2 * (1 - oracle::t_cdf(t.statistic, 2)), 1e-10);
    EXPECT_NEAR(t.p_value, 0.0742, 5e-5);

    auto same = stats::paired_t(a, a);
    EXPECT_EQ(same.statistic, 0.0);
    EXPECT_EQ(same.p_value, 1.0);

    auto sym = stats::paired_t(std::vector<double>{-1, 1, -1, 1}, std::vector<double>{0, 0, 0, 0});
    EXPECT_EQ(sym.statistic, 0.0);
    EXPECT_DOUBLE_EQ(sym.p_value, 1.0);
}

TEST(Anova, HandValues) {
    std::vector<std::vector<double>> three{{1, 2, 3}, {2, 3, 4}, {3, 4, 5}};
    auto f = stats::one_way_anova(three);
    EXPECT_NEAR(f.statistic, 3.0, 1e-12);
    EXPECT_EQ(f.df, 2.0);
    EXPECT_EQ(f.df2, 6.0);
    EXPECT_NEAR(f.p_value, 1 - oracle::f_cdf(3.0, 2, 6), 1e-10);

    std::vector<std::vector<double>> flat{{1, 2, 3}, {3, 2, 1}, {2, 1, 3}};
    auto z = stats::one_way_anova(flat);
    EXPECT_EQ(z.statistic, 0.0);
    EXPECT_EQ(z.p_value, 1.0);
}

TEST(Anova, TwoGroupsEqualsSquaredT) {
    std::mt19937_64 rng(16);
    std::uniform_int_distribution<std::size_t> size(2, 15);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> g{oracle::normals(rng, size(rng)), oracle::normals(rng, size(rng))};
        for (double& v : g[1]) v += 0.7;
        auto f = stats::one_way_anova(g);
        auto t = stats::unpaired_t(g[0], g[1]);
        ASSERT_NEAR(f.statistic, t.statistic * t.statistic, 1e-10 * std::max(1.0, f.statistic));
        ASSERT_NEAR(f.p_value, t.p_value, 1e-10);
    }
}

TEST(Bonferroni, Examples) {
    EXPECT_DOUBLE_EQ(stats::bonferroni(0.01, 3), 0.03);
    EXPECT_EQ(stats::bonferroni(0.5, 3), 1.0);
    EXPECT_EQ(stats::bonferroni(0.037, 1), 0.037);
    EXPECT_THROW(stats::bonferroni(0.1, 0), DomainError);
}

TEST(Ols, ExactLine) {
    oracle::Matrix X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        X.push_back({static_cast<double>(i), 1.0});
        y.push_back(2.0 * i + 1.0);
    }
    auto fit = stats::ols(to_eigen(X), y, {"x", "const"});
    EXPECT_NEAR(fit.coefficients[0], 2.0, 1e-12);
    EXPECT_NEAR(fit.coefficients[1], 1.0, 1e-12);
    EXPECT_NEAR(fit.adj_r2, 1.0, 1e-12);
}

TEST(Ols, MatchesNormalEquationsOracle) {
    std::mt19937_64 rng(17);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto X = random_design(rng, 50, 4);
        auto y = oracle::normals(rng, 50);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.5 * X[i][0] - X[i][1] + 3;
        auto beta = oracle::normal_equations(X, y);
        auto fit = stats::ols(to_eigen(X), y);
        for (std::size_t j = 0; j < beta.size(); ++j) worst = std::max(worst, std::fabs(fit.coefficients[j] - beta[j]));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Ols, ResidualsOrthogonalAndAdjR2Bounded) {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 50; ++trial) {
        auto X = random_design(rng, 40, 5);
        auto y = oracle::normals(rng, 40);
        auto M = to_eigen(X);
        auto fit = stats::ols(M, y);
        Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(fit.coefficients.data(), 5);
        Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), 40);
        Eigen::VectorXd r = yv - M * beta;
        ASSERT_LE((M.transpose() * r).cwiseAbs().maxCoeff(), 1e-8 * M.norm() * yv.norm());
        ASSERT_LE(fit.adj_r2, fit.r2);
        for (double p : fit.p_values) ASSERT_TRUE(p >= 0 && p <= 1);
    }
}

TEST(Ols, StandardErrorsMatchOracle) {
    std::mt19937_64 rng(19);
    auto X = random_design(rng, 30, 3);
    auto y = oracle::normals(rng, 30);
    auto fit = stats::ols(to_eigen(X), y);
    // sigma^2 (X^T X)^-1 diagonal via the oracle solver, column by column.
    auto beta = oracle::normal_equations(X, y);
    double rss = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double f = 0;
        for (std::size_t j = 0; j < 3; ++j) f += X[i][j] * beta[j];
        rss += (y[i] - f) * (y[i] - f);
    }
    const double s2 = rss / 27.0;
    oracle::Matrix XtX(3, std::vector<double>(3, 0));
    for (const auto& row : X)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 3; ++k) XtX[j][k] += row[j] * row[k];
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<double> e(3, 0);
        e[j] = 1;
        const double inv_jj = oracle::solve(XtX, e)[j];
        EXPECT_NEAR(fit.std_errors[j], std::sqrt(s2 * inv_jj), 1e-10);
        EXPECT_NEAR(fit.p_values[j], 2 * (1 - oracle::t_cdf(std::fabs(fit.t_values[j]), 27)), 1e-9);
    }
}

TEST(Ols, NullColumnNotSignificant) {
    std::mt19937_64 rng(20);
    oracle::Matrix X;
    auto x = oracle::normals(rng, 2000), noise = oracle::normals(rng, 2000), junk = oracle::normals(rng, 2000);
    std::vector<double> y;
    for (std::size_t i = 0; i < x.size(); ++i) {
        X.push_back({x[i], junk[i], 1.0});
        y.push_back(1.5 * x[i] + noise[i]);
    }
    auto fit = stats::ols(to_eigen(X), y);
    EXPECT_LT(std::fabs(fit.t_values[1]), 2.0);
    EXPECT_GT(fit.p_values[1], 0.05);
    EXPECT_LT(fit.p_values[0], 1e-10);
}

TEST(Ols, Errors) {
    Eigen::MatrixXd X(10, 3);
    for (int i = 0; i < 10; ++i) X.row(i) << i, 2.0 * i, 1.0;
    std::vector<double> y(10);
    std::iota(y.begin(), y.end(), 0.0);
    y[3] = 7;
    EXPECT_THROW(stats::ols(X, y), SingularDesignError);
    Eigen::MatrixXd noint(10, 1);
    for (int i = 0; i < 10; ++i) noint(i, 0) = i;
    EXPECT_THROW(stats::ols(noint, y), ValidationError);
    Eigen::MatrixXd tiny(2, 2);
    tiny << 1, 1, 2, 1;
    EXPECT_THROW(stats::ols(tiny, std::vector<double>{1, 2}), SingularDesignError);
}

TEST(NormalizeByMax, Examples) {
    auto v = stats::normalize_by_max(std::vector<double>{80e6, 400e6, 2e9});
    EXPECT_DOUBLE_EQ(v[0], 0.04);
    EXPECT_DOUBLE_EQ(v[1], 0.2);
    EXPECT_DOUBLE_EQ(v[2], 1.0);
    std::vector<double> inside{0.2, 0.5, 0.9};
    EXPECT_EQ(stats::normalize_by_max(inside), inside);
    EXPECT_EQ(stats::normalize_by_max(std::vector<double>{7, 7, 7}), (std::vector<double>{1, 1, 1}));
    EXPECT_THROW(stats::normalize_by_max(std::vector<double>{-1, 0}), NormalizationError);
}

TEST(Distributions, TCdfLandmarks) {
    for (double df : {1.0, 2.5, 10.0, 1e6}) EXPECT_EQ(dist::t_cdf(0, df), 0.5);
    EXPECT_NEAR(dist::t_cdf(1.96, 1e7), 0.975, 1e-4);
    EXPECT_NEAR(dist::t_cdf(1.0, 1), 0.75, 1e-14);  // Cauchy
    EXPECT_THROW(dist::t_cdf(1.0, 0), DomainError);
    EXPECT_THROW(dist::f_cdf(1.0, 1, -1), DomainError);
}

TEST(Distributions, TCdfMatchesQuadratureGrid) {
    double worst = 0;
    for (double df : {1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0})
        for (double x : {-6.0, -2.5, -1.0, -0.3, 0.0, 0.4, 1.0, 1.96, 3.0, 8.0})
            worst = std::max(worst, std::fabs(dist::t_cdf(x, df) - oracle::t_cdf(x, df)));
    EXPECT_LE(worst, 1e-9);
}

TEST(Distributions, FCdfMatchesQuadratureGrid) {
    double worst = 0;
    for (double d1 : {1.0, 2.0, 5.0, 12.0})
        for (double d2 : {2.0, 6.0, 20.0, 100.0})
            for (double x : {0.05, 0.5, 1.0, 2.0, 3.0, 7.5})
                worst = std::max(worst, std::fabs(dist::f_cdf(x, d1, d2) - oracle::f_cdf(x, d1, d2)));
    EXPECT_LE(worst, 1e-9);
}

TEST(Distributions, CdfsMonotoneAndPValuesBounded) {
    for (double df : {1.0, 4.0, 50.0}) {
        double prev = 0;
        for (double x = -20; x <= 20; x += 0.05) {
            const double c = dist::t_cdf(x, df);
            ASSERT_GE(c, prev);
            ASSERT_LE(c, 1.0);
            prev = c;
            const double p = dist::t_two_sided(x, df);
            ASSERT_TRUE(p >= 0 && p <= 1);
        }
    }
    for (double d1 : {1.0, 3.0}) {
        double prev = 0;
        for (double x = 0; x <= 30; x += 0.05) {
            const double c = dist::f_cdf(x, d1, 7);
            ASSERT_GE(c, prev);
            prev = c;
            ASSERT_NEAR(dist::f_sf(x, d1, 7), 1 - c, 1e-12);
        }
    }
}
