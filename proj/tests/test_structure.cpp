#include <gtest/gtest.h>

#include "faceaudit/structure.hpp"
#include "oracles.hpp"

using namespace faceaudit;

namespace {

CorrelationMatrix make(std::vector<std::string> labels, std::initializer_list<double> values) {
    CorrelationMatrix m;
    const auto k = static_cast<Eigen::Index>(labels.size());
    m.labels = std::move(labels);
    m.values.resize(k, k);
    auto it = values.begin();
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) m.values(i, j) = *it++;
    return m;
}

// Random valid correlation matrix: Spearman over random correlated columns.
CorrelationMatrix random_matrix(std::mt19937_64& rng, std::size_t k, std::size_t n) {
    auto base = oracle::normals(rng, n);
    std::vector<NamedColumn> cols;
    std::uniform_real_distribution<double> mix(-1.5, 1.5);
    for (std::size_t c = 0; c < k; ++c) {
        auto v = oracle::normals(rng, n);
        const double w = mix(rng);
        for (std::size_t i = 0; i < n; ++i) v[i] += w * base[i];
        cols.emplace_back("a" + std::to_string(c), v);
    }
    return correlation_matrix(cols);
}

CorrelationMatrix block4() {
    return make({"a", "b", "c", "d"}, {1, 0.9, 0.1, 0.1, 0.9, 1, 0.1, 0.1, 0.1, 0.1, 1, 0.9, 0.1, 0.1, 0.9, 1});
}

} // namespace

TEST(Cat, SelfReversalAndDelegation) {
    AssociationVector a{"m", "x", {0.1, 0.5, -0.2, 0.3, 0.0, 0.9, -0.7, 0.4}};
    AssociationVector r{"m", "y", {}};
    for (double v : a.scores) r.scores.push_back(-v);
    EXPECT_DOUBLE_EQ(cat(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cat(a, r), -1.0);
    std::mt19937_64 rng(31);
    AssociationVector p{"m", "p", oracle::normals(rng, 8)}, q{"m", "q", oracle::normals(rng, 8)};
    EXPECT_EQ(cat(p, q), stats::spearman(p.scores, q.scores).coefficient);
    AssociationVector other{"n", "x", a.scores};
    EXPECT_THROW(cat(a, other), ValidationError);
}

TEST(CorrelationMatrix, IdenticalColumnsAreAllOnes) {
    std::vector<NamedColumn> cols{{"a", {1, 5, 2, 8}}, {"b", {1, 5, 2, 8}}};
    auto m = correlation_matrix(cols);
    EXPECT_TRUE(m.values.isApprox(Eigen::MatrixXd::Ones(2, 2)));
    m.validate();
}

TEST(CorrelationMatrix, IndependentColumnsNearZero) {
    std::mt19937_64 rng(32);
    std::vector<NamedColumn> cols;
    for (int c = 0; c < 5; ++c) cols.emplace_back("c" + std::to_string(c), oracle::normals(rng, 1000));
    auto m = correlation_matrix(cols);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            if (i != j) {
                EXPECT_LT(std::fabs(m.at(i, j)), 0.1);
            }
}

TEST(CorrelationMatrix, ConstantColumnNamed) {
    std::vector<NamedColumn> cols{{"ok", {1, 2, 3}}, {"flat", {4, 4, 4}}};
    try {
        correlation_matrix(cols);
        FAIL();
    } catch (const UndefinedCorrelationError& e) {
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(CorrelationMatrix, GeneratedMatricesAreValidAndThreadIndependent) {
    std::mt19937_64 rng(33);
    std::uniform_int_distribution<std::size_t> ks(1, 40), ns(3, 60);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = ks(rng), n = ns(rng);
        auto m = random_matrix(rng, k, n);
        ASSERT_NO_THROW(m.validate());
        ASSERT_TRUE(m.values == m.values.transpose());
        for (std::size_t i = 0; i < k; ++i) ASSERT_EQ(m.at(i, i), 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.values);
        ASSERT_GE(eig.eigenvalues().minCoeff(), -1e-8);
    }
    std::vector<NamedColumn> cols;
    std::mt19937_64 c(35);
    for (int i = 0; i < 30; ++i) cols.emplace_back("x" + std::to_string(i), oracle::normals(c, 40));
    auto one = correlation_matrix(cols, 1);
    for (unsigned t : {2u, 4u, 8u}) EXPECT_TRUE(correlation_matrix(cols, t).values == one.values);
}

TEST(CorrelationMatrix, ValidateRejectsBrokenMatrices) {
    EXPECT_THROW(make({"a", "b"}, {1, 0.5, 0.4, 1}).validate(), ValidationError);
    EXPECT_THROW(make({"a", "b"}, {0.9, 0.5, 0.5, 1}).validate(), ValidationError);
    EXPECT_THROW(make({"a", "b"}, {1, 1.5, 1.5, 1}).validate(), ValidationError);
    // Symmetric, unit diagonal, in range, but indefinite.
    EXPECT_THROW(make({"a", "b", "c"}, {1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1}).validate(), ValidationError);
}

TEST(Frobenius, SelfSimilarityOnRandomMatrices) {
    std::mt19937_64 rng(36);
    std::uniform_int_distribution<std::size_t> ks(2, 34);
    for (int trial = 0; trial < 50; ++trial) {
        auto m = random_matrix(rng, ks(rng), 40);
        ASSERT_NEAR(frobenius_similarity(m, m).value, 1.0, 1e-12);
        CorrelationMatrix scaled = m;
        scaled.values *= 3.5;
        ASSERT_NEAR(frobenius_similarity(scaled, m).value, 1.0, 1e-12);
    }
}

TEST(Frobenius, IdentityVersusOnes) {
    CorrelationMatrix id, ones;
    for (int i = 0; i < 34; ++i) id.labels.push_back("a" + std::to_string(i));
    ones.labels = id.labels;
    id.values = Eigen::MatrixXd::Identity(34, 34);
    ones.values = Eigen::MatrixXd::Ones(34, 34);
    EXPECT_NEAR(frobenius_similarity(id, ones).value, 1.0 / std::sqrt(34.0), 1e-12);
}

TEST(Frobenius, BoundedAndLabelChecked) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_matrix(rng, 6, 20), b = random_matrix(rng, 6, 20);
        const double v = frobenius_similarity(a, b).value;
        ASSERT_TRUE(v >= -1 && v <= 1);
        ASSERT_LT(v, 1.0);
    }
    auto a = block4();
    auto b = a;
    std::swap(b.labels[0], b.labels[1]);
    EXPECT_THROW(frobenius_similarity(a, b), AlignmentError);
}

TEST(Hcluster, TrivialSizes) {
    EXPECT_TRUE(hcluster(make({"a"}, {1})).merges.empty());
    auto d = hcluster(make({"a", "b"}, {1, 0.4, 0.4, 1}));
    ASSERT_EQ(d.merges.size(), 1u);
    EXPECT_DOUBLE_EQ(d.merges[0].height, 0.6);
}

TEST(Hcluster, FourLeafBlocks) {
    auto d = hcluster(block4(), Linkage::average);
    ASSERT_EQ(d.merges.size(), 3u);
    EXPECT_EQ(d.merges[0].left, 0u);
    EXPECT_EQ(d.merges[0].right, 1u);
    EXPECT_NEAR(d.merges[0].height, 0.1, 1e-15);
    EXPECT_EQ(d.merges[1].left, 2u);
    EXPECT_EQ(d.merges[1].right, 3u);
    EXPECT_NEAR(d.merges[1].height, 0.1, 1e-15);
    EXPECT_EQ(d.merges[2].left, 4u);
    EXPECT_EQ(d.merges[2].right, 5u);
    EXPECT_NEAR(d.merges[2].height, 0.9, 1e-15);
    EXPECT_EQ(d.merges[2].size, 4u);
}

TEST(Hcluster, LinkageRules) {
    // d(a,b)=0.2, d(a,c)=0.5, d(b,c)=0.9
    auto m = make({"a", "b", "c"}, {1, 0.8, 0.5, 0.8, 1, 0.1, 0.5, 0.1, 1});
    EXPECT_NEAR(hcluster(m, Linkage::single).merges[1].height, 0.5, 1e-15);
    EXPECT_NEAR(hcluster(m, Linkage::complete).merges[1].height, 0.9, 1e-15);
    EXPECT_NEAR(hcluster(m, Linkage::average).merges[1].height, 0.7, 1e-15);
}

TEST(Hcluster, TiesBreakTowardLowestLeafPair) {
    // All off-diagonal distances equal.
    auto m = make({"d", "c", "b", "a"}, {1, .5, .5, .5, .5, 1, .5, .5, .5, .5, 1, .5, .5, .5, .5, 1});
    auto d = hcluster(m);
    EXPECT_EQ(d.merges[0].left, 0u);
    EXPECT_EQ(d.merges[0].right, 1u);
    EXPECT_EQ(d.merges[1].left, 4u);
    EXPECT_EQ(d.merges[1].right, 2u);
}

TEST(Hcluster, HeightsMonotoneAndDeterministic) {
    std::mt19937_64 rng(38);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = random_matrix(rng, 12, 25);
        for (auto linkage : {Linkage::average, Linkage::complete, Linkage::single}) {
            auto d = hcluster(m, linkage);
            ASSERT_EQ(d.merges.size(), 11u);
            for (std::size_t i = 1; i < d.merges.size(); ++i) ASSERT_GE(d.merges[i].height, d.merges[i - 1].height - 1e-12);
            ASSERT_EQ(to_newick(hcluster(m, linkage)), to_newick(d));
        }
    }
}

TEST(Newick, SmallTrees) {
    EXPECT_EQ(to_newick(hcluster(make({"a"}, {1}))), "a;");
    EXPECT_EQ(to_newick(hcluster(make({"a", "b"}, {1, 0.4, 0.4, 1}))), "(a:0.3,b:0.3);");
    EXPECT_EQ(to_newick(hcluster(make({"it's", "x y"}, {1, 0.4, 0.4, 1}))), "('it''s':0.3,'x y':0.3);");
}

TEST(Newick, ParsesBackWithSameTopologyAndUltrametricDepths) {
    std::mt19937_64 rng(39);
    for (int trial = 0; trial < 50; ++trial) {
        auto m = random_matrix(rng, 10, 30);
        m.labels[3] = "weird (label)";
        auto d = hcluster(m);
        auto tree = oracle::NewickParser(to_newick(d)).parse();

        std::map<std::string, double> depths;
        oracle::leaf_depths(tree, 0.0, depths);
        ASSERT_EQ(depths.size(), 10u);
        for (const auto& [leaf, depth] : depths) ASSERT_NEAR(depth, d.merges.back().height / 2, 1e-12) << leaf;

        // Rebuild the expected topology from the merge list.
        std::vector<std::string> node(d.leaves.begin(), d.leaves.end());
        for (const auto& mg : d.merges) {
            auto l = node[mg.left], r = node[mg.right];
            node.push_back("(" + std::min(l, r) + "," + std::max(l, r) + ")");
        }
        ASSERT_EQ(oracle::topology(tree), node.back());
    }
}
