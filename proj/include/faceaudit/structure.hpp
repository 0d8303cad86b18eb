#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "faceaudit/association.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/stats.hpp"
#include "faceaudit/util.hpp"

namespace faceaudit {

/// Labeled k×k correlation matrix.
struct CorrelationMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;

    std::size_t size() const noexcept { return labels.size(); }
    double at(std::size_t i, std::size_t j) const {
        return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    /// Throws ValidationError if any invariant fails: symmetry (1e-12), unit
    /// diagonal, entries in [-1, 1], smallest eigenvalue >= -1e-8.
    void validate() const {
        const auto k = static_cast<Eigen::Index>(labels.size());
        if (k == 0) throw ValidationError("correlation matrix is empty");
        if (values.rows() != k || values.cols() != k) throw ValidationError("correlation matrix shape does not match labels");
        for (Eigen::Index i = 0; i < k; ++i) {
            if (std::fabs(values(i, i) - 1.0) > 1e-12) throw ValidationError("correlation matrix diagonal is not 1 at '" + labels[static_cast<std::size_t>(i)] + "'");
            for (Eigen::Index j = 0; j < k; ++j) {
                const double v = values(i, j);
                if (!std::isfinite(v) || v < -1.0 || v > 1.0) throw ValidationError("correlation entry out of [-1, 1]");
                if (std::fabs(v - values(j, i)) > 1e-12) throw ValidationError("correlation matrix is not symmetric");
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(values, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-8) {
            throw ValidationError("correlation matrix is not positive semidefinite (min eigenvalue " +
                                  format_real(eig.eigenvalues().minCoeff()) + ")");
        }
    }
};

using NamedColumn = std::pair<std::string, std::vector<double>>;

/// Correlated Attribute Test: Spearman's rho between two association vectors
/// of the same model.
inline double cat(const AssociationVector& a, const AssociationVector& b) {
    if (a.model_id != b.model_id) throw ValidationError("CAT compares attributes within one model ('" + a.model_id + "' vs '" + b.model_id + "')");
    if (a.scores.size() != b.scores.size()) throw DimensionError("CAT: association vectors differ in length");
    return stats::spearman(a.scores, b.scores).coefficient;
}

/// Pairwise Spearman matrix over labeled columns. Pairs are spread over
/// `threads` workers; only the upper triangle is computed and mirrored, so the
/// result is exactly symmetric.
inline CorrelationMatrix correlation_matrix(const std::vector<NamedColumn>& columns, unsigned threads = 1) {
    const std::size_t k = columns.size();
    if (k == 0) throw InsufficientDataError("correlation_matrix needs at least one column");
    const std::size_t n = columns.front().second.size();
    if (n < 3) throw InsufficientDataError("correlation_matrix needs columns of length >= 3");

    std::vector<std::vector<double>> ranks(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& [name, col] = columns[c];
        if (col.size() != n) throw DimensionError("column '" + name + "' has length " + std::to_string(col.size()) + ", expected " + std::to_string(n));
        if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); })) {
            throw UndefinedCorrelationError("column '" + name + "' is constant");
        }
        ranks[c] = stats::average_ranks(col);
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
    std::vector<double> rho(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        rho[p] = stats::pearson(ranks[pairs[p].first], ranks[pairs[p].second]).coefficient;
    });

    CorrelationMatrix m;
    m.values = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(pairs[p].first);
        const auto j = static_cast<Eigen::Index>(pairs[p].second);
        m.values(i, j) = m.values(j, i) = rho[p];
    }
    for (const auto& [name, col] : columns) m.labels.push_back(name);
    return m;
}

inline CorrelationMatrix cat_matrix(const std::vector<AssociationVector>& associations, unsigned threads = 1) {
    std::vector<NamedColumn> columns;
    for (const auto& a : associations) {
        if (!associations.empty() && a.model_id != associations.front().model_id) {
            throw ValidationError("CAT matrix mixes models");
        }
        columns.emplace_back(a.attribute, a.scores);
    }
    return correlation_matrix(columns, threads);
}

struct StructuralSimilarity {
    std::string model_id;
    double value = stats::kNaN;
};

/// Normalized Frobenius inner product <A,B>_F / (|A|_F |B|_F), diagonal included.
inline StructuralSimilarity frobenius_similarity(const CorrelationMatrix& model, const CorrelationMatrix& human,
                                                 std::string model_id = {}) {
    if (model.labels != human.labels) throw AlignmentError("Frobenius similarity needs matrices with identical labels in identical order");
    if (model.values.rows() != human.values.rows() || model.values.cols() != human.values.cols()) {
        throw DimensionError("Frobenius similarity: matrix shapes differ");
    }
    const double na = model.values.norm();
    const double nb = human.values.norm();
    if (na == 0.0 || nb == 0.0) throw DegenerateVectorError("Frobenius similarity of a zero matrix");
    const double v = std::clamp(model.values.cwiseProduct(human.values).sum() / (na * nb), -1.0, 1.0);
    return {std::move(model_id), v};
}

// ---------------------------------------------------------------------------
// Agglomerative clustering
// ---------------------------------------------------------------------------

enum class Linkage { average, complete, single };

inline std::string_view to_string(Linkage l) {
    switch (l) {
    case Linkage::average: return "average";
    case Linkage::complete: return "complete";
    case Linkage::single: return "single";
    }
    return "average";
}

inline Linkage parse_linkage(std::string_view s) {
    if (s == "average") return Linkage::average;
    if (s == "complete") return Linkage::complete;
    if (s == "single") return Linkage::single;
    throw ValidationError("unknown linkage '" + std::string(s) + "'");
}

/// Nodes 0..k-1 are leaves; merge i creates node k + i.
struct Dendrogram {
    struct Merge {
        std::size_t left;
        std::size_t right;
        double height;
        std::size_t size;
    };

    std::vector<std::string> leaves;
    std::vector<Merge> merges;
};

/// Agglomerative clustering on d(a, b) = 1 - rho(a, b). Among equally close
/// pairs, the one whose (smallest leaf index, smallest leaf index) pair is
/// lexicographically lowest merges first; the left child is the cluster with
/// the smaller leaf index.
inline Dendrogram hcluster(const CorrelationMatrix& c, Linkage linkage = Linkage::average) {
    const std::size_t k = c.size();
    if (k == 0) throw ValidationError("hcluster needs a non-empty matrix");
    if (static_cast<std::size_t>(c.values.rows()) != k || static_cast<std::size_t>(c.values.cols()) != k) {
        throw ValidationError("correlation matrix shape does not match labels");
    }

    struct Cluster {
        std::size_t node;
        std::size_t min_leaf;
        std::size_t size;
    };
    // Active clusters stay sorted by min_leaf, which makes the scan order the tie-break order.
    std::vector<Cluster> active;
    std::vector<std::vector<double>> dist(k, std::vector<double>(k));
    for (std::size_t i = 0; i < k; ++i) {
        active.push_back({i, i, 1});
        for (std::size_t j = 0; j < k; ++j) dist[i][j] = 1.0 - c.at(i, j);
    }
    // dist is indexed by slot; slots are the original leaf index of a cluster's min_leaf.

    Dendrogram d;
    d.leaves = c.labels;
    double last_height = -std::numeric_limits<double>::infinity();
    while (active.size() > 1) {
        std::size_t best_a = 0, best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < active.size(); ++a) {
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                const double v = dist[active[a].min_leaf][active[b].min_leaf];
                if (v < best) {
                    best = v;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (!std::isfinite(best)) throw ValidationError("hcluster: non-finite distance");
        if (best < last_height - 1e-12) throw std::logic_error("hcluster: merge heights decreased");
        last_height = std::max(last_height, best);

        Cluster& A = active[best_a];
        const Cluster B = active[best_b];
        const std::size_t slot_a = A.min_leaf;
        const std::size_t slot_b = B.min_leaf;
        const std::size_t node = k + d.merges.size();
        d.merges.push_back({A.node, B.node, best, A.size + B.size});

        for (const auto& other : active) {
            const std::size_t s = other.min_leaf;
            if (s == slot_a || s == slot_b) continue;
            const double da = dist[slot_a][s];
            const double db = dist[slot_b][s];
            double merged;
            switch (linkage) {
            case Linkage::single: merged = std::min(da, db); break;
            case Linkage::complete: merged = std::max(da, db); break;
            default:
                merged = (static_cast<double>(A.size) * da + static_cast<double>(B.size) * db) /
                         static_cast<double>(A.size + B.size);
            }
            dist[slot_a][s] = dist[s][slot_a] = merged;
        }
        A.node = node;
        A.size += B.size;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    }
    return d;
}

namespace detail {

inline std::string newick_label(const std::string& label) {
    if (!label.empty() && label.find_first_of(" \t\n()[]':;,") == std::string::npos) return label;
    std::string out = "'";
    for (char ch : label) {
        if (ch == '\'') out += "''";
        else out.push_back(ch);
    }
    return out + "'";
}

} // namespace detail

/// Newick text for a dendrogram. A node merged at height h sits at depth h/2
/// (ultrametric); each branch length is parent depth minus child depth.
inline std::string to_newick(const Dendrogram& d) {
    const std::size_t k = d.leaves.size();
    if (k == 0) throw ValidationError("to_newick: empty dendrogram");
    if (d.merges.size() != k - 1) throw ValidationError("to_newick: dendrogram needs exactly k-1 merges");

    auto depth = [&](std::size_t node) { return node < k ? 0.0 : d.merges[node - k].height / 2.0; };
    auto emit = [&](auto&& self, std::size_t node, double parent_depth, bool root) -> std::string {
        std::string s;
        if (node < k) {
            s = detail::newick_label(d.leaves[node]);
        } else {
            const auto& m = d.merges[node - k];
            const double here = depth(node);
            s = "(" + self(self, m.left, here, false) + "," + self(self, m.right, here, false) + ")";
        }
        if (!root) s += ":" + format_real(parent_depth - depth(node));
        return s;
    };
    const std::size_t root = k == 1 ? 0 : 2 * k - 2;
    return emit(emit, root, 0.0, true) + ";";
}

} // namespace faceaudit
