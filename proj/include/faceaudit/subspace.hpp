#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "faceaudit/corpus.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/stats.hpp"

namespace faceaudit {

/// A learned rating direction in embedding space.
///
/// Ratings are shifted by the scale midpoint and features are centered on the
/// training means before fitting, so a positive projection reads as "toward the
/// attribute's positive pole". `intercept` is the fitted constant in
/// midpoint-shifted units (the mean of rating - midpoint on the training set);
/// it is reported but not part of the projection.
struct AttributeSubspace {
    std::string attribute;
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double ridge_lambda = 0.0;
    double train_r2 = stats::kNaN;
    double rating_midpoint = 0.0;
    Eigen::VectorXd centering_means;
};

inline Eigen::MatrixXd to_matrix(const EmbeddingMatrix& m) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(m.count()), static_cast<Eigen::Index>(m.dim()));
    for (std::size_t i = 0; i < m.count(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.dim(); ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
    }
    return X;
}

/// Ridge regression on a fixed, column-centered design. The thin SVD of the
/// centered design is computed once and reused for every target and lambda,
/// so fitting all attributes of a corpus costs one decomposition.
class RidgeProblem {
public:
    explicit RidgeProblem(const Eigen::MatrixXd& X) {
        if (X.rows() < 2) throw InsufficientDataError("subspace fitting needs at least 2 training images");
        if (X.cols() < 1) throw DimensionError("subspace fitting needs dim >= 1");
        if (!X.allFinite()) throw ValidationError("training features contain non-finite values");
        means_ = X.colwise().mean().transpose();
        Eigen::MatrixXd centered = X.rowwise() - means_.transpose();
        svd_.compute(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd_.singularValues();
        const double tol = static_cast<double>(std::max(X.rows(), X.cols())) * std::numeric_limits<double>::epsilon() *
                           (s.size() ? s(0) : 0.0);
        rank_ = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > tol) ++rank_;
    }

    Eigen::Index rows() const noexcept { return svd_.matrixU().rows(); }
    Eigen::Index dim() const noexcept { return means_.size(); }
    Eigen::Index rank() const noexcept { return rank_; }
    const Eigen::VectorXd& means() const noexcept { return means_; }

    /// Fits weights minimizing |Xc w - (h - midpoint - intercept)|^2 + lambda |w|^2.
    AttributeSubspace fit(std::string attribute, std::span<const double> ratings, double lambda, double midpoint) const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("ridge lambda must be finite and >= 0");
        if (lambda == 0.0 && (rows() <= dim() || rank_ < dim())) {
            throw SingularDesignError("subspace for '" + attribute + "': lambda = 0 needs n > dim and a full-rank centered design (n=" +
                                      std::to_string(rows()) + ", dim=" + std::to_string(dim()) + ", rank=" + std::to_string(rank_) + ")");
        }
        auto [yc, intercept] = centered_target(attribute, ratings, midpoint);

        Eigen::VectorXd w = solve(yc, lambda);
        if (!w.allFinite()) throw SingularDesignError("subspace for '" + attribute + "': non-finite weights");
        if (w.norm() == 0.0) throw DegenerateTargetError("subspace for '" + attribute + "': fitted weights are zero");

        AttributeSubspace sub;
        sub.attribute = std::move(attribute);
        sub.intercept = intercept;
        sub.ridge_lambda = lambda;
        sub.rating_midpoint = midpoint;
        sub.centering_means = means_;
        sub.train_r2 = 1.0 - residual_ss(yc, lambda) / yc.squaredNorm();
        sub.weights = std::move(w);
        return sub;
    }

    /// Generalized cross-validation score n·RSS / (n - df - 1)^2; the extra 1
    /// accounts for the unpenalized intercept.
    double gcv(std::span<const double> ratings, double lambda, double midpoint) const {
        const Eigen::VectorXd yc = centered_target("gcv", ratings, midpoint).first;
        const auto& s = svd_.singularValues();
        double df = 0.0;
        for (Eigen::Index i = 0; i < rank_; ++i) df += s(i) * s(i) / (s(i) * s(i) + lambda);
        const double n = static_cast<double>(rows());
        const double denom = n - df - 1.0;
        if (denom <= 0.0) return std::numeric_limits<double>::infinity();
        return n * residual_ss(yc, lambda) / (denom * denom);
    }

    /// Lambda from `grid` with the lowest GCV score (first one on ties).
    double select_lambda(std::span<const double> ratings, double midpoint, std::span<const double> grid) const {
        if (grid.empty()) throw ValidationError("lambda grid is empty");
        double best_lambda = grid.front();
        double best = std::numeric_limits<double>::infinity();
        for (double lambda : grid) {
            if (!(lambda > 0.0)) throw ValidationError("GCV lambda grid must be positive");
            const double score = gcv(ratings, lambda, midpoint);
            if (score < best) {
                best = score;
                best_lambda = lambda;
            }
        }
        return best_lambda;
    }

private:
    /// (rating - midpoint - mean, mean) where mean is the mean of rating - midpoint.
    std::pair<Eigen::VectorXd, double> centered_target(const std::string& attribute, std::span<const double> ratings,
                                                       double midpoint) const {
        if (static_cast<Eigen::Index>(ratings.size()) != rows()) throw DimensionError("ratings length does not match training rows");
        Eigen::VectorXd y(rows());
        for (Eigen::Index i = 0; i < rows(); ++i) y(i) = ratings[static_cast<std::size_t>(i)] - midpoint;
        if (!y.allFinite()) throw ValidationError("ratings contain non-finite values");
        const double mean = y.mean();
        Eigen::VectorXd yc = y.array() - mean;
        if (yc.squaredNorm() == 0.0) throw DegenerateTargetError("ratings for '" + attribute + "' have zero variance");
        return {std::move(yc), mean};
    }

    Eigen::VectorXd shrunk_projection(const Eigen::VectorXd& yc, double lambda) const {
        const auto& s = svd_.singularValues();
        Eigen::VectorXd uty = svd_.matrixU().leftCols(rank_).transpose() * yc;
        for (Eigen::Index i = 0; i < rank_; ++i) uty(i) *= s(i) / (s(i) * s(i) + lambda);
        return uty;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& yc, double lambda) const {
        return svd_.matrixV().leftCols(rank_) * shrunk_projection(yc, lambda);
    }

    double residual_ss(const Eigen::VectorXd& yc, double lambda) const {
        const auto& s = svd_.singularValues();
        Eigen::VectorXd uty = svd_.matrixU().leftCols(rank_).transpose() * yc;
        Eigen::VectorXd fitted = Eigen::VectorXd::Zero(rows());
        for (Eigen::Index i = 0; i < rank_; ++i) fitted += svd_.matrixU().col(i) * (uty(i) * s(i) * s(i) / (s(i) * s(i) + lambda));
        return (yc - fitted).squaredNorm();
    }

    Eigen::VectorXd means_;
    Eigen::BDCSVD<Eigen::MatrixXd> svd_;
    Eigen::Index rank_ = 0;
};

inline AttributeSubspace fit_subspace(const Eigen::MatrixXd& X, std::span<const double> ratings, double lambda,
                                      double midpoint, std::string attribute = {}) {
    return RidgeProblem(X).fit(std::move(attribute), ratings, lambda, midpoint);
}

/// Default GCV grid: 10^-4 .. 10^6 in half-decade steps.
inline std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int e = -8; e <= 12; ++e) grid.push_back(std::pow(10.0, e / 2.0));
    return grid;
}

/// Scalar projection of the centered vector onto the unit weight direction.
template <class T>
double project(std::span<const T> vec, const AttributeSubspace& sub) {
    if (static_cast<Eigen::Index>(vec.size()) != sub.weights.size() || sub.centering_means.size() != sub.weights.size()) {
        throw DimensionError("project: vector dim " + std::to_string(vec.size()) + " != subspace dim " + std::to_string(sub.weights.size()));
    }
    const double norm = sub.weights.norm();
    if (norm == 0.0) throw DegenerateVectorError("project: subspace weights are zero");
    double s = 0.0;
    for (Eigen::Index i = 0; i < sub.weights.size(); ++i) {
        s += (static_cast<double>(vec[static_cast<std::size_t>(i)]) - sub.centering_means(i)) * sub.weights(i);
    }
    return s / norm;
}

inline std::vector<double> project_all(const EmbeddingMatrix& m, const AttributeSubspace& sub) {
    std::vector<double> out;
    out.reserve(m.count());
    for (std::size_t i = 0; i < m.count(); ++i) out.push_back(project(m.row(i), sub));
    return out;
}

struct ClassificationMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Positive-class metrics; predictions are 1 where score > 0. An empty
/// denominator yields 0 for that metric.
inline ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > 0.0;
        if (predicted && labels[i] == 1) ++tp;
        else if (predicted) ++fp;
        else if (labels[i] == 1) ++fn;
    }
    ClassificationMetrics m;
    if (tp + fp) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

struct ProjectionResult {
    std::string attribute;
    std::vector<double> projections;  // positive-pole images first, then negative-pole images
    std::vector<int> labels;          // ground truth: 1 positive pole, 0 negative pole
    std::vector<int> predicted;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline ProjectionResult classify_projections(const EmbeddingMatrix& pos_images, const EmbeddingMatrix& neg_images,
                                             const AttributeSubspace& sub) {
    ProjectionResult r;
    r.attribute = sub.attribute;
    for (double p : project_all(pos_images, sub)) {
        r.projections.push_back(p);
        r.labels.push_back(1);
    }
    for (double p : project_all(neg_images, sub)) {
        r.projections.push_back(p);
        r.labels.push_back(0);
    }
    if (r.labels.empty()) throw InsufficientDataError("classify_projections: no images");
    for (double p : r.projections) r.predicted.push_back(p > 0.0 ? 1 : 0);
    auto m = classification_metrics(r.projections, r.labels);
    r.precision = m.precision;
    r.recall = m.recall;
    r.f1 = m.f1;
    return r;
}

struct DifferentialBias {
    std::string attribute;
    double d = stats::kNaN;
    double t = stats::kNaN;
    double p = stats::kNaN;
    std::string group_a;
    std::string group_b;
    stats::DMode mode = stats::DMode::paired;
};

/// Effect size and significance of group_a's projections over group_b's.
/// Paired mode pairs images by position (generation index) and uses the paired
/// t-test; pooled mode uses the equal-variance two-sample t-test.
inline DifferentialBias differential_bias(std::span<const double> group_a, std::span<const double> group_b, stats::DMode mode,
                                          std::string attribute = {}, std::string name_a = "a", std::string name_b = "b") {
    if (group_a.empty() || group_b.empty()) throw InsufficientDataError("differential bias needs non-empty groups");
    DifferentialBias out;
    out.attribute = std::move(attribute);
    out.group_a = std::move(name_a);
    out.group_b = std::move(name_b);
    out.mode = mode;
    out.d = stats::cohens_d(group_a, group_b, mode);
    auto test = mode == stats::DMode::paired ? stats::paired_t(group_a, group_b) : stats::unpaired_t(group_a, group_b);
    out.t = test.statistic;
    out.p = test.p_value;
    return out;
}

// Serialized as a one-row EMB1 file: the row id is the attribute, the row the
// weights (f32), the metadata carries intercept, lambda, midpoint, train R^2
// and the centering means.
inline void write_subspace(const AttributeSubspace& sub, const std::filesystem::path& path, const std::string& model_id = {}) {
    std::vector<float> row(static_cast<std::size_t>(sub.weights.size()));
    for (Eigen::Index i = 0; i < sub.weights.size(); ++i) row[static_cast<std::size_t>(i)] = static_cast<float>(sub.weights(i));
    EmbeddingMeta meta;
    meta.model_id = model_id;
    meta.modality = Modality::image;
    meta.source = "subspace";
    meta.extra = {{"intercept", sub.intercept},
                  {"ridge_lambda", sub.ridge_lambda},
                  {"rating_midpoint", sub.rating_midpoint},
                  {"train_r2", sub.train_r2},
                  {"centering_means", std::vector<double>(sub.centering_means.data(), sub.centering_means.data() + sub.centering_means.size())}};
    const std::size_t dim = row.size();
    write_embeddings(EmbeddingMatrix({sub.attribute}, dim, std::move(row), meta), path);
}

inline AttributeSubspace read_subspace(const std::filesystem::path& path) {
    auto m = read_embeddings(path);
    if (m.count() != 1 || !m.meta()) throw FormatError(path.string() + ": not a subspace file");
    const auto& extra = m.meta()->extra;
    AttributeSubspace sub;
    try {
        sub.attribute = m.ids().front();
        sub.intercept = extra.at("intercept").get<double>();
        sub.ridge_lambda = extra.at("ridge_lambda").get<double>();
        sub.rating_midpoint = extra.at("rating_midpoint").get<double>();
        sub.train_r2 = extra.at("train_r2").is_null() ? stats::kNaN : extra.at("train_r2").get<double>();
        auto means = extra.at("centering_means").get<std::vector<double>>();
        if (means.size() != m.dim()) throw FormatError("centering means have wrong length");
        sub.centering_means = Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad subspace metadata: " + e.what());
    }
    auto r = m.row(0);
    sub.weights.resize(static_cast<Eigen::Index>(m.dim()));
    for (std::size_t i = 0; i < m.dim(); ++i) sub.weights(static_cast<Eigen::Index>(i)) = r[i];
    return sub;
}

} // namespace faceaudit
