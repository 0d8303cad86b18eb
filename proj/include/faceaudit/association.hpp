#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "faceaudit/corpus.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/stats.hpp"

namespace faceaudit {

/// Per-image pole-differential associations for one (model, attribute), in
/// the corpus's canonical id order.
struct AssociationVector {
    std::string model_id;
    std::string attribute;
    std::vector<double> scores;
};

struct SimilarityRecord {
    std::string model_id;
    std::string attribute;
    double rho = stats::kNaN;
    double p_value = stats::kNaN;
    std::size_t n = 0;
};

namespace detail {

template <class T>
double dot(std::span<const T> a, std::span<const T> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

template <class T>
double norm(std::span<const T> a) {
    return std::sqrt(dot(a, a));
}

} // namespace detail

/// cos(image, positive) - cos(image, negative), accumulated in double.
template <class T>
    requires std::is_arithmetic_v<T>
double pole_association(std::span<const T> image, std::span<const T> positive, std::span<const T> negative) {
    if (image.size() != positive.size() || image.size() != negative.size()) {
        throw DimensionError("pole_association: dimensions differ (" + std::to_string(image.size()) + ", " +
                             std::to_string(positive.size()) + ", " + std::to_string(negative.size()) + ")");
    }
    const double ni = detail::norm(image);
    const double np = detail::norm(positive);
    const double nn = detail::norm(negative);
    if (ni == 0.0 || np == 0.0 || nn == 0.0) throw DegenerateVectorError("pole_association: zero-norm vector");
    return detail::dot(image, positive) / (ni * np) - detail::dot(image, negative) / (ni * nn);
}

template <class T>
double pole_association(const std::vector<T>& image, const std::vector<T>& positive, const std::vector<T>& negative) {
    return pole_association(std::span<const T>(image), std::span<const T>(positive), std::span<const T>(negative));
}

/// Associations of every row of `images` with `attribute`, in row order. The
/// text matrix must carry rows `<name>/pos` and `<name>/neg`.
inline AssociationVector association_vector(const EmbeddingMatrix& images, const AttributeSpec& attribute,
                                            const EmbeddingMatrix& text_embeddings) {
    auto pos_row = text_embeddings.find(attribute.positive_key());
    auto neg_row = text_embeddings.find(attribute.negative_key());
    if (!pos_row || !neg_row) {
        throw MissingPromptError("text embeddings lack '" + (pos_row ? attribute.negative_key() : attribute.positive_key()) + "'");
    }
    if (text_embeddings.dim() != images.dim()) {
        throw DimensionError("text embedding dim " + std::to_string(text_embeddings.dim()) + " != image embedding dim " +
                             std::to_string(images.dim()));
    }
    const auto pos = text_embeddings.row(*pos_row);
    const auto neg = text_embeddings.row(*neg_row);

    AssociationVector out;
    if (images.meta()) out.model_id = images.meta()->model_id;
    else if (text_embeddings.meta()) out.model_id = text_embeddings.meta()->model_id;
    out.attribute = attribute.name;
    out.scores.reserve(images.count());
    for (std::size_t j = 0; j < images.count(); ++j) {
        try {
            out.scores.push_back(pole_association(images.row(j), pos, neg));
        } catch (const DegenerateVectorError&) {
            throw DegenerateVectorError("zero-norm vector for image '" + images.ids()[j] + "' or prompts of '" + attribute.name + "'");
        }
    }
    return out;
}

/// Associations over an aligned corpus, in its canonical (lexicographic) order.
inline AssociationVector association_vector(const AlignedCorpus& corpus, const AttributeSpec& attribute,
                                            const EmbeddingMatrix& text_embeddings) {
    return association_vector(corpus.embeddings, attribute, text_embeddings);
}

/// Spearman's rho between a model's associations and the human mean ratings.
inline SimilarityRecord model_human_similarity(const AssociationVector& m, std::span<const double> human) {
    if (m.scores.size() != human.size()) {
        throw DimensionError("association vector and ratings differ in length for '" + m.attribute + "'");
    }
    if (m.scores.size() < 3) throw InsufficientDataError("model-human similarity needs at least 3 images");
    try {
        auto c = stats::spearman(m.scores, human);
        return {m.model_id, m.attribute, c.coefficient, c.p_value, c.n};
    } catch (const UndefinedCorrelationError&) {
        throw UndefinedCorrelationError("similarity undefined for '" + m.attribute + "' of model '" + m.model_id +
                                        "': constant associations or ratings");
    }
}

/// Correlation between per-attribute mean model-human similarity and human IRR
/// over the attributes both sides share.
inline stats::Correlation irr_correlation(const std::map<std::string, double>& mean_similarity, const IrrTable& irr,
                                          stats::CorrelationMethod method = stats::CorrelationMethod::spearman) {
    std::vector<double> sims, irrs;
    for (const auto& [attribute, sim] : mean_similarity) {
        if (auto v = irr.find(attribute)) {
            sims.push_back(sim);
            irrs.push_back(*v);
        }
    }
    if (sims.size() < 3) {
        throw InsufficientDataError("IRR correlation needs at least 3 shared attributes, got " + std::to_string(sims.size()));
    }
    return stats::correlate(sims, irrs, method);
}

} // namespace faceaudit
