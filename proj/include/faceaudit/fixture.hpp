#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "faceaudit/corpus.hpp"
#include "faceaudit/csv.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/util.hpp"

// Synthetic corpora with known structure, for tests and smoke runs.
namespace faceaudit::fixture {

namespace fs = std::filesystem;

struct Options {
    std::uint64_t seed = 7;
    std::size_t images = 40;
    std::size_t attributes = 3;
    std::size_t models = 12;  // dataset size x image tower x text tower
    std::size_t feature_dim = 6;
    std::size_t group_size = 20;
};

namespace detail {

inline void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << s;
}

inline std::string image_id(std::size_t i) {
    std::string n = std::to_string(i);
    return "img" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n + ".jpg";
}

} // namespace detail

/// Writes a complete input set under `dir` and returns the path of its
/// config.json. Ratings are linear in hidden features (plus small noise), and
/// each model's image embeddings are a noisy copy of those features.
inline fs::path write_fixture(const fs::path& dir, const Options& opt = {}) {
    if (opt.images < 4 || opt.attributes < 1 || opt.models < 1 || opt.feature_dim < 1) {
        throw ValidationError("fixture needs >= 4 images, >= 1 attribute, >= 1 model, feature_dim >= 1");
    }
    if (opt.attributes > default_attributes().size()) throw ValidationError("too many fixture attributes");
    fs::create_directories(dir / "embeddings");
    fs::create_directories(dir / "probe");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = opt.images, k = opt.attributes, d = opt.feature_dim;

    std::vector<AttributeSpec> specs(default_attributes().begin(), default_attributes().begin() + static_cast<std::ptrdiff_t>(k));
    detail::write_text(dir / "attributes.json", attribute_config_to_json(specs).dump(2) + "\n");

    std::vector<std::vector<double>> features(n, std::vector<double>(d));
    for (auto& row : features)
        for (auto& v : row) v = normal(rng);
    std::vector<std::vector<double>> directions(k, std::vector<double>(d));
    for (auto& w : directions) {
        double norm = 0.0;
        for (auto& v : w) {
            v = normal(rng);
            norm += v * v;
        }
        for (auto& v : w) v /= std::sqrt(norm);
    }

    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = detail::image_id(i);
    std::vector<std::vector<double>> ratings(n, std::vector<double>(k));
    std::string ratings_csv = csv::join({"image_id", "attribute", "mean_rating"});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += features[i][j] * directions[a][j];
            ratings[i][a] = std::clamp(50.0 + 12.0 * s + 0.5 * normal(rng), 0.0, 100.0);
            ratings_csv += csv::join({ids[i], specs[a].name, format_real(ratings[i][a])});
        }
    }
    detail::write_text(dir / "ratings.csv", ratings_csv);

    std::string irr_csv = csv::join({"attribute", "irr"});
    for (std::size_t a = 0; a < k; ++a) irr_csv += csv::join({specs[a].name, format_real(0.5 + 0.4 * static_cast<double>(a) / static_cast<double>(k))});
    detail::write_text(dir / "irr.csv", irr_csv);

    // Model m: dataset size m % 3, image tower (m / 3) % 2, text tower (m / 6) % 2,
    // samples seen from the XOR of the towers. Embeddings carry a constant offset dimension.
    const double sizes[] = {80e6, 407e6, 2.32e9};
    const double image_params[] = {86e6, 303e6};
    const double text_params[] = {63e6, 123e6};
    const double samples[] = {3e9, 13e9};
    std::string meta_csv = csv::join({"model_id", "family", "dataset_size", "total_training_samples", "image_params", "text_params"});
    nlohmann::json image_list = nlohmann::json::array(), text_list = nlohmann::json::array();
    for (std::size_t m = 0; m < opt.models; ++m) {
        const std::string model_id = "fixture-" + std::to_string(m);
        const double noise = 0.2 + 0.1 * static_cast<double>(m % 3);
        const std::size_t dim = d + 1;
        std::vector<float> values;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) values.push_back(static_cast<float>(features[i][j] + noise * normal(rng)));
            values.push_back(2.0f);
        }
        write_embeddings(EmbeddingMatrix(ids, dim, values, EmbeddingMeta{model_id, Modality::image, "fixture", {}}),
                         dir / "embeddings" / (model_id + "_images.emb"));

        std::vector<std::string> text_ids;
        std::vector<float> text_values;
        for (std::size_t a = 0; a < k; ++a) {
            for (int sign : {1, -1}) {
                text_ids.push_back(sign > 0 ? specs[a].positive_key() : specs[a].negative_key());
                for (std::size_t j = 0; j < d; ++j) text_values.push_back(static_cast<float>(sign * directions[a][j]));
                text_values.push_back(1.0f);
            }
        }
        write_embeddings(EmbeddingMatrix(text_ids, dim, text_values, EmbeddingMeta{model_id, Modality::text, "fixture", {}}),
                         dir / "embeddings" / (model_id + "_text.emb"));

        image_list.push_back({{"model_id", model_id}, {"path", "embeddings/" + model_id + "_images.emb"}});
        text_list.push_back({{"model_id", model_id}, {"path", "embeddings/" + model_id + "_text.emb"}});
        const std::size_t img = (m / 3) % 2, txt = (m / 6) % 2;
        meta_csv += csv::join({model_id, "scaling", format_real(sizes[m % 3]), format_real(samples[img ^ txt]),
                               format_real(image_params[img]), format_real(text_params[txt])});
    }
    detail::write_text(dir / "models.csv", meta_csv);

    // Probe inputs: the hidden features themselves; generated poles are the
    // top and bottom rating quartiles of the training images.
    std::vector<float> flat;
    for (const auto& row : features)
        for (double v : row) flat.push_back(static_cast<float>(v));
    write_embeddings(EmbeddingMatrix(ids, d, flat, EmbeddingMeta{"fixture-features", Modality::image, "fixture", {}}),
                     dir / "probe" / "features.emb");

    nlohmann::json generated = nlohmann::json::array();
    const std::size_t quart = std::max<std::size_t>(1, n / 4);
    for (std::size_t a = 0; a < k; ++a) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return ratings[x][a] > ratings[y][a]; });
        auto pole = [&](std::size_t from, const std::string& name) {
            std::vector<std::string> pid;
            std::vector<float> pv;
            for (std::size_t r = from; r < from + quart; ++r) {
                pid.push_back(ids[order[r]]);
                for (double v : features[order[r]]) pv.push_back(static_cast<float>(v));
            }
            write_embeddings(EmbeddingMatrix(pid, d, pv, EmbeddingMeta{"fixture-features", Modality::image, "fixture", {}}),
                             dir / "probe" / name);
        };
        pole(0, specs[a].name + "_pos.emb");
        pole(n - quart, specs[a].name + "_neg.emb");
        generated.push_back({{"attribute", specs[a].name},
                             {"pos", "probe/" + specs[a].name + "_pos.emb"},
                             {"neg", "probe/" + specs[a].name + "_neg.emb"}});
    }

    nlohmann::json groups = nlohmann::json::array();
    for (const char* name : {"group_a", "group_b"}) {
        std::vector<std::string> gid;
        std::vector<float> gv;
        for (std::size_t i = 0; i < opt.group_size; ++i) {
            gid.push_back(std::string(name) + "_" + std::to_string(i));
            for (std::size_t j = 0; j < d; ++j) gv.push_back(static_cast<float>(normal(rng)));
        }
        write_embeddings(EmbeddingMatrix(gid, d, gv, EmbeddingMeta{"fixture-features", Modality::image, "fixture", {}}),
                         dir / "probe" / (std::string(name) + ".emb"));
        groups.push_back({{"name", name}, {"path", std::string("probe/") + name + ".emb"}});
    }

    nlohmann::json config = {
        {"attributes", "attributes.json"},
        {"ratings", "ratings.csv"},
        {"irr", "irr.csv"},
        {"image_embeddings", image_list},
        {"text_embeddings", text_list},
        {"model_meta", "models.csv"},
        {"output_dir", "out"},
        {"options", {{"linkage", "average"}, {"d_mode", "pooled"}, {"irr_method", "spearman"}, {"ridge_lambda", 1.0},
                     {"scale", {{"min", 0}, {"max", 100}, {"midpoint", 50}}}}},
        {"probe", {{"features", "probe/features.emb"}, {"generated", generated}, {"groups", groups}}},
    };
    detail::write_text(dir / "config.json", config.dump(2) + "\n");
    return dir / "config.json";
}

} // namespace faceaudit::fixture
