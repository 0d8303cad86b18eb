#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "faceaudit/association.hpp"
#include "faceaudit/corpus.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/report_io.hpp"
#include "faceaudit/stats.hpp"
#include "faceaudit/structure.hpp"
#include "faceaudit/subspace.hpp"
#include "faceaudit/util.hpp"

namespace faceaudit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
    Linkage linkage = Linkage::average;
    stats::DMode d_mode = stats::DMode::pooled;
    stats::CorrelationMethod irr_method = stats::CorrelationMethod::spearman;
    double ridge_lambda = 1.0;
    bool lambda_gcv = false;
    RatingScale scale;
    bool scale_is_default = true;
    unsigned threads = 1;
};

/// The option set embedded in every report (thread count omitted).
inline json options_json(const Options& o) {
    return {
        {"linkage", std::string(to_string(o.linkage))},
        {"d_mode", std::string(stats::to_string(o.d_mode))},
        {"irr_method", std::string(stats::to_string(o.irr_method))},
        {"ridge_lambda", o.lambda_gcv ? json("gcv") : json(o.ridge_lambda)},
        {"scale", {{"min", o.scale.min}, {"max", o.scale.max}, {"midpoint", o.scale.midpoint}}},
        {"scale_is_default", o.scale_is_default},
        {"cluster_distance", "1 - spearman_rho"},
        {"cluster_tie_break", "lowest leaf-index pair"},
        {"frobenius_diagonal", "included"},
        {"p_values", "two-sided"},
    };
}

struct ModelPaths {
    std::string model_id;
    fs::path images;
    fs::path texts;
};

struct PoleFiles {
    std::string attribute;
    std::optional<fs::path> pos;
    std::optional<fs::path> neg;
};

struct GroupFile {
    std::string name;
    fs::path path;
};

struct ProbeInputs {
    fs::path features;
    std::vector<PoleFiles> generated;
    std::vector<GroupFile> groups;
};

struct AuditConfig {
    std::optional<fs::path> attributes;
    fs::path ratings;
    fs::path irr;
    std::vector<ModelPaths> models;
    std::optional<fs::path> model_meta;
    fs::path output_dir = "audit_out";
    Options options;
    std::optional<ProbeInputs> probe;
    json echo = json::object();  // the config as written, for report provenance
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

inline void apply_lambda(Options& o, const json& value) {
    if (value.is_string()) {
        if (value.get<std::string>() != "gcv") throw ValidationError("ridge_lambda must be a number or \"gcv\"");
        o.lambda_gcv = true;
    } else {
        o.ridge_lambda = value.get<double>();
        o.lambda_gcv = false;
        if (!(o.ridge_lambda >= 0.0) || !std::isfinite(o.ridge_lambda)) throw ValidationError("ridge_lambda must be >= 0");
    }
}

inline void apply_lambda(Options& o, const std::string& text) {
    if (text == "gcv") apply_lambda(o, json("gcv"));
    else apply_lambda(o, json(parse_real(text, "--lambda")));
}

inline AuditConfig parse_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    AuditConfig c;
    c.echo = j;
    auto resolve = [&](const json& v) {
        fs::path p = v.get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
    };
    try {
        if (j.contains("attributes")) c.attributes = resolve(j.at("attributes"));
        if (j.contains("ratings")) c.ratings = resolve(j.at("ratings"));
        if (j.contains("irr")) c.irr = resolve(j.at("irr"));
        if (j.contains("model_meta")) c.model_meta = resolve(j.at("model_meta"));
        if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir"));

        std::map<std::string, fs::path> images, texts;
        std::vector<std::string> order;
        auto collect = [&](const char* key, std::map<std::string, fs::path>& into, bool record_order) {
            if (!j.contains(key)) return;
            for (const auto& e : j.at(key)) {
                auto id = e.at("model_id").get<std::string>();
                if (id.empty()) throw ValidationError(std::string(key) + ": empty model_id");
                if (!into.emplace(id, resolve(e.at("path"))).second) throw ValidationError(std::string(key) + ": duplicate model_id '" + id + "'");
                if (record_order) order.push_back(id);
            }
        };
        collect("image_embeddings", images, true);
        collect("text_embeddings", texts, false);
        for (const auto& id : order) {
            if (!texts.count(id)) throw ValidationError("model '" + id + "' has image embeddings but no text embeddings");
            c.models.push_back({id, images.at(id), texts.at(id)});
        }
        for (const auto& [id, path] : texts) {
            if (!images.count(id)) throw ValidationError("model '" + id + "' has text embeddings but no image embeddings");
        }

        if (j.contains("options")) {
            const auto& o = j.at("options");
            if (o.contains("linkage")) c.options.linkage = parse_linkage(o.at("linkage").get<std::string>());
            if (o.contains("d_mode")) c.options.d_mode = stats::parse_d_mode(o.at("d_mode").get<std::string>());
            if (o.contains("irr_method")) c.options.irr_method = stats::parse_correlation_method(o.at("irr_method").get<std::string>());
            if (o.contains("ridge_lambda")) apply_lambda(c.options, o.at("ridge_lambda"));
            if (o.contains("scale")) {
                const auto& s = o.at("scale");
                c.options.scale = {s.at("min").get<double>(), s.at("max").get<double>(), s.at("midpoint").get<double>()};
                c.options.scale.validate();
                c.options.scale_is_default = false;
            }
        }

        if (j.contains("probe")) {
            const auto& p = j.at("probe");
            ProbeInputs probe;
            probe.features = resolve(p.at("features"));
            if (p.contains("generated")) {
                for (const auto& g : p.at("generated")) {
                    PoleFiles poles{g.at("attribute").get<std::string>(), std::nullopt, std::nullopt};
                    if (g.contains("pos")) poles.pos = resolve(g.at("pos"));
                    if (g.contains("neg")) poles.neg = resolve(g.at("neg"));
                    probe.generated.push_back(std::move(poles));
                }
            }
            if (p.contains("groups")) {
                for (const auto& g : p.at("groups")) probe.groups.push_back({g.at("name").get<std::string>(), resolve(g.at("path"))});
            }
            c.probe = std::move(probe);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config: ") + e.what());
    }
    return c;
}

inline AuditConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path.string() + ": invalid JSON");
    return parse_config(j, path.parent_path());
}

inline void require_file(const fs::path& p, const std::string& what) {
    if (p.empty()) throw ValidationError("config lacks " + what);
    if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

inline std::vector<AttributeSpec> load_attributes(const AuditConfig& c) {
    return c.attributes ? read_attribute_config(*c.attributes) : default_attributes();
}

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

struct ModelAudit {
    std::string model_id;
    std::size_t images = 0;
    std::vector<std::string> dropped_embedding_ids;
    std::vector<std::string> dropped_rating_ids;
    std::vector<SimilarityRecord> similarity;
    CorrelationMatrix cat;
    Dendrogram dendrogram;
    double frobenius = stats::kNaN;
};

struct AuditResult {
    std::vector<std::string> attributes;
    Options options;
    std::size_t rating_images = 0;
    CorrelationMatrix human;
    Dendrogram human_dendrogram;
    std::vector<ModelAudit> models;
    json irr_correlation;
    json dataset_scale;  // null when model metadata is absent or has < 2 dataset sizes
};

namespace detail {

inline json correlation_json(const stats::Correlation& c) {
    return {{"coefficient", report::number(c.coefficient)}, {"p_value", report::number(c.p_value)}, {"n", c.n}};
}

inline json test_json(const stats::TestResult& t) {
    json j = {{"statistic", report::number(t.statistic)}, {"df", report::number(t.df)}, {"p_value", report::number(t.p_value)},
              {"kind", std::string(stats::to_string(t.kind))}};
    if (!std::isnan(t.df2)) j["df2"] = t.df2;
    return j;
}

inline std::map<std::string, double> mean_similarity(const std::vector<const ModelAudit*>& models,
                                                     const std::vector<std::string>& attributes) {
    std::map<std::string, double> out;
    for (std::size_t a = 0; a < attributes.size(); ++a) {
        double s = 0.0;
        for (const auto* m : models) s += m->similarity[a].rho;
        out[attributes[a]] = s / static_cast<double>(models.size());
    }
    return out;
}

inline json mean_similarity_json(const std::map<std::string, double>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[k] = report::number(v);
    return j;
}

inline json irr_section(const std::vector<ModelAudit>& models, const std::vector<std::string>& attributes, const IrrTable& irr,
                        const std::map<std::string, ModelMeta>& meta, stats::CorrelationMethod method) {
    json out;
    out["method"] = std::string(stats::to_string(method));
    out["irr"] = json::object();
    for (const auto& a : attributes) out["irr"][a] = irr.at(a);

    std::vector<const ModelAudit*> all;
    for (const auto& m : models) all.push_back(&m);
    auto all_mean = mean_similarity(all, attributes);
    out["all_models"] = correlation_json(irr_correlation(all_mean, irr, method));
    out["all_models"]["models"] = all.size();
    out["all_models"]["mean_similarity"] = mean_similarity_json(all_mean);

    out["per_model"] = json::object();
    for (const auto* m : all) {
        std::map<std::string, double> sims;
        for (const auto& r : m->similarity) sims[r.attribute] = r.rho;
        out["per_model"][m->model_id] = correlation_json(irr_correlation(sims, irr, method));
    }

    // Families in enum order; only models with metadata participate.
    std::map<ModelFamily, std::vector<const ModelAudit*>> families;
    for (const auto* m : all) {
        auto it = meta.find(m->model_id);
        if (it != meta.end()) families[it->second.family].push_back(m);
    }
    out["families"] = json::object();
    std::vector<std::pair<std::string, std::vector<double>>> family_means;
    for (const auto& [family, members] : families) {
        auto means = mean_similarity(members, attributes);
        json f = correlation_json(irr_correlation(means, irr, method));
        f["models"] = members.size();
        f["mean_similarity"] = mean_similarity_json(means);
        out["families"][std::string(to_string(family))] = f;
        std::vector<double> v;
        for (const auto& a : attributes) v.push_back(means.at(a));
        family_means.emplace_back(std::string(to_string(family)), std::move(v));
    }
    out["family_pairwise"] = json::array();
    for (std::size_t i = 0; i < family_means.size(); ++i) {
        for (std::size_t j = i + 1; j < family_means.size(); ++j) {
            json e = {{"a", family_means[i].first}, {"b", family_means[j].first}, {"method", "pearson"}};
            try {
                e.update(correlation_json(stats::pearson(family_means[i].second, family_means[j].second)));
            } catch (const Error& err) {
                e["error"] = err.what();
            }
            out["family_pairwise"].push_back(e);
        }
    }
    return out;
}

/// Groups Scaling-family models by pretraining dataset size and compares
/// levels with paired t-tests (models paired by architecture and samples
/// seen), Cohen's d, and a one-way ANOVA on structural similarity.
inline json dataset_scale_section(const std::vector<ModelAudit>& models, const std::vector<std::string>& attributes,
                                  const std::map<std::string, ModelMeta>& meta, stats::DMode d_mode) {
    using Key = std::tuple<double, double, double>;  // image params, text params, total samples
    std::map<double, std::map<Key, const ModelAudit*>> levels;
    for (const auto& m : models) {
        auto it = meta.find(m.model_id);
        if (it == meta.end() || it->second.family != ModelFamily::scaling) continue;
        const auto& mm = it->second;
        levels[mm.dataset_size][Key{mm.image_params, mm.text_params, mm.total_training_samples}] = &m;
    }
    if (levels.size() < 2) return nullptr;

    std::vector<double> sizes;
    for (const auto& [size, _] : levels) sizes.push_back(size);
    const std::size_t comparisons = sizes.size() * (sizes.size() - 1) / 2;

    json out;
    out["family"] = "scaling";
    out["d_mode"] = std::string(stats::to_string(d_mode));
    out["bonferroni_m"] = comparisons;
    out["levels"] = json::array();
    for (double size : sizes) {
        json level = {{"dataset_size", size}, {"models", json::array()}, {"attributes", json::object()}};
        for (const auto& [key, m] : levels[size]) level["models"].push_back(m->model_id);
        for (std::size_t a = 0; a < attributes.size(); ++a) {
            std::vector<double> v;
            for (const auto& [key, m] : levels[size]) v.push_back(m->similarity[a].rho);
            json s = {{"mean", stats::mean(v)}, {"max", *std::max_element(v.begin(), v.end())}};
            s["sd"] = v.size() >= 2 ? report::number(stats::stddev(v)) : json(nullptr);
            level["attributes"][attributes[a]] = s;
        }
        out["levels"].push_back(level);
    }

    auto compare = [&](std::size_t hi, std::size_t lo, auto&& value) {
        json e = {{"a", sizes[hi]}, {"b", sizes[lo]}};
        std::vector<double> va, vb;
        for (const auto& [key, m] : levels[sizes[hi]]) {
            auto other = levels[sizes[lo]].find(key);
            if (other == levels[sizes[lo]].end()) continue;
            va.push_back(value(*m));
            vb.push_back(value(*other->second));
        }
        e["pairs"] = va.size();
        try {
            auto t = stats::paired_t(va, vb);
            e["t"] = report::number(t.statistic);
            e["df"] = t.df;
            e["p_value"] = report::number(t.p_value);
            e["p_bonferroni"] = report::number(stats::bonferroni(t.p_value, comparisons));
            e["d"] = report::number(stats::cohens_d(va, vb, d_mode));
        } catch (const Error& err) {
            e["error"] = err.what();
        }
        return e;
    };

    out["pairwise"] = json::array();
    for (std::size_t lo = 0; lo < sizes.size(); ++lo) {
        for (std::size_t hi = lo + 1; hi < sizes.size(); ++hi) {
            json p = {{"a", sizes[hi]}, {"b", sizes[lo]}, {"attributes", json::object()}};
            for (std::size_t a = 0; a < attributes.size(); ++a) {
                json e = compare(hi, lo, [a](const ModelAudit& m) { return m.similarity[a].rho; });
                e.erase("a");
                e.erase("b");
                p["attributes"][attributes[a]] = e;
            }
            out["pairwise"].push_back(p);
        }
    }

    json frob;
    std::vector<std::vector<double>> groups;
    for (double size : sizes) {
        std::vector<double> g;
        for (const auto& [key, m] : levels[size]) g.push_back(m->frobenius);
        groups.push_back(std::move(g));
    }
    try {
        auto anova = stats::one_way_anova(groups);
        frob["anova"] = detail::test_json(anova);
        frob["anova"]["eta_squared"] = report::number(anova.effect_size.value_or(stats::kNaN));
    } catch (const Error& err) {
        frob["anova"] = {{"error", err.what()}};
    }
    frob["posthoc"] = json::array();
    for (std::size_t lo = 0; lo < sizes.size(); ++lo)
        for (std::size_t hi = lo + 1; hi < sizes.size(); ++hi)
            frob["posthoc"].push_back(compare(hi, lo, [](const ModelAudit& m) { return m.frobenius; }));
    out["frobenius"] = frob;
    return out;
}

} // namespace detail

inline AuditResult run_audit(const AuditConfig& config) {
    require_file(config.ratings, "ratings file");
    require_file(config.irr, "IRR file");
    if (config.attributes) require_file(*config.attributes, "attribute config");
    if (config.model_meta) require_file(*config.model_meta, "model metadata file");
    if (config.models.empty()) throw ValidationError("config lists no models");
    for (const auto& m : config.models) {
        require_file(m.images, "image embeddings for '" + m.model_id + "'");
        require_file(m.texts, "text embeddings for '" + m.model_id + "'");
    }

    const Options& opt = config.options;
    const auto specs = load_attributes(config);
    const auto ratings = read_ratings(config.ratings, opt.scale);
    const auto irr = read_irr(config.irr);

    AuditResult result;
    result.options = opt;
    for (const auto& s : specs) {
        if (!ratings.find_attribute(s.name)) throw ValidationError("ratings have no attribute '" + s.name + "'");
        result.attributes.push_back(s.name);
    }
    irr.require(result.attributes);
    result.rating_images = ratings.image_count();

    std::map<std::string, ModelMeta> meta;
    if (config.model_meta) {
        for (auto& m : read_model_meta(*config.model_meta)) meta.emplace(m.model_id, m);
    }

    // Human structure over all rated images, same estimator as the models.
    std::vector<NamedColumn> human_columns;
    for (const auto& a : result.attributes) human_columns.emplace_back(a, ratings.column(a));
    result.human = correlation_matrix(human_columns, opt.threads);
    result.human_dendrogram = hcluster(result.human, opt.linkage);

    struct Loaded {
        AlignedCorpus corpus;
        EmbeddingMatrix text;
    };
    std::vector<Loaded> loaded;
    for (const auto& m : config.models) {
        auto images = read_embeddings(m.images);
        auto text = read_embeddings(m.texts);
        if (images.meta() && !images.meta()->model_id.empty() && images.meta()->model_id != m.model_id) {
            throw ValidationError(m.images.string() + ": metadata model_id '" + images.meta()->model_id + "' != config '" + m.model_id + "'");
        }
        loaded.push_back({align(images, ratings), std::move(text)});
    }

    const std::size_t n_models = config.models.size();
    const std::size_t n_attr = specs.size();
    result.models.resize(n_models);
    std::vector<std::vector<AssociationVector>> assoc(n_models, std::vector<AssociationVector>(n_attr));
    for (std::size_t m = 0; m < n_models; ++m) {
        auto& out = result.models[m];
        out.model_id = config.models[m].model_id;
        out.images = loaded[m].corpus.size();
        out.dropped_embedding_ids = loaded[m].corpus.dropped_embedding_ids;
        out.dropped_rating_ids = loaded[m].corpus.dropped_rating_ids;
        out.similarity.resize(n_attr);
    }

    parallel_for(n_models * n_attr, opt.threads, [&](std::size_t item) {
        const std::size_t m = item / n_attr;
        const std::size_t a = item % n_attr;
        const auto& corpus = loaded[m].corpus;
        auto v = association_vector(corpus, specs[a], loaded[m].text);
        v.model_id = config.models[m].model_id;
        auto human = corpus.ratings.column(specs[a].name);
        result.models[m].similarity[a] = model_human_similarity(v, human);
        assoc[m][a] = std::move(v);
    });

    parallel_for(n_models, opt.threads, [&](std::size_t m) {
        auto& out = result.models[m];
        out.cat = cat_matrix(assoc[m]);
        out.cat.validate();
        out.dendrogram = hcluster(out.cat, opt.linkage);
        out.frobenius = frobenius_similarity(out.cat, result.human, out.model_id).value;
    });

    result.irr_correlation = detail::irr_section(result.models, result.attributes, irr, meta, opt.irr_method);
    result.dataset_scale = detail::dataset_scale_section(result.models, result.attributes, meta, opt.d_mode);
    return result;
}

inline void write_audit(const AuditResult& r, const AuditConfig& config, report::OutputSet& out, const std::string& timestamp) {
    std::vector<SimilarityRecord> all;
    std::vector<StructuralSimilarity> frob;
    std::set<std::string> dirs;
    for (const auto& m : r.models) {
        all.insert(all.end(), m.similarity.begin(), m.similarity.end());
        frob.push_back({m.model_id, m.frobenius});
        if (!dirs.insert(report::path_component(m.model_id)).second) {
            throw ValidationError("model ids collide after path sanitization: '" + m.model_id + "'");
        }
    }
    out.write("similarity.csv", report::similarity_csv(all));
    out.write("frobenius.csv", report::frobenius_csv(frob));
    out.write("irr_correlation.json", r.irr_correlation.dump(2) + "\n");
    out.write("human/cat_matrix.csv", report::matrix_csv(r.human));
    out.write("human/dendrogram.nwk", to_newick(r.human_dendrogram) + "\n");

    json models = json::array();
    for (const auto& m : r.models) {
        const fs::path dir = fs::path("models") / report::path_component(m.model_id);
        out.write(dir / "cat_matrix.csv", report::matrix_csv(m.cat));
        out.write(dir / "dendrogram.nwk", to_newick(m.dendrogram) + "\n");

        json sim = json::object();
        double mean = 0.0;
        for (const auto& s : m.similarity) {
            sim[s.attribute] = {{"rho", report::number(s.rho)}, {"p_value", report::number(s.p_value)}, {"n", s.n}};
            mean += s.rho;
        }
        models.push_back({
            {"model_id", m.model_id},
            {"images", m.images},
            {"dropped_embedding_ids", m.dropped_embedding_ids},
            {"dropped_rating_ids", m.dropped_rating_ids},
            {"mean_similarity", report::number(mean / static_cast<double>(m.similarity.size()))},
            {"similarity", sim},
            {"frobenius", report::number(m.frobenius)},
            {"cat_matrix", (dir / "cat_matrix.csv").generic_string()},
            {"dendrogram", (dir / "dendrogram.nwk").generic_string()},
        });
    }

    json audit = {
        {"tool", "faceaudit"},
        {"version", kVersion},
        {"timestamp", timestamp},
        {"command", "audit"},
        {"config", config.echo},
        {"options", options_json(r.options)},
        {"attributes", r.attributes},
        {"rating_images", r.rating_images},
        {"models", models},
        {"human", {{"cat_matrix", "human/cat_matrix.csv"}, {"dendrogram", "human/dendrogram.nwk"}}},
        {"irr_correlation", r.irr_correlation},
        {"dataset_scale", r.dataset_scale},
    };
    if (r.options.scale_is_default) {
        audit["warnings"] = json::array({"rating scale not configured; assumed {min 0, max 100, midpoint 50}"});
    }
    out.write("audit.json", audit.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Regression on model-human similarity
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& regression_variables() {
    static const std::vector<std::string> names = {"Human IRR", "Dataset Size", "Total Samples", "Image Params", "Text Params", "Constant"};
    return names;
}

struct RegressionReport {
    stats::RegressionFit fit;
    json normalization;
};

/// Joins similarity rows with IRR (by attribute) and model metadata (by
/// model id), max-normalizes each predictor whose range leaves (0, 1), and
/// fits OLS with a trailing constant.
inline RegressionReport run_regression(const std::vector<SimilarityRecord>& records, const IrrTable& irr,
                                       const std::vector<ModelMeta>& models) {
    std::map<std::string, ModelMeta> meta;
    for (const auto& m : models) meta.emplace(m.model_id, m);

    std::vector<std::vector<double>> raw(5);
    std::vector<double> y;
    for (const auto& r : records) {
        auto irr_value = irr.find(r.attribute);
        if (!irr_value) throw ValidationError("no IRR for attribute '" + r.attribute + "'");
        auto it = meta.find(r.model_id);
        if (it == meta.end()) throw ValidationError("no metadata for model '" + r.model_id + "'");
        raw[0].push_back(*irr_value);
        raw[1].push_back(it->second.dataset_size);
        raw[2].push_back(it->second.total_training_samples);
        raw[3].push_back(it->second.image_params);
        raw[4].push_back(it->second.text_params);
        y.push_back(r.rho);
    }

    RegressionReport rep;
    rep.normalization = json::object();
    std::vector<std::vector<double>> columns;
    for (std::size_t j = 0; j < raw.size(); ++j) {
        auto col = stats::normalize_by_max(raw[j]);
        const bool scaled = col != raw[j];
        rep.normalization[regression_variables()[j]] = {
            {"divided_by_max", scaled}, {"max", *std::max_element(raw[j].begin(), raw[j].end())}};
        columns.push_back(std::move(col));
    }
    auto X = stats::design_with_intercept(columns, y.size());
    rep.fit = stats::ols(X, y, regression_variables());
    return rep;
}

inline json regression_json(const RegressionReport& rep, const std::string& timestamp) {
    const auto& f = rep.fit;
    json vars = json::array();
    for (std::size_t j = 0; j < f.names.size(); ++j) {
        vars.push_back({{"name", f.names[j]},
                        {"coef", report::number(f.coefficients[j])},
                        {"std_err", report::number(f.std_errors[j])},
                        {"t", report::number(f.t_values[j])},
                        {"p", report::number(f.p_values[j])}});
    }
    return {{"tool", "faceaudit"},
            {"version", kVersion},
            {"timestamp", timestamp},
            {"command", "regress"},
            {"adj_r2", report::number(f.adj_r2)},
            {"r2", report::number(f.r2)},
            {"f_statistic", report::number(f.f_statistic)},
            {"f_p_value", report::number(f.f_p_value)},
            {"n", f.n},
            {"df_resid", f.df_resid},
            {"df_model", f.df_model},
            {"variables", vars},
            {"normalization", rep.normalization},
            {"p_values", "two-sided"}};
}

// ---------------------------------------------------------------------------
// Subspace probe
// ---------------------------------------------------------------------------

struct ProbeResult {
    Options options;
    std::size_t training_images = 0;
    std::vector<AttributeSubspace> subspaces;
    std::vector<ProjectionResult> classification;
    std::vector<DifferentialBias> bias;
    std::string group_a;
    std::string group_b;
};

inline ProbeResult run_probe(const AuditConfig& config) {
    if (!config.probe) throw ValidationError("config has no \"probe\" section");
    const auto& probe = *config.probe;
    const Options& opt = config.options;
    require_file(config.ratings, "ratings file");
    require_file(probe.features, "probe feature embeddings");
    if (config.attributes) require_file(*config.attributes, "attribute config");
    for (const auto& g : probe.generated) {
        if (!g.pos || !g.neg) {
            throw InsufficientDataError("probe attribute '" + g.attribute + "' needs both 'pos' and 'neg' embeddings; only " +
                                        (g.pos ? "pos" : g.neg ? "neg" : "neither") + " supplied");
        }
        require_file(*g.pos, "generated pos embeddings for '" + g.attribute + "'");
        require_file(*g.neg, "generated neg embeddings for '" + g.attribute + "'");
    }
    if (!probe.groups.empty() && probe.groups.size() != 2) throw ValidationError("probe groups must list exactly two groups");
    for (const auto& g : probe.groups) require_file(g.path, "group embeddings for '" + g.name + "'");

    const auto specs = load_attributes(config);
    const auto ratings = read_ratings(config.ratings, opt.scale);
    auto corpus = align(read_embeddings(probe.features), ratings);
    RidgeProblem problem(to_matrix(corpus.embeddings));

    ProbeResult result;
    result.options = opt;
    result.training_images = corpus.size();
    result.subspaces.resize(specs.size());
    for (const auto& s : specs) {
        if (!ratings.find_attribute(s.name)) throw ValidationError("ratings have no attribute '" + s.name + "'");
    }
    parallel_for(specs.size(), opt.threads, [&](std::size_t a) {
        auto h = corpus.ratings.column(specs[a].name);
        double lambda = opt.ridge_lambda;
        if (opt.lambda_gcv) {
            auto grid = default_lambda_grid();
            lambda = problem.select_lambda(h, opt.scale.midpoint, grid);
        }
        result.subspaces[a] = problem.fit(specs[a].name, h, lambda, opt.scale.midpoint);
    });

    auto find_subspace = [&](const std::string& name) -> const AttributeSubspace& {
        for (const auto& s : result.subspaces)
            if (s.attribute == name) return s;
        throw ValidationError("no subspace for attribute '" + name + "'");
    };
    for (const auto& g : probe.generated) {
        const auto& sub = find_subspace(g.attribute);
        result.classification.push_back(classify_projections(read_embeddings(*g.pos), read_embeddings(*g.neg), sub));
    }

    if (probe.groups.size() == 2) {
        auto a = read_embeddings(probe.groups[0].path);
        auto b = read_embeddings(probe.groups[1].path);
        result.group_a = probe.groups[0].name;
        result.group_b = probe.groups[1].name;
        for (const auto& sub : result.subspaces) {
            result.bias.push_back(differential_bias(project_all(a, sub), project_all(b, sub), opt.d_mode, sub.attribute,
                                                    result.group_a, result.group_b));
        }
    }
    return result;
}

inline void write_probe(const ProbeResult& r, const AuditConfig& config, report::OutputSet& out, const std::string& timestamp) {
    std::string metrics = csv::join({"attribute", "precision", "recall", "f1"});
    for (const auto& c : r.classification) {
        metrics += csv::join({c.attribute, format_real(c.precision), format_real(c.recall), format_real(c.f1)});
    }
    out.write("probe_metrics.csv", metrics);

    if (!r.bias.empty()) {
        std::string bias = csv::join({"attribute", "d", "t", "p"});
        for (const auto& b : r.bias) bias += csv::join({b.attribute, format_real(b.d), format_real(b.t), format_real(b.p)});
        out.write("differential_bias.csv", bias);
    }

    json subspaces = json::array();
    for (const auto& s : r.subspaces) {
        const fs::path file = fs::path("subspaces") / (report::path_component(s.attribute) + ".emb");
        out.write_with(file, [&](const fs::path& p) { write_subspace(s, p); });
        subspaces.push_back({{"attribute", s.attribute},
                             {"ridge_lambda", s.ridge_lambda},
                             {"train_r2", report::number(s.train_r2)},
                             {"intercept", report::number(s.intercept)},
                             {"weight_norm", report::number(s.weights.norm())},
                             {"file", file.generic_string()}});
    }
    json classification = json::array();
    for (const auto& c : r.classification) {
        classification.push_back({{"attribute", c.attribute},
                                  {"images", c.labels.size()},
                                  {"precision", c.precision},
                                  {"recall", c.recall},
                                  {"f1", c.f1}});
    }
    json bias = json::array();
    for (const auto& b : r.bias) {
        bias.push_back({{"attribute", b.attribute}, {"d", report::number(b.d)}, {"t", report::number(b.t)}, {"p", report::number(b.p)}});
    }
    json summary = {
        {"tool", "faceaudit"},
        {"version", kVersion},
        {"timestamp", timestamp},
        {"command", "probe"},
        {"config", config.echo},
        {"options", options_json(r.options)},
        {"training_images", r.training_images},
        {"subspaces", subspaces},
        {"classification", classification},
        {"differential_bias", {{"group_a", r.group_a}, {"group_b", r.group_b}, {"d_mode", std::string(stats::to_string(r.options.d_mode))}, {"results", bias}}},
    };
    out.write("probe.json", summary.dump(2) + "\n");
}

} // namespace faceaudit::pipeline
