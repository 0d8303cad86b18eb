#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "faceaudit/faceaudit.hpp"

namespace fa = faceaudit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::string config;
    std::string out;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string linkage;
    std::string d_mode;
    std::string irr_method;
    std::string lambda;
};

void apply_overrides(fa::pipeline::AuditConfig& c, const Globals& g) {
    if (!g.out.empty()) c.output_dir = g.out;
    if (!g.linkage.empty()) c.options.linkage = fa::parse_linkage(g.linkage);
    if (!g.d_mode.empty()) c.options.d_mode = fa::stats::parse_d_mode(g.d_mode);
    if (!g.irr_method.empty()) c.options.irr_method = fa::stats::parse_correlation_method(g.irr_method);
    if (!g.lambda.empty()) fa::pipeline::apply_lambda(c.options, g.lambda);
    c.options.threads = g.threads;
}

fa::pipeline::AuditConfig load(const Globals& g) {
    if (g.config.empty()) throw fa::ValidationError("--config is required");
    auto c = fa::pipeline::load_config(g.config);
    apply_overrides(c, g);
    return c;
}

fs::path out_dir(const Globals& g, const char* fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

int cmd_audit(const Globals& g) {
    auto config = load(g);
    auto result = fa::pipeline::run_audit(config);
    fa::report::OutputSet out(config.output_dir);
    fa::pipeline::write_audit(result, config, out, fa::pipeline::utc_timestamp());
    out.commit();
    std::cout << "audit: " << result.models.size() << " model(s), " << result.attributes.size() << " attribute(s) -> "
              << config.output_dir.string() << "\n";
    return 0;
}

struct RegressArgs {
    std::string similarities, irr, meta;
};

int cmd_regress(const Globals& g, const RegressArgs& a) {
    std::string sim = a.similarities, irr = a.irr, meta = a.meta;
    fs::path dir = out_dir(g, ".");
    if (!g.config.empty()) {
        auto c = load(g);
        if (irr.empty()) irr = c.irr.string();
        if (meta.empty() && c.model_meta) meta = c.model_meta->string();
        if (sim.empty()) sim = (c.output_dir / "similarity.csv").string();
        if (g.out.empty()) dir = c.output_dir;
    }
    if (sim.empty() || irr.empty() || meta.empty()) throw fa::ValidationError("regress needs --similarities, --irr and --meta (or --config)");
    fa::pipeline::require_file(sim, "similarity table");
    fa::pipeline::require_file(irr, "IRR file");
    fa::pipeline::require_file(meta, "model metadata file");
    auto rep = fa::pipeline::run_regression(fa::report::read_similarity_csv(sim), fa::read_irr(irr), fa::read_model_meta(meta));
    fa::report::OutputSet out(dir);
    out.write("regression.json", fa::pipeline::regression_json(rep, fa::pipeline::utc_timestamp()).dump(2) + "\n");
    out.commit();
    std::cout << "regress: n=" << rep.fit.n << " adj_r2=" << fa::format_real(rep.fit.adj_r2) << "\n";
    return 0;
}

int cmd_probe(const Globals& g) {
    auto config = load(g);
    auto result = fa::pipeline::run_probe(config);
    fa::report::OutputSet out(config.output_dir);
    fa::pipeline::write_probe(result, config, out, fa::pipeline::utc_timestamp());
    out.commit();
    std::cout << "probe: " << result.subspaces.size() << " subspace(s) -> " << config.output_dir.string() << "\n";
    return 0;
}

struct CatArgs {
    std::string images, text, attributes;
};

int cmd_cat(const Globals& g, const CatArgs& a) {
    fa::pipeline::require_file(a.images, "image embeddings");
    fa::pipeline::require_file(a.text, "text embeddings");
    auto specs = a.attributes.empty() ? fa::default_attributes() : fa::read_attribute_config(a.attributes);
    auto images = fa::read_embeddings(a.images);
    auto text = fa::read_embeddings(a.text);
    std::vector<fa::AssociationVector> assoc(specs.size());
    fa::parallel_for(specs.size(), g.threads, [&](std::size_t i) {
        assoc[i] = fa::association_vector(images, specs[i], text);
        assoc[i].model_id.clear();
    });
    auto m = fa::cat_matrix(assoc, g.threads);
    m.validate();
    fa::report::OutputSet out(out_dir(g, "."));
    out.write("cat_matrix.csv", fa::report::matrix_csv(m));
    out.commit();
    return 0;
}

int cmd_cluster(const Globals& g, const std::string& matrix) {
    fa::pipeline::require_file(matrix, "correlation matrix");
    auto m = fa::report::read_matrix_csv(matrix);
    auto linkage = g.linkage.empty() ? fa::Linkage::average : fa::parse_linkage(g.linkage);
    auto nwk = fa::to_newick(fa::hcluster(m, linkage)) + "\n";
    if (g.out.empty()) {
        std::cout << nwk;
    } else {
        fa::report::OutputSet out(g.out);
        out.write("dendrogram.nwk", nwk);
        out.commit();
    }
    return 0;
}

int cmd_frobenius(const std::string& model, const std::string& human) {
    fa::pipeline::require_file(model, "model matrix");
    fa::pipeline::require_file(human, "human matrix");
    auto s = fa::frobenius_similarity(fa::report::read_matrix_csv(model), fa::report::read_matrix_csv(human));
    std::cout << fa::format_real(s.value) << "\n";
    return 0;
}

int cmd_inspect(const std::string& path) {
    fa::pipeline::require_file(path, "embedding file");
    auto m = fa::read_embeddings(path);
    double min_norm = 0, max_norm = 0;
    for (std::size_t i = 0; i < m.count(); ++i) {
        double s = 0;
        for (float v : m.row(i)) s += static_cast<double>(v) * v;
        s = std::sqrt(s);
        min_norm = i == 0 ? s : std::min(min_norm, s);
        max_norm = i == 0 ? s : std::max(max_norm, s);
    }
    json j = {{"path", path}, {"dim", m.dim()}, {"count", m.count()}, {"min_norm", min_norm}, {"max_norm", max_norm}};
    j["meta"] = m.meta() ? fa::emb1::meta_to_json(*m.meta()) : json(nullptr);
    json head = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(5, m.count()); ++i) head.push_back(m.ids()[i]);
    j["first_ids"] = head;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_fixture(const Globals& g, const fa::fixture::Options& opt) {
    auto config = fa::fixture::write_fixture(out_dir(g, "fixture"), opt);
    std::cout << config.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Facial-impression bias audit for vision-language embeddings"};
    app.set_version_flag("--version", fa::kVersion);
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config, "Audit config JSON");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--linkage", g.linkage, "average | complete | single");
    app.add_option("--d-mode", g.d_mode, "pooled | paired");
    app.add_option("--irr-method", g.irr_method, "spearman | pearson");
    app.add_option("--lambda", g.lambda, "Ridge penalty, or 'gcv'");

    auto* audit = app.add_subcommand("audit", "Model-human similarity, CAT matrices, dendrograms, Frobenius similarity");
    RegressArgs regress_args;
    auto* regress = app.add_subcommand("regress", "OLS of similarity on IRR and model scale");
    regress->add_option("--similarities", regress_args.similarities, "similarity.csv from an audit");
    regress->add_option("--irr", regress_args.irr, "IRR CSV");
    regress->add_option("--meta", regress_args.meta, "Model metadata CSV");
    auto* probe = app.add_subcommand("probe", "Ridge attribute subspaces, pole classification, differential bias");
    CatArgs cat_args;
    auto* cat = app.add_subcommand("cat", "CAT matrix for one model");
    cat->add_option("--images", cat_args.images, "Image EMB1 file")->required();
    cat->add_option("--text", cat_args.text, "Prompt EMB1 file")->required();
    cat->add_option("--attributes", cat_args.attributes, "Attribute config JSON");
    std::string matrix;
    auto* cluster = app.add_subcommand("cluster", "Dendrogram (Newick) from a correlation matrix CSV");
    cluster->add_option("matrix", matrix, "Matrix CSV")->required();
    std::string model_matrix, human_matrix;
    auto* frob = app.add_subcommand("frobenius", "Normalized Frobenius similarity of two matrix CSVs");
    frob->add_option("model", model_matrix)->required();
    frob->add_option("human", human_matrix)->required();
    auto* emb = app.add_subcommand("emb", "EMB1 utilities");
    emb->require_subcommand(1);
    std::string emb_path;
    auto* inspect = emb->add_subcommand("inspect", "Summarize an EMB1 file");
    inspect->add_option("file", emb_path)->required();
    fa::fixture::Options fixture_opt;
    auto* fixture = app.add_subcommand("fixture", "Write a seeded synthetic input set");
    fixture->add_option("--seed", fixture_opt.seed);
    fixture->add_option("--images", fixture_opt.images);
    fixture->add_option("--attributes", fixture_opt.attributes);
    fixture->add_option("--models", fixture_opt.models);
    fixture->add_option("--feature-dim", fixture_opt.feature_dim);

    for (auto* sub : {audit, regress, probe, cat, cluster, frob, emb, fixture}) sub->fallthrough();
    inspect->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*audit) return cmd_audit(g);
        if (*regress) return cmd_regress(g, regress_args);
        if (*probe) return cmd_probe(g);
        if (*cat) return cmd_cat(g, cat_args);
        if (*cluster) return cmd_cluster(g, matrix);
        if (*frob) return cmd_frobenius(model_matrix, human_matrix);
        if (*inspect) return cmd_inspect(emb_path);
        if (*fixture) return cmd_fixture(g, fixture_opt);
        return 4;
    } catch (const fa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == fa::ErrorKind::input ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
