#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "faceaudit/faceaudit.hpp"
#include "oracles.hpp"

using namespace faceaudit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const oracle::TempDir& tmp, const std::string& args) {
    const auto out = tmp / "stdout.txt", err = tmp / "stderr.txt";
    const std::string cmd = std::string("\"") + FACEAUDIT_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// All report files under `dir`, with audit.json's timestamp blanked.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), dir).generic_string();
        auto body = slurp(e.path());
        if (rel == "audit.json" || rel == "probe.json") {
            auto j = nlohmann::json::parse(body);
            j["timestamp"] = "";
            body = j.dump();
        }
        files[rel] = body;
    }
    return files;
}

} // namespace

TEST(Cli, AuditWritesReportsAndReruns) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx");
    auto r = run(tmp, "audit --config " + q(config) + " --out " + q(tmp / "a"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("12 model(s)"), std::string::npos);
    for (const char* f : {"similarity.csv", "frobenius.csv", "irr_correlation.json", "audit.json", "human/dendrogram.nwk"})
        EXPECT_TRUE(fs::exists(tmp / "a" / f)) << f;
    auto audit = nlohmann::json::parse(slurp(tmp / "a" / "audit.json"));
    EXPECT_EQ(audit["command"], "audit");
    EXPECT_FALSE(audit.contains("warnings"));

    auto first = snapshot(tmp / "a");
    ASSERT_EQ(run(tmp, "--threads 5 audit --config " + q(config) + " --out " + q(tmp / "b")).code, 0);
    EXPECT_EQ(snapshot(tmp / "b"), first);
}

TEST(Cli, OverridesReachTheReport) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx", {.models = 1});
    auto r = run(tmp, "audit --config " + q(config) + " --out " + q(tmp / "a") + " --linkage complete --d-mode paired --irr-method pearson");
    ASSERT_EQ(r.code, 0) << r.err;
    auto options = nlohmann::json::parse(slurp(tmp / "a" / "audit.json"))["options"];
    EXPECT_EQ(options["linkage"], "complete");
    EXPECT_EQ(options["d_mode"], "paired");
    EXPECT_EQ(options["irr_method"], "pearson");
}

TEST(Cli, MissingRatingsIsInputErrorAndLeavesNoOutput) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx", {.models = 1});
    fs::remove(tmp / "fx" / "ratings.csv");
    auto r = run(tmp, "audit --config " + q(config) + " --out " + q(tmp / "a"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ratings.csv"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(tmp / "a"));
}

TEST(Cli, FailedWriteRollsBackEarlierFiles) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx", {.models = 1});
    fs::create_directories(tmp / "a");
    { std::ofstream(tmp / "a" / "models") << "not a directory"; }
    auto r = run(tmp, "audit --config " + q(config) + " --out " + q(tmp / "a"));
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_FALSE(fs::exists(tmp / "a" / "similarity.csv"));
    EXPECT_FALSE(fs::exists(tmp / "a" / "human"));
    EXPECT_TRUE(fs::exists(tmp / "a" / "models"));
}

TEST(Cli, UsageErrors) {
    oracle::TempDir tmp;
    EXPECT_EQ(run(tmp, "audit --bogus").code, 2);
    EXPECT_EQ(run(tmp, "").code, 2);
    EXPECT_EQ(run(tmp, "--threads 0 audit").code, 2);
    EXPECT_EQ(run(tmp, "audit").code, 2);
    EXPECT_EQ(run(tmp, "--help").code, 0);
    auto v = run(tmp, "--version");
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(kVersion), std::string::npos);
}

TEST(Cli, RegressCollinearDesignIsNumericalError) {
    oracle::TempDir tmp;
    std::string sims = "model_id,attribute,rho,p_value,n\n", meta = "model_id,family,dataset_size,total_training_samples,image_params,text_params\n";
    for (int m = 0; m < 5; ++m) {
        const std::string id = "m" + std::to_string(m);
        for (const char* a : {"x", "y"}) sims += id + "," + a + "," + std::to_string(0.1 * m + (a[0] == 'x' ? 0.2 : 0.5)) + ",0.01,30\n";
        const std::string p = std::to_string((m + 2) * 10000000);
        meta += id + ",scaling," + std::to_string((m + 1) * 100000000) + "," + std::to_string((m % 2 + 1) * 3000000000LL) + "," + p + "," + p + "\n";
    }
    { std::ofstream(tmp / "sim.csv") << sims; }
    { std::ofstream(tmp / "meta.csv") << meta; }
    { std::ofstream(tmp / "irr.csv") << "attribute,irr\nx,0.4\ny,0.8\n"; }
    auto r = run(tmp, "regress --similarities " + q(tmp / "sim.csv") + " --irr " + q(tmp / "irr.csv") + " --meta " + q(tmp / "meta.csv") +
                          " --out " + q(tmp / "r"));
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_FALSE(fs::exists(tmp / "r"));
}

TEST(Cli, RegressAfterAudit) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx");
    ASSERT_EQ(run(tmp, "audit --config " + q(config)).code, 0);
    auto r = run(tmp, "regress --config " + q(config));
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(slurp(tmp / "fx" / "out" / "regression.json"));
    EXPECT_EQ(j["n"], 36);
    EXPECT_EQ(j["variables"].size(), 6u);
}

TEST(Cli, ProbeAndSinglePole) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx", {.images = 80, .models = 1});
    auto r = run(tmp, "--lambda gcv probe --config " + q(config) + " --out " + q(tmp / "p"));
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(slurp(tmp / "p" / "probe.json"));
    EXPECT_EQ(j["options"]["ridge_lambda"], "gcv");
    for (const auto& c : j["classification"]) EXPECT_GE(c["f1"].get<double>(), 0.9);

    auto cfg = nlohmann::json::parse(slurp(config));
    cfg["probe"]["generated"][1].erase("neg");
    { std::ofstream(tmp / "fx" / "one_pole.json") << cfg.dump(); }
    auto bad = run(tmp, "probe --config " + q(tmp / "fx" / "one_pole.json") + " --out " + q(tmp / "p2"));
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("attractive"), std::string::npos) << bad.err;
    EXPECT_FALSE(fs::exists(tmp / "p2"));
}

TEST(Cli, MatrixSubcommands) {
    oracle::TempDir tmp;
    auto config = fixture::write_fixture(tmp / "fx", {.models = 1});
    auto fx = tmp / "fx";
    auto c = run(tmp, "cat --images " + q(fx / "embeddings/fixture-0_images.emb") + " --text " + q(fx / "embeddings/fixture-0_text.emb") +
                          " --attributes " + q(fx / "attributes.json") + " --out " + q(tmp / "c"));
    ASSERT_EQ(c.code, 0) << c.err;
    ASSERT_EQ(run(tmp, "audit --config " + q(config) + " --out " + q(tmp / "a")).code, 0);
    EXPECT_EQ(slurp(tmp / "c" / "cat_matrix.csv"), slurp(tmp / "a" / "models/fixture-0/cat_matrix.csv"));

    auto cl = run(tmp, "cluster " + q(tmp / "c" / "cat_matrix.csv"));
    ASSERT_EQ(cl.code, 0) << cl.err;
    EXPECT_EQ(cl.out, slurp(tmp / "a" / "models/fixture-0/dendrogram.nwk"));

    auto f = run(tmp, "frobenius " + q(tmp / "c" / "cat_matrix.csv") + " " + q(tmp / "c" / "cat_matrix.csv"));
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_NEAR(std::stod(f.out), 1.0, 1e-12);

    auto frob_csv = slurp(tmp / "a" / "frobenius.csv");
    auto vs_human = run(tmp, "frobenius " + q(tmp / "c" / "cat_matrix.csv") + " " + q(tmp / "a" / "human/cat_matrix.csv"));
    ASSERT_EQ(vs_human.code, 0);
    EXPECT_NE(frob_csv.find(vs_human.out.substr(0, vs_human.out.size() - 1)), std::string::npos) << frob_csv << vs_human.out;

    EXPECT_EQ(run(tmp, "cluster " + q(tmp / "missing.csv")).code, 2);
}

TEST(Cli, EmbInspect) {
    oracle::TempDir tmp;
    write_embeddings(EmbeddingMatrix({"a", "b"}, 2, {3, 4, 0, 1}, EmbeddingMeta{"m", Modality::text, "src", {}}), tmp / "x.emb");
    auto r = run(tmp, "emb inspect " + q(tmp / "x.emb"));
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["dim"], 2);
    EXPECT_EQ(j["count"], 2);
    EXPECT_DOUBLE_EQ(j["max_norm"].get<double>(), 5.0);
    EXPECT_DOUBLE_EQ(j["min_norm"].get<double>(), 1.0);
    EXPECT_EQ(j["meta"]["model_id"], "m");

    { std::ofstream(tmp / "bad.emb") << "EMB2garbage"; }
    EXPECT_EQ(run(tmp, "emb inspect " + q(tmp / "bad.emb")).code, 2);
}

TEST(Cli, FixtureIsSeeded) {
    oracle::TempDir tmp;
    ASSERT_EQ(run(tmp, "fixture --seed 11 --models 2 --out " + q(tmp / "f1")).code, 0);
    ASSERT_EQ(run(tmp, "fixture --seed 11 --models 2 --out " + q(tmp / "f2")).code, 0);
    ASSERT_EQ(run(tmp, "fixture --seed 12 --models 2 --out " + q(tmp / "f3")).code, 0);
    EXPECT_EQ(snapshot(tmp / "f1"), snapshot(tmp / "f2"));
    EXPECT_NE(slurp(tmp / "f1" / "ratings.csv"), slurp(tmp / "f3" / "ratings.csv"));
}
